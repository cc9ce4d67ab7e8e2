#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"

namespace pedx {

/// Exactly rounded sum (Shewchuk's partials, as in Python's math.fsum). The result is the
/// double nearest the true sum, so it cannot depend on the order rows arrive in.
inline double order_independent_sum(const std::vector<double>& v) {
    std::vector<double> partials;
    for (double x : v) {
        require(std::isfinite(x), "sum of non-finite values");
        std::size_t i = 0;
        for (double y : partials) {
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[i++] = lo;
            x = hi;
        }
        partials.resize(i);
        partials.push_back(x);
    }
    if (partials.empty()) return 0.0;
    std::size_t n = partials.size();
    double hi = partials[--n], lo = 0.0;
    while (n > 0) {
        const double x = hi, y = partials[--n];
        hi = x + y;
        lo = y - (hi - x);
        if (lo != 0.0) break;
    }
    // Round half-even correction when the remaining partials push past the halfway point.
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) hi = x;
    }
    return hi;
}

inline double order_independent_mean(const std::vector<double>& v) {
    require(!v.empty(), "mean of empty column");
    return order_independent_sum(v) / static_cast<double>(v.size());
}

/// Z-score standardizer fitted on training rows only. Constant columns are dropped and
/// listed in `dropped`.
struct Scaler {
    std::vector<std::string> input_names;  // all columns seen at fit time
    std::vector<std::size_t> kept;         // indices into input_names
    std::vector<double> mean;              // per kept column
    std::vector<double> sd;                // population sd, per kept column
    std::vector<std::string> dropped;

    std::size_t input_dim() const { return input_names.size(); }
    std::size_t output_dim() const { return kept.size(); }

    std::vector<std::string> output_names() const {
        std::vector<std::string> out;
        for (auto k : kept) out.push_back(input_names[k]);
        return out;
    }

    Matrix apply(const Matrix& raw) const {
        require(raw.cols() == input_dim(), "Scaler::apply: expected " + std::to_string(input_dim()) + " columns, got " +
                                               std::to_string(raw.cols()));
        Matrix out(raw.rows(), kept.size());
        for (std::size_t i = 0; i < raw.rows(); ++i)
            for (std::size_t j = 0; j < kept.size(); ++j) out(i, j) = (raw(i, kept[j]) - mean[j]) / sd[j];
        return out;
    }

    std::vector<double> apply_row(std::span<const double> raw) const {
        require(raw.size() == input_dim(), "Scaler::apply_row: dimension mismatch");
        std::vector<double> out(kept.size());
        for (std::size_t j = 0; j < kept.size(); ++j) out[j] = (raw[kept[j]] - mean[j]) / sd[j];
        return out;
    }

    /// Maps normalized values back to the raw scale of the kept columns.
    Matrix invert(const Matrix& z) const {
        require(z.cols() == kept.size(), "Scaler::invert: dimension mismatch");
        Matrix out(z.rows(), z.cols());
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = z(i, j) * sd[j] + mean[j];
        return out;
    }
};

inline Scaler fit_scaler(const Matrix& X, std::vector<std::string> names = {}) {
    require(X.rows() >= 2, "fit_scaler: need at least 2 training rows");
    if (names.empty())
        for (std::size_t j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
    require(names.size() == X.cols(), "fit_scaler: column name count mismatch");
    Scaler s;
    s.input_names = std::move(names);
    const double n = static_cast<double>(X.rows());
    for (std::size_t j = 0; j < X.cols(); ++j) {
        auto col = X.col(j);
        const double mu = order_independent_mean(col);
        std::vector<double> sq(col.size());
        for (std::size_t i = 0; i < col.size(); ++i) sq[i] = (col[i] - mu) * (col[i] - mu);
        const double sd = std::sqrt(order_independent_sum(sq) / n);
        const bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
        if (constant || !(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
            s.dropped.push_back(s.input_names[j]);
            continue;
        }
        s.kept.push_back(j);
        s.mean.push_back(mu);
        s.sd.push_back(sd);
    }
    return s;
}

}  // namespace pedx
