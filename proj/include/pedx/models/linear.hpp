#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/models/spec.hpp"

namespace pedx {

/// y = X * coef + intercept, one column of coef per output.
struct LinearParams {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<double> coef;       // input_dim x output_dim, row-major
    std::vector<double> intercept;  // output_dim
    bool ridge_jitter_applied = false;

    double weight(std::size_t j, std::size_t o) const { return coef[j * output_dim + o]; }

    Matrix predict(const Matrix& X) const {
        Matrix out(X.rows(), output_dim);
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t o = 0; o < output_dim; ++o) {
                double s = intercept[o];
                for (std::size_t j = 0; j < input_dim; ++j) s += X(i, j) * weight(j, o);
                out(i, o) = s;
            }
        return out;
    }
};

inline constexpr double kRidgeJitter = 1e-8;

/// Ordinary least squares through the normal equations; adds a 1e-8 ridge when the Gram
/// matrix is singular.
inline LinearParams fit_ols(const Matrix& X, const Matrix& Y) {
    require(X.rows() == Y.rows(), "fit_ols: X and Y row counts differ");
    const std::size_t n = X.rows(), d = X.cols(), o = Y.cols();
    Eigen::MatrixXd A(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < d; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = X(i, j);
    }
    Eigen::MatrixXd B(n, o);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < o; ++k) B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = Y(i, k);

    Eigen::MatrixXd G = A.transpose() * A;
    const Eigen::MatrixXd R = A.transpose() * B;
    LinearParams p;
    p.input_dim = d;
    p.output_dim = o;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (!(lmin > 1e-12 * std::max(1.0, lmax))) {
        G.diagonal().array() += kRidgeJitter;
        p.ridge_jitter_applied = true;
    }
    const Eigen::MatrixXd beta = G.ldlt().solve(R);

    p.intercept.resize(o);
    p.coef.resize(d * o);
    for (std::size_t k = 0; k < o; ++k) {
        p.intercept[k] = beta(0, static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < d; ++j)
            p.coef[j * o + k] = beta(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(k));
    }
    for (double v : p.coef)
        if (!std::isfinite(v)) throw RuntimeFailure("fit_ols: non-finite coefficients");
    return p;
}

/// Linear binary classifier: score = w . x + b. Logistic regression reports sigmoid(score)
/// as the class-1 probability; the SVM reports sigmoid of its margin, uncalibrated.
struct LinearClassifier {
    std::vector<double> w;
    double b = 0.0;

    double score(std::span<const double> x) const {
        double s = b;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
        return s;
    }
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng, bool shuffle) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (shuffle) shuffle_in_place(idx, rng);
    return idx;
}

/// Loss and gradient for a linear classifier over a batch. Gradient layout: [w..., b].
template <class PointLoss>
double linear_batch(const LinearClassifier& m, const Matrix& X, const Matrix& Y, std::span<const std::size_t> batch,
                    double reg, PointLoss&& point, std::vector<double>& grad) {
    const std::size_t d = m.w.size();
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
        const auto x = X.row(i);
        const auto [l, dl] = point(m.score(x), Y(i, 0));
        loss += l * inv;
        for (std::size_t j = 0; j < d; ++j) grad[j] += dl * x[j] * inv;
        grad[d] += dl * inv;
    }
    double wn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        wn += m.w[j] * m.w[j];
        grad[j] += reg * m.w[j];
    }
    return loss + 0.5 * reg * wn;
}

template <class PointLoss>
LinearClassifier train_linear_classifier(const Matrix& X, const Matrix& Y, const GradientParams& gd, double reg,
                                         std::uint64_t seed, PointLoss&& point, std::vector<double>& history,
                                         const char* name) {
    const std::size_t n = X.rows(), d = X.cols();
    LinearClassifier m;
    m.w.assign(d, 0.0);
    std::vector<double> grad(d + 1), vel(d + 1, 0.0);
    Rng rng(seed);
    const bool full = gd.batch_size == 0 || static_cast<std::size_t>(gd.batch_size) >= n;
    const std::size_t bs = full ? n : static_cast<std::size_t>(gd.batch_size);
    double prev = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < gd.epochs; ++epoch) {
        const auto order = epoch_order(n, rng, !full);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(bs, n - start));
            const double l = linear_batch(m, X, Y, batch, reg, point, grad);
            if (!std::isfinite(l))
                throw RuntimeFailure(std::string(name) + ": non-finite loss at epoch " + std::to_string(epoch) +
                                     " (learning_rate " + std::to_string(gd.learning_rate) + ")");
            epoch_loss += l;
            ++batches;
            for (std::size_t j = 0; j <= d; ++j) {
                vel[j] = gd.momentum * vel[j] - gd.learning_rate * grad[j];
                if (j < d)
                    m.w[j] += vel[j];
                else
                    m.b += vel[j];
            }
        }
        epoch_loss /= static_cast<double>(batches);
        history.push_back(epoch_loss);
        if (std::abs(prev - epoch_loss) < gd.tol) break;
        prev = epoch_loss;
    }
    return m;
}

}  // namespace detail

/// Logistic regression: mean cross-entropy plus l2/2 |w|^2.
inline LinearClassifier fit_logistic(const Matrix& X, const Matrix& Y, const GradientParams& gd, std::uint64_t seed,
                                     std::vector<double>& history) {
    auto point = [](double z, double y) {
        // -[y log s + (1-y) log(1-s)] = softplus(z) - y z
        return std::pair{softplus(z) - y * z, sigmoid(z) - y};
    };
    return detail::train_linear_classifier(X, Y, gd, gd.l2, seed, point, history, "logistic regression");
}

/// Primal linear SVM: mean hinge loss plus |w|^2 / (2 C n), by subgradient descent.
inline LinearClassifier fit_linear_svm(const Matrix& X, const Matrix& Y, const GradientParams& gd, double C,
                                       std::uint64_t seed, std::vector<double>& history) {
    auto point = [](double z, double y) {
        const double s = y > 0.5 ? 1.0 : -1.0;
        const double margin = 1.0 - s * z;
        return margin > 0.0 ? std::pair{margin, -s} : std::pair{0.0, 0.0};
    };
    const double reg = 1.0 / (C * static_cast<double>(X.rows()));
    return detail::train_linear_classifier(X, Y, gd, reg, seed, point, history, "linear SVM");
}

}  // namespace pedx
