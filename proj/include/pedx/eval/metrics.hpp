#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/point.hpp"

namespace pedx {

using Trajectory = std::vector<Point2>;

/// Mean absolute error.
inline double mae(std::span<const double> y, std::span<const double> yhat) {
    require(!y.empty(), "mae: empty input");
    require(y.size() == yhat.size(), "mae: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

/// 100 * MAE / mean(y), i.e. the absolute error relative to the mean target.
inline double mape(std::span<const double> y, std::span<const double> yhat) {
    const double m = mae(y, yhat);
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(y.size());
    require(ybar != 0.0, "mape: mean target is zero");
    return 100.0 * m / ybar;
}

struct Confusion {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Confusion confusion(std::span<const int> labels, std::span<const int> preds) {
    require(!labels.empty(), "confusion: empty input");
    require(labels.size() == preds.size(), "confusion: length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool y = labels[i] != 0, p = preds[i] != 0;
        if (y && p) ++c.tp;
        else if (!y && !p) ++c.tn;
        else if (p) ++c.fp;
        else ++c.fn;
    }
    return c;
}

/// Percent of correct labels.
inline double acc(const Confusion& c) {
    const auto n = c.tp + c.tn + c.fp + c.fn;
    require(n > 0, "acc: empty input");
    return 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

/// Percent F1 of the positive class; undefined when there are no positives at all.
inline double f1(const Confusion& c) {
    require(c.tp + c.fp + c.fn > 0, "f1: no positive labels or predictions");
    return 100.0 * 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

inline double acc(std::span<const int> labels, std::span<const int> preds) { return acc(confusion(labels, preds)); }
inline double f1(std::span<const int> labels, std::span<const int> preds) { return f1(confusion(labels, preds)); }

/// Average Euclidean distance over all n x m corresponding points.
inline double ade(std::span<const Trajectory> truth, std::span<const Trajectory> pred) {
    require(!truth.empty(), "ade: empty input");
    require(truth.size() == pred.size(), "ade: trajectory count mismatch");
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(!truth[i].empty() && truth[i].size() == pred[i].size(),
                "ade: trajectory " + std::to_string(i) + " has mismatched point count");
        for (std::size_t j = 0; j < truth[i].size(); ++j) {
            s += std::hypot(truth[i][j].x - pred[i][j].x, truth[i][j].y - pred[i][j].y);
            ++count;
        }
    }
    return s / static_cast<double>(count);
}

/// Trajectory stored as interleaved coordinates x0, y0, x1, y1, ...
inline Trajectory unflatten(std::span<const double> xy) {
    require(xy.size() % 2 == 0, "unflatten: odd coordinate count");
    Trajectory t(xy.size() / 2);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = {xy[2 * j], xy[2 * j + 1]};
    return t;
}

inline std::vector<double> flatten(const Trajectory& t) {
    std::vector<double> out;
    out.reserve(2 * t.size());
    for (const auto& p : t) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

}  // namespace pedx
