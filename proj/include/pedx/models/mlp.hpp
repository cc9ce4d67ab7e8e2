#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/models/linear.hpp"
#include "pedx/models/spec.hpp"

namespace pedx {

/// Fully connected net with two ReLU hidden layers. Parameters live in one flat vector laid
/// out as W1, b1, W2, b2, W3, b3 with each W stored row-major as (fan_out x fan_in).
struct MlpShape {
    std::size_t input = 0;
    std::size_t h1 = 0;
    std::size_t h2 = 0;
    std::size_t output = 1;

    std::size_t param_count() const { return h1 * input + h1 + h2 * h1 + h2 + output * h2 + output; }
};

struct MlpNet {
    MlpShape shape;
    Task task = Task::Regression;  // Classification: sigmoid output with cross-entropy; else identity with MSE
    std::vector<double> theta;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

struct MlpView {
    ConstMap W1, W2, W3;
    ConstVec b1, b2, b3;

    static MlpView of(const MlpShape& s, const double* p) {
        const auto i = static_cast<Eigen::Index>(s.input), a = static_cast<Eigen::Index>(s.h1),
                   b = static_cast<Eigen::Index>(s.h2), o = static_cast<Eigen::Index>(s.output);
        const double* w1 = p;
        const double* c1 = w1 + a * i;
        const double* w2 = c1 + a;
        const double* c2 = w2 + b * a;
        const double* w3 = c2 + b;
        const double* c3 = w3 + o * b;
        return {ConstMap(w1, a, i), ConstMap(w2, b, a), ConstMap(w3, o, b),
                ConstVec(c1, a),    ConstVec(c2, b),    ConstVec(c3, o)};
    }
};

struct MlpForward {
    RowMat Z1, A1, Z2, A2, Z3;
};

inline MlpForward mlp_forward(const MlpNet& net, const RowMat& X) {
    const auto v = MlpView::of(net.shape, net.theta.data());
    MlpForward f;
    f.Z1 = (X * v.W1.transpose()).rowwise() + v.b1.transpose();
    f.A1 = f.Z1.cwiseMax(0.0);
    f.Z2 = (f.A1 * v.W2.transpose()).rowwise() + v.b2.transpose();
    f.A2 = f.Z2.cwiseMax(0.0);
    f.Z3 = (f.A2 * v.W3.transpose()).rowwise() + v.b3.transpose();
    return f;
}

inline RowMat gather_rows(const Matrix& M, std::span<const std::size_t> rows) {
    RowMat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(M.cols()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < M.cols(); ++j) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = M(rows[r], j);
    return out;
}

inline double weight_norm_sq(const MlpNet& net) {
    const auto v = MlpView::of(net.shape, net.theta.data());
    return v.W1.squaredNorm() + v.W2.squaredNorm() + v.W3.squaredNorm();
}

/// Data term of the loss; Z3 holds output pre-activations.
inline double data_loss(Task task, const RowMat& Z3, const RowMat& Y) {
    const double B = static_cast<double>(Z3.rows());
    if (task == Task::Classification) {
        double s = 0.0;
        for (Eigen::Index r = 0; r < Z3.rows(); ++r) s += softplus(Z3(r, 0)) - Y(r, 0) * Z3(r, 0);
        return s / B;
    }
    return 0.5 * (Z3 - Y).squaredNorm() / (B * static_cast<double>(Z3.cols()));
}

}  // namespace detail

/// Loss over the given rows: mean cross-entropy (classification) or half mean squared error
/// per output (regression), plus l2/2 times the squared norm of the weight matrices.
inline double mlp_loss(const MlpNet& net, const Matrix& X, const Matrix& Y, std::span<const std::size_t> batch,
                       double l2) {
    const auto Xb = detail::gather_rows(X, batch);
    const auto Yb = detail::gather_rows(Y, batch);
    const auto f = detail::mlp_forward(net, Xb);
    return detail::data_loss(net.task, f.Z3, Yb) + 0.5 * l2 * detail::weight_norm_sq(net);
}

/// Backpropagation gradient of mlp_loss, in the flat parameter layout. Also stores the loss
/// in *loss_out when given.
inline std::vector<double> mlp_gradients(const MlpNet& net, const Matrix& X, const Matrix& Y,
                                         std::span<const std::size_t> batch, double l2, double* loss_out = nullptr) {
    using detail::RowMat;
    const auto& s = net.shape;
    const auto Xb = detail::gather_rows(X, batch);
    const auto Yb = detail::gather_rows(Y, batch);
    const auto f = detail::mlp_forward(net, Xb);
    const auto v = detail::MlpView::of(s, net.theta.data());
    const double B = static_cast<double>(batch.size());
    if (loss_out) *loss_out = detail::data_loss(net.task, f.Z3, Yb) + 0.5 * l2 * detail::weight_norm_sq(net);

    RowMat dZ3;
    if (net.task == Task::Classification) {
        dZ3 = f.Z3.unaryExpr([](double z) { return sigmoid(z); }) - Yb;
        dZ3 /= B;
    } else {
        dZ3 = (f.Z3 - Yb) / (B * static_cast<double>(s.output));
    }
    const RowMat gW3 = dZ3.transpose() * f.A2 + l2 * v.W3;
    const Eigen::VectorXd gb3 = dZ3.colwise().sum().transpose();
    const RowMat dZ2 = (dZ3 * v.W3).cwiseProduct((f.Z2.array() > 0.0).cast<double>().matrix());
    const RowMat gW2 = dZ2.transpose() * f.A1 + l2 * v.W2;
    const Eigen::VectorXd gb2 = dZ2.colwise().sum().transpose();
    const RowMat dZ1 = (dZ2 * v.W2).cwiseProduct((f.Z1.array() > 0.0).cast<double>().matrix());
    const RowMat gW1 = dZ1.transpose() * Xb + l2 * v.W1;
    const Eigen::VectorXd gb1 = dZ1.colwise().sum().transpose();

    std::vector<double> g;
    g.reserve(s.param_count());
    auto put = [&](const auto& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) g.push_back(m(r, c));
    };
    put(gW1);
    put(gb1);
    put(gW2);
    put(gb2);
    put(gW3);
    put(gb3);
    return g;
}

/// He-normal weights, zero biases.
inline MlpNet init_mlp(const MlpShape& shape, Task task, std::uint64_t seed) {
    MlpNet net{shape, task, std::vector<double>(shape.param_count(), 0.0)};
    Rng rng(seed);
    std::size_t k = 0;
    auto fill = [&](std::size_t fan_out, std::size_t fan_in) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < fan_out * fan_in; ++i) net.theta[k++] = normal(rng, 0.0, sd);
        k += fan_out;  // biases stay zero
    };
    fill(shape.h1, shape.input);
    fill(shape.h2, shape.h1);
    fill(shape.output, shape.h2);
    return net;
}

/// A trained net plus the target standardization used for regression.
struct MlpModel {
    MlpNet net;
    std::vector<double> y_mean;  // regression only; predictions are mapped back with these
    std::vector<double> y_sd;

    /// Regression: outputs on the original target scale. Classification: P(class 1).
    Matrix predict(const Matrix& X) const {
        require(X.cols() == net.shape.input, "MLP predict: expected " + std::to_string(net.shape.input) + " columns");
        detail::RowMat Xe(static_cast<Eigen::Index>(X.rows()), static_cast<Eigen::Index>(X.cols()));
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t j = 0; j < X.cols(); ++j) Xe(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X(i, j);
        const auto f = detail::mlp_forward(net, Xe);
        Matrix out(X.rows(), net.shape.output);
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t o = 0; o < net.shape.output; ++o) {
                const double z = f.Z3(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
                out(i, o) = net.task == Task::Classification ? sigmoid(z) : z * y_sd[o] + y_mean[o];
            }
        return out;
    }
};

inline MlpModel fit_mlp(const Matrix& X, const Matrix& Y, Task task, const std::vector<int>& hidden,
                        const GradientParams& gd, std::uint64_t seed, std::vector<double>& history) {
    const std::size_t n = X.rows();
    MlpShape shape{X.cols(), static_cast<std::size_t>(hidden.at(0)), static_cast<std::size_t>(hidden.at(1)),
                   task == Task::Classification ? std::size_t{1} : Y.cols()};
    MlpModel m{init_mlp(shape, task, derive_seed(seed, 1)), {}, {}};

    Matrix T = Y;
    if (task == Task::Regression) {
        m.y_mean.assign(Y.cols(), 0.0);
        m.y_sd.assign(Y.cols(), 1.0);
        for (std::size_t o = 0; o < Y.cols(); ++o) {
            double mu = 0.0, ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += Y(i, o);
            mu /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) ss += (Y(i, o) - mu) * (Y(i, o) - mu);
            const double sd = std::sqrt(ss / static_cast<double>(n));
            m.y_mean[o] = mu;
            m.y_sd[o] = sd > 1e-12 ? sd : 1.0;
            for (std::size_t i = 0; i < n; ++i) T(i, o) = (Y(i, o) - mu) / m.y_sd[o];
        }
    }

    Rng rng(derive_seed(seed, 2));
    const bool full = gd.batch_size == 0 || static_cast<std::size_t>(gd.batch_size) >= n;
    const std::size_t bs = full ? n : static_cast<std::size_t>(gd.batch_size);
    std::vector<double> vel(shape.param_count(), 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < gd.epochs; ++epoch) {
        const auto order = detail::epoch_order(n, rng, !full);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(bs, n - start));
            double l = 0.0;
            const auto g = mlp_gradients(m.net, X, T, batch, gd.l2, &l);
            if (!std::isfinite(l))
                throw RuntimeFailure("MLP: non-finite loss at epoch " + std::to_string(epoch) + " (learning_rate " +
                                     std::to_string(gd.learning_rate) + ", hidden " + std::to_string(shape.h1) + "," +
                                     std::to_string(shape.h2) + ")");
            for (std::size_t k = 0; k < g.size(); ++k) {
                vel[k] = gd.momentum * vel[k] - gd.learning_rate * g[k];
                m.net.theta[k] += vel[k];
            }
            epoch_loss += l;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        history.push_back(epoch_loss);
        if (std::abs(prev - epoch_loss) < gd.tol) break;
        prev = epoch_loss;
    }
    return m;
}

}  // namespace pedx
