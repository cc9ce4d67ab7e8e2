#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/core/parallel.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/models/forest.hpp"
#include "pedx/models/linear.hpp"
#include "pedx/models/mlp.hpp"
#include "pedx/models/spec.hpp"

namespace pedx {

using Importance = std::vector<std::pair<std::string, double>>;

inline constexpr int kPermutationRepeats = 5;

struct TrainedModel {
    ModelSpec spec;
    std::size_t input_dim = 0;
    std::size_t output_dim = 1;
    std::vector<std::string> column_names;
    std::variant<LinearParams, LinearClassifier, ForestModel, MlpModel> params;
    std::vector<double> loss_history;  // gradient-trained kinds only
    Importance importance;             // descending score, ties by column order

    /// Regression: one value per output. Classification: P(class 1) in column 0.
    Matrix predict(const Matrix& X) const {
        require(X.cols() == input_dim, "predict: expected " + std::to_string(input_dim) + " columns, got " +
                                           std::to_string(X.cols()));
        return std::visit(
            [&](const auto& p) -> Matrix {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, LinearClassifier>) {
                    Matrix out(X.rows(), 1);
                    for (std::size_t i = 0; i < X.rows(); ++i) out(i, 0) = sigmoid(p.score(X.row(i)));
                    return out;
                } else {
                    return p.predict(X);
                }
            },
            params);
    }

    /// Class labels thresholded at probability 0.5.
    std::vector<int> predict_labels(const Matrix& X) const {
        require(spec.task == Task::Classification, "predict_labels: model is not a classifier");
        const Matrix p = predict(X);
        std::vector<int> out(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) out[i] = p(i, 0) >= 0.5 ? 1 : 0;
        return out;
    }
};

namespace detail {

inline Importance rank_importance(const std::vector<std::string>& names, const std::vector<double>& scores) {
    std::vector<std::size_t> order(names.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    Importance out;
    for (std::size_t j : order) out.emplace_back(names[j], scores[j]);
    return out;
}

inline double population_sd(const Matrix& X, std::size_t j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) mu += X(i, j);
    mu /= static_cast<double>(X.rows());
    double ss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) ss += (X(i, j) - mu) * (X(i, j) - mu);
    return std::sqrt(ss / static_cast<double>(X.rows()));
}

/// Error the permutation importance measures: mean absolute error over all outputs, or the
/// misclassification rate.
inline double prediction_error(const TrainedModel& m, const Matrix& X, const Matrix& Y) {
    const Matrix p = m.predict(X);
    double s = 0.0;
    if (m.spec.task == Task::Classification) {
        for (std::size_t i = 0; i < X.rows(); ++i) s += ((p(i, 0) >= 0.5) != (Y(i, 0) > 0.5)) ? 1.0 : 0.0;
        return s / static_cast<double>(X.rows());
    }
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t o = 0; o < p.cols(); ++o) s += std::abs(p(i, o) - Y(i, o));
    return s / static_cast<double>(p.rows() * p.cols());
}

inline void check_training_data(const ModelSpec& spec, const Matrix& X, const Matrix& Y) {
    require(X.rows() >= 2, "fit: need at least 2 training rows, got " + std::to_string(X.rows()));
    require(X.cols() >= 1, "fit: design matrix has no columns");
    require(Y.rows() == X.rows(), "fit: " + std::to_string(Y.rows()) + " targets for " + std::to_string(X.rows()) +
                                      " rows");
    require(Y.cols() >= 1, "fit: no target columns");
    require(X.all_finite(), "fit: design matrix has non-finite entries");
    require(Y.all_finite(), "fit: targets have non-finite entries");
    if (spec.task == Task::Classification) {
        require(Y.cols() == 1, "fit: classification takes one target column");
        for (std::size_t i = 0; i < Y.rows(); ++i)
            require(Y(i, 0) == 0.0 || Y(i, 0) == 1.0, "fit: classification target row " + std::to_string(i) +
                                                          " is not 0 or 1");
    }
}

}  // namespace detail

/// Permutation importance: mean increase of the prediction error when one column is
/// shuffled, over kPermutationRepeats shuffles. Shuffle (j, r) uses stream (seed, j, r).
inline std::vector<double> permutation_importance(const TrainedModel& m, const Matrix& X, const Matrix& Y,
                                                  std::uint64_t seed) {
    const double base = detail::prediction_error(m, X, Y);
    std::vector<double> score(X.cols(), 0.0);
    parallel_for(X.cols(), [&](std::size_t j) {
        double acc = 0.0;
        for (int r = 0; r < kPermutationRepeats; ++r) {
            Rng rng(derive_seed(seed, j, static_cast<std::uint64_t>(r)));
            std::vector<double> col = X.col(j);
            shuffle_in_place(col, rng);
            Matrix Xp = X;
            for (std::size_t i = 0; i < X.rows(); ++i) Xp(i, j) = col[i];
            acc += detail::prediction_error(m, Xp, Y) - base;
        }
        score[j] = acc / kPermutationRepeats;
    });
    return score;
}

/// Per-family importance: linear kinds use |coefficient| times the column's sd (averaged
/// over outputs), forests the normalized impurity decrease, the MLP permutation importance
/// on the given validation rows.
inline Importance feature_importance(const TrainedModel& m, const Matrix& X_val, const Matrix& Y_val,
                                     std::uint64_t seed) {
    std::vector<double> s(m.input_dim, 0.0);
    if (const auto* lp = std::get_if<LinearParams>(&m.params)) {
        for (std::size_t j = 0; j < m.input_dim; ++j) {
            const double sd = detail::population_sd(X_val, j);
            for (std::size_t o = 0; o < lp->output_dim; ++o) s[j] += std::abs(lp->weight(j, o)) * sd;
            s[j] /= static_cast<double>(lp->output_dim);
        }
    } else if (const auto* lc = std::get_if<LinearClassifier>(&m.params)) {
        for (std::size_t j = 0; j < m.input_dim; ++j) s[j] = std::abs(lc->w[j]) * detail::population_sd(X_val, j);
    } else if (const auto* fm = std::get_if<ForestModel>(&m.params)) {
        s = fm->impurity_importance;
    } else {
        s = permutation_importance(m, X_val, Y_val, seed);
    }
    return detail::rank_importance(m.column_names, s);
}

/// Fits the model family named by spec. Importance is computed on the training rows.
inline TrainedModel fit(const ModelSpec& spec, const Matrix& X, const Matrix& Y, std::vector<std::string> names = {}) {
    spec.validate();
    detail::check_training_data(spec, X, Y);
    if (names.empty())
        for (std::size_t j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
    require(names.size() == X.cols(), "fit: column name count mismatch");

    TrainedModel m;
    m.spec = spec;
    m.input_dim = X.cols();
    m.output_dim = spec.task == Task::Classification ? 1 : Y.cols();
    m.column_names = std::move(names);
    switch (spec.kind) {
        case ModelKind::LinearRegression: m.params = fit_ols(X, Y); break;
        case ModelKind::LogisticRegression: m.params = fit_logistic(X, Y, spec.gd, spec.seed, m.loss_history); break;
        case ModelKind::LinearSVM:
            m.params = fit_linear_svm(X, Y, spec.gd, spec.svm_c, spec.seed, m.loss_history);
            break;
        case ModelKind::RandomForest: m.params = fit_forest(X, Y, spec.task, spec.forest, spec.seed); break;
        case ModelKind::MLP: m.params = fit_mlp(X, Y, spec.task, spec.hidden, spec.gd, spec.seed, m.loss_history); break;
    }
    m.importance = feature_importance(m, X, Y, derive_seed(spec.seed, 0x1AA));
    return m;
}

/// One binary model per class; the predicted class is the one with the highest score,
/// ties going to the lower class index.
struct OneVsRest {
    std::size_t n_classes = 0;
    std::vector<TrainedModel> models;  // empty when n_classes == 1

    Matrix predict_scores(const Matrix& X) const {
        Matrix out(X.rows(), n_classes, n_classes == 1 ? 1.0 : 0.0);
        for (std::size_t c = 0; c < models.size(); ++c) {
            const Matrix p = models[c].predict(X);
            for (std::size_t i = 0; i < X.rows(); ++i) out(i, c) = p(i, 0);
        }
        return out;
    }

    std::vector<int> predict(const Matrix& X) const {
        const Matrix s = predict_scores(X);
        std::vector<int> out(X.rows(), 0);
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t c = 1; c < n_classes; ++c)
                if (s(i, c) > s(i, static_cast<std::size_t>(out[i]))) out[i] = static_cast<int>(c);
        return out;
    }
};

inline OneVsRest fit_one_vs_rest(ModelSpec spec, const Matrix& X, const std::vector<int>& labels, std::size_t n_classes,
                                 const std::vector<std::string>& names = {}) {
    require(labels.size() == X.rows(), "fit_one_vs_rest: label count mismatch");
    require(n_classes >= 1, "fit_one_vs_rest: need at least one class");
    spec.task = Task::Classification;
    if (spec.kind == ModelKind::LinearRegression) spec.kind = ModelKind::LogisticRegression;
    OneVsRest o;
    o.n_classes = n_classes;
    if (n_classes == 1) return o;
    o.models.resize(n_classes);
    const std::uint64_t base_seed = spec.seed;
    for (std::size_t c = 0; c < n_classes; ++c) {
        Matrix Y(X.rows(), 1);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < n_classes,
                    "fit_one_vs_rest: label out of range at row " + std::to_string(i));
            Y(i, 0) = static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0;
        }
        spec.seed = derive_seed(base_seed, c);
        o.models[c] = fit(spec, X, Y, names);
    }
    return o;
}

}  // namespace pedx
