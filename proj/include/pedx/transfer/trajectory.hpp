#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/eval/cross_validate.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/features/scaler.hpp"
#include "pedx/models/agglomerative.hpp"
#include "pedx/models/model.hpp"

namespace pedx {

enum class Strategy { Separate, Joint, CountryFeature, ClusterFeature, ZebraUsageFeature };

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Separate: return "Separate";
        case Strategy::Joint: return "Joint";
        case Strategy::CountryFeature: return "CountryFeature";
        case Strategy::ClusterFeature: return "ClusterFeature";
        case Strategy::ZebraUsageFeature: return "ZebraUsageFeature";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view s) {
    if (s == "Separate") return Strategy::Separate;
    if (s == "Joint") return Strategy::Joint;
    if (s == "CountryFeature" || s == "Country") return Strategy::CountryFeature;
    if (s == "ClusterFeature" || s == "Cluster") return Strategy::ClusterFeature;
    if (s == "ZebraUsageFeature" || s == "ZebraUsage") return Strategy::ZebraUsageFeature;
    throw InputError("unknown strategy '" + std::string(s) + "'");
}

struct StrategySpec {
    Strategy strategy = Strategy::Joint;
    std::size_t n_clusters = 2;  // ClusterFeature only
    ModelSpec model;
    std::string reference_domain;  // CountryFeature: rows of this domain get 0, all others 1
    /// ClusterFeature on trajectories: one regressor per cluster, rows routed by the
    /// classifier, instead of a shared regressor with the one-hot appended.
    bool per_cluster = false;

    std::string label() const {
        std::string s(to_string(strategy));
        if (strategy == Strategy::ClusterFeature) s += "(k=" + std::to_string(n_clusters) + (per_cluster ? ",per-cluster" : "") + ")";
        return s + "/" + std::string(to_string(model.kind));
    }

    void validate(PredictionTask task) const {
        model.validate();
        require(n_clusters >= 1, "StrategySpec: n_clusters must be >= 1");
        if (strategy == Strategy::ZebraUsageFeature)
            require(task == PredictionTask::Trajectory, "ZebraUsageFeature applies to the trajectory task only");
    }
};

namespace detail {

/// The base kind recast as a classifier for an auxiliary label (cluster id, zebra usage).
inline ModelSpec auxiliary_classifier(ModelSpec spec, std::uint64_t seed) {
    if (spec.kind == ModelKind::LinearRegression) spec.kind = ModelKind::LogisticRegression;
    if (spec.kind == ModelKind::MLP) spec.hidden = kHiddenZebraUsage;
    spec.task = Task::Classification;
    spec.seed = seed;
    return spec;
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t k) {
    Matrix out(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) out(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return out;
}

inline std::vector<std::string> one_hot_names(const std::string& stem, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < k; ++c) out.push_back(stem + "_" + std::to_string(c + 1));
    return out;
}

inline Matrix country_column(const Dataset& d, const std::string& reference) {
    Matrix out(d.rows(), 1);
    for (std::size_t i = 0; i < d.rows(); ++i) out(i, 0) = d.domains[i] == reference ? 0.0 : 1.0;
    return out;
}

}  // namespace detail

struct ClusterRegressor {
    Scaler scaler;
    TrainedModel model;
};

/// Everything needed to predict a crossing path from features alone.
struct TrajectoryBundle {
    std::size_t resample_count = 0;
    StrategySpec strategy;
    std::vector<std::string> base_names;
    std::optional<Clustering> clusters;    // ClusterFeature: clusters of training trajectories
    std::optional<OneVsRest> classifier;   // ClusterFeature: features -> cluster
    std::optional<TrainedModel> zebra_classifier;  // ZebraUsageFeature
    Scaler aux_scaler;                     // standardizes base features for the classifiers
    Scaler scaler;                         // standardizes the regressor input
    TrainedModel regressor;                // multi-output over 2m coordinates
    /// Per-cluster mode; clusters with fewer than two training rows fall back to `regressor`.
    std::vector<std::optional<ClusterRegressor>> cluster_regressors;
};

namespace detail {

/// Base features plus whatever the strategy appends. `aux` holds the cluster ids or zebra
/// labels to encode (true labels when fitting, predicted ones otherwise).
inline Matrix trajectory_inputs(const TrajectoryBundle& b, const Dataset& d, const std::vector<int>& aux) {
    switch (b.strategy.strategy) {
        case Strategy::CountryFeature: return d.X.hcat(country_column(d, b.strategy.reference_domain));
        case Strategy::ClusterFeature: return d.X.hcat(one_hot(aux, b.clusters->n_clusters));
        case Strategy::ZebraUsageFeature: {
            Matrix z(d.rows(), 1);
            for (std::size_t i = 0; i < d.rows(); ++i) z(i, 0) = aux[i];
            return d.X.hcat(z);
        }
        default: return d.X;
    }
}

inline std::vector<std::string> trajectory_input_names(const TrajectoryBundle& b) {
    auto names = b.base_names;
    switch (b.strategy.strategy) {
        case Strategy::CountryFeature: names.push_back("country"); break;
        case Strategy::ClusterFeature: {
            const auto extra = one_hot_names("cluster", b.clusters->n_clusters);
            names.insert(names.end(), extra.begin(), extra.end());
            break;
        }
        case Strategy::ZebraUsageFeature: names.push_back("zebra_usage"); break;
        default: break;
    }
    return names;
}

}  // namespace detail

/// Trajectory clustering, cluster classification and multi-output regression fitted on the
/// training rows only.
inline TrajectoryBundle fit_trajectory_pipeline(const Dataset& train, const StrategySpec& strategy, std::uint64_t seed) {
    require(train.task == PredictionTask::Trajectory, "fit_trajectory_pipeline: dataset is not a trajectory dataset");
    strategy.validate(train.task);
    require(train.rows() >= 2, "fit_trajectory_pipeline: need at least 2 training rows");
    TrajectoryBundle b;
    b.resample_count = train.Y.cols() / 2;
    b.strategy = strategy;
    b.base_names = train.names;
    b.aux_scaler = fit_scaler(train.X, train.names);

    std::vector<int> aux;
    if (strategy.strategy == Strategy::ClusterFeature) {
        const std::size_t k = std::min(strategy.n_clusters, train.rows());
        b.clusters = detail::trajectory_reference_clusters(train.Y, k);
        aux = b.clusters->labels;
        b.classifier = fit_one_vs_rest(detail::auxiliary_classifier(strategy.model, derive_seed(seed, 11)),
                                       b.aux_scaler.apply(train.X), aux, k, b.aux_scaler.output_names());
    } else if (strategy.strategy == Strategy::ZebraUsageFeature) {
        aux = train.zebra_used;
        Matrix y(train.rows(), 1);
        for (std::size_t i = 0; i < train.rows(); ++i) y(i, 0) = aux[i];
        const auto spec = detail::auxiliary_classifier(strategy.model, derive_seed(seed, 12));
        const bool both = std::find(aux.begin(), aux.end(), 0) != aux.end() && std::find(aux.begin(), aux.end(), 1) != aux.end();
        if (both) b.zebra_classifier = fit(spec, b.aux_scaler.apply(train.X), y, b.aux_scaler.output_names());
    }
    const Matrix X = detail::trajectory_inputs(b, train, aux);
    b.scaler = fit_scaler(X, detail::trajectory_input_names(b));
    ModelSpec reg = strategy.model;
    reg.task = Task::Regression;
    reg.seed = derive_seed(seed, 13);
    b.regressor = fit(reg, b.scaler.apply(X), train.Y, b.scaler.output_names());
    if (strategy.strategy == Strategy::ClusterFeature && strategy.per_cluster) {
        b.cluster_regressors.resize(b.clusters->n_clusters);
        for (std::size_t c = 0; c < b.clusters->n_clusters; ++c) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < train.rows(); ++i)
                if (aux[i] == static_cast<int>(c)) idx.push_back(i);
            if (idx.size() < 2) continue;
            const Dataset part = train.subset(idx);
            ClusterRegressor cr;
            cr.scaler = fit_scaler(part.X, part.names);
            ModelSpec rs = reg;
            rs.seed = derive_seed(seed, 14, c);
            cr.model = fit(rs, cr.scaler.apply(part.X), part.Y, cr.scaler.output_names());
            b.cluster_regressors[c] = std::move(cr);
        }
    }
    return b;
}

/// Auxiliary labels the bundle predicts for new rows (cluster id or zebra usage).
inline std::vector<int> predict_auxiliary(const TrajectoryBundle& b, const Dataset& d) {
    if (b.classifier) return b.classifier->predict(b.aux_scaler.apply(d.X));
    if (b.strategy.strategy == Strategy::ZebraUsageFeature) {
        if (b.zebra_classifier) return b.zebra_classifier->predict_labels(b.aux_scaler.apply(d.X));
        return std::vector<int>(d.rows(), 0);
    }
    return {};
}

/// Predicted paths, one row of 2m interleaved coordinates per input row. Uses features only.
inline Matrix predict_trajectory(const TrajectoryBundle& b, const Dataset& d) {
    require(d.names == b.base_names, "predict_trajectory: feature columns differ from training");
    const auto aux = predict_auxiliary(b, d);
    Matrix out = b.regressor.predict(b.scaler.apply(detail::trajectory_inputs(b, d, aux)));
    for (std::size_t c = 0; c < b.cluster_regressors.size(); ++c) {
        if (!b.cluster_regressors[c]) continue;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < d.rows(); ++i)
            if (aux[i] == static_cast<int>(c)) idx.push_back(i);
        if (idx.empty()) continue;
        const auto& cr = *b.cluster_regressors[c];
        const Matrix p = cr.model.predict(cr.scaler.apply(d.X.select_rows(idx)));
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < out.cols(); ++j) out(idx[r], j) = p(r, j);
    }
    return out;
}

inline Trajectory predict_trajectory(const TrajectoryBundle& b, const Dataset& d, std::size_t row) {
    const std::size_t idx[] = {row};
    return unflatten(predict_trajectory(b, d.subset(idx)).row(0));
}

}  // namespace pedx
