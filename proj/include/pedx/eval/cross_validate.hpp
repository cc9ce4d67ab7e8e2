#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/eval/metrics.hpp"
#include "pedx/eval/splits.hpp"
#include "pedx/features/scaler.hpp"
#include "pedx/models/agglomerative.hpp"
#include "pedx/models/model.hpp"

namespace pedx {

using Metrics = std::vector<std::pair<std::string, double>>;

struct FoldReport {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    Metrics metrics;
};

struct EvalReport {
    std::string label;  // model kind or strategy name
    PredictionTask task = PredictionTask::GapSelection;
    SplitMode mode = SplitMode::ByParticipant;
    std::vector<FoldReport> folds;
    Metrics mean;        // per metric, mean over the folds that report it
    Importance importance;  // fold-averaged scores, descending
    Matrix predictions;  // out-of-fold predictions, aligned with the evaluated rows

    double metric(const std::string& name) const {
        for (const auto& [k, v] : mean)
            if (k == name) return v;
        throw InputError("EvalReport: no metric '" + name + "'");
    }

    bool has_metric(const std::string& name) const {
        return std::any_of(mean.begin(), mean.end(), [&](const auto& kv) { return kv.first == name; });
    }
};

/// What a learner returns for one fold.
struct FoldOutput {
    Matrix predictions;  // regression values, P(class 1), or flattened trajectories
    Importance importance;
};

/// Fits on `train` and predicts `test`. The seed is already specific to the fold.
using FoldLearner = std::function<FoldOutput(const Dataset& train, const Dataset& test, std::uint64_t seed)>;

inline constexpr std::size_t kTrajectoryReferenceClusters = 3;

inline const std::vector<std::string> kMetricOrder{"MAE", "MAPE", "ACC", "F1", "ADE_C1", "ADE_C2", "ADE_C3", "ADE"};

namespace detail {

/// Row indices reordered by trial id, so that fits do not depend on input row order.
inline std::vector<std::size_t> canonical_order(const Dataset& d, std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d.trial_ids[a] < d.trial_ids[b]; });
    return idx;
}

/// Clusters of the training trajectories, renumbered so that cluster 0 ends furthest along
/// +x (towards the zebra) and the last one is the most direct.
inline Clustering trajectory_reference_clusters(const Matrix& trajectories, std::size_t k) {
    k = std::min(k, trajectories.rows());
    Clustering c = agglomerative(trajectories, k, Linkage::Ward);
    std::vector<double> mean_x(k, 0.0);
    const std::size_t m = trajectories.cols() / 2;
    for (std::size_t l = 0; l < k; ++l) {
        for (std::size_t j = 0; j < m; ++j) mean_x[l] += c.centroids(l, 2 * j);
        mean_x[l] /= static_cast<double>(m);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean_x[a] > mean_x[b]; });
    std::vector<int> rank(k);
    for (std::size_t r = 0; r < k; ++r) rank[order[r]] = static_cast<int>(r);
    Clustering out = c;
    for (auto& l : out.labels) l = rank[static_cast<std::size_t>(l)];
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t j = 0; j < c.centroids.cols(); ++j) out.centroids(r, j) = c.centroids(order[r], j);
    return out;
}

inline Metrics fold_metrics(PredictionTask task, const Matrix& truth, const Matrix& pred,
                            const std::vector<int>& ref_cluster) {
    Metrics m;
    switch (task) {
        case PredictionTask::GapSelection: {
            const auto y = truth.col(0), p = pred.col(0);
            m.emplace_back("MAE", mae(y, p));
            m.emplace_back("MAPE", mape(y, p));
            break;
        }
        case PredictionTask::ZebraUsage: {
            std::vector<int> y(truth.rows()), p(truth.rows());
            for (std::size_t i = 0; i < truth.rows(); ++i) {
                y[i] = truth(i, 0) > 0.5 ? 1 : 0;
                p[i] = pred(i, 0) >= 0.5 ? 1 : 0;
            }
            const auto c = confusion(y, p);
            m.emplace_back("ACC", acc(c));
            if (c.tp + c.fp + c.fn > 0) m.emplace_back("F1", f1(c));
            break;
        }
        case PredictionTask::Trajectory: {
            std::vector<Trajectory> t, q;
            for (std::size_t i = 0; i < truth.rows(); ++i) {
                t.push_back(unflatten(truth.row(i)));
                q.push_back(unflatten(pred.row(i)));
            }
            for (std::size_t c = 0; c < kTrajectoryReferenceClusters; ++c) {
                std::vector<Trajectory> tc, qc;
                for (std::size_t i = 0; i < t.size(); ++i)
                    if (ref_cluster[i] == static_cast<int>(c)) {
                        tc.push_back(t[i]);
                        qc.push_back(q[i]);
                    }
                if (!tc.empty()) m.emplace_back("ADE_C" + std::to_string(c + 1), ade(tc, qc));
            }
            m.emplace_back("ADE", ade(t, q));
            break;
        }
    }
    return m;
}

template <class Fn>
auto with_fold_context(std::size_t fold, Fn&& fn) {
    try {
        return fn();
    } catch (const InputError& e) {
        throw InputError("fold " + std::to_string(fold) + ": " + e.what());
    } catch (const RuntimeFailure& e) {
        throw RuntimeFailure("fold " + std::to_string(fold) + ": " + e.what());
    }
}

}  // namespace detail

/// Standardize on the training rows, fit the model, predict the test rows. Importance is
/// measured on the test rows (permutation importance needs held-out data).
inline FoldLearner plain_learner(const ModelSpec& spec) {
    return [spec](const Dataset& train, const Dataset& test, std::uint64_t seed) {
        const Scaler sc = fit_scaler(train.X, train.names);
        ModelSpec s = spec;
        s.seed = seed;
        const Matrix Xt = sc.apply(train.X), Xv = sc.apply(test.X);
        const TrainedModel m = fit(s, Xt, train.Y, sc.output_names());
        return FoldOutput{m.predict(Xv), feature_importance(m, Xv, test.Y, derive_seed(seed, 0x1AA))};
    };
}

/// Fold k trains on train_pool minus its fold k and tests on fold k of test_pool. With the
/// same dataset and plan on both sides this is plain k-fold cross-validation.
inline EvalReport evaluate_folds(const std::string& label, const FoldLearner& learner, const Dataset& train_pool,
                                 const SplitPlan& train_plan, const Dataset& test_pool, const SplitPlan& test_plan,
                                 std::uint64_t seed) {
    require(train_pool.rows() > 0 && test_pool.rows() > 0, "evaluate: empty domain");
    require(train_plan.fold_count() == test_plan.fold_count(), "evaluate: fold counts differ");
    require(train_pool.task == test_pool.task, "evaluate: task mismatch between domains");
    EvalReport rep;
    rep.label = label;
    rep.task = train_pool.task;
    rep.mode = train_plan.mode;
    rep.predictions = Matrix(test_pool.rows(), test_pool.Y.cols());
    std::map<std::string, std::pair<double, int>> imp_sum;
    std::vector<std::string> imp_order;

    for (std::size_t k = 0; k < train_plan.fold_count(); ++k) {
        detail::with_fold_context(k, [&] {
            const auto tr_idx = detail::canonical_order(train_pool, train_plan.train_rows(k));
            const auto te_idx = detail::canonical_order(test_pool, test_plan.test_rows(k));
            require(!tr_idx.empty() && !te_idx.empty(), "empty training or test fold");
            const Dataset train = train_pool.subset(tr_idx);
            const Dataset test = test_pool.subset(te_idx);
            const FoldOutput out = learner(train, test, derive_seed(seed, k));
            require(out.predictions.rows() == test.rows() && out.predictions.cols() == test.Y.cols(),
                    "learner returned predictions of the wrong shape");
            if (!out.predictions.all_finite()) throw RuntimeFailure("non-finite predictions");
            for (std::size_t r = 0; r < te_idx.size(); ++r)
                for (std::size_t o = 0; o < test.Y.cols(); ++o) rep.predictions(te_idx[r], o) = out.predictions(r, o);

            std::vector<int> ref;
            if (rep.task == PredictionTask::Trajectory) {
                const auto c = detail::trajectory_reference_clusters(train.Y, kTrajectoryReferenceClusters);
                for (std::size_t r = 0; r < test.rows(); ++r) ref.push_back(assign(c, test.Y.row(r)));
            }
            rep.folds.push_back({k, train.rows(), test.rows(), detail::fold_metrics(rep.task, test.Y, out.predictions, ref)});
            for (const auto& [name, score] : out.importance) {
                if (!imp_sum.count(name)) imp_order.push_back(name);
                auto& s = imp_sum[name];
                s.first += score;
                s.second += 1;
            }
            return 0;
        });
    }

    std::map<std::string, std::pair<double, int>> msum;
    for (const auto& f : rep.folds)
        for (const auto& [name, v] : f.metrics) {
            msum[name].first += v;
            msum[name].second += 1;
        }
    for (const auto& name : kMetricOrder)
        if (msum.count(name)) rep.mean.emplace_back(name, msum[name].first / msum[name].second);

    std::vector<double> scores;
    for (const auto& name : imp_order) scores.push_back(imp_sum[name].first / imp_sum[name].second);
    rep.importance = detail::rank_importance(imp_order, scores);
    return rep;
}

inline EvalReport cross_validate(const ModelSpec& spec, const Dataset& d, const SplitPlan& plan) {
    return evaluate_folds(std::string(to_string(spec.kind)), plain_learner(spec), d, plan, d, plan, spec.seed);
}

}  // namespace pedx
