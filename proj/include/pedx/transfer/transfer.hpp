#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/eval/cross_validate.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/eval/splits.hpp"
#include "pedx/features/scaler.hpp"
#include "pedx/models/agglomerative.hpp"
#include "pedx/models/model.hpp"
#include "pedx/transfer/trajectory.hpp"

namespace pedx {

struct TransferCell {
    std::string train_domain;
    std::string test_domain;
    ModelKind kind = ModelKind::LinearRegression;
    SplitMode mode = SplitMode::ByParticipant;
    EvalReport report;
};

struct TransferMatrix {
    std::vector<TransferCell> cells;

    const EvalReport& at(const std::string& train, const std::string& test, ModelKind kind) const {
        for (const auto& c : cells)
            if (c.train_domain == train && c.test_domain == test && c.kind == kind) return c.report;
        throw InputError("TransferMatrix: no cell " + train + " -> " + test + " for " + std::string(to_string(kind)));
    }
};

/// Every (train domain, test domain) pair for every model. Each domain is split with its
/// own plan under `seed`; fold k trains on the training domain minus its fold k and tests
/// on fold k of the test domain, so the diagonal is ordinary cross-validation.
inline TransferMatrix transfer_eval(const std::vector<Dataset>& domains, const std::vector<ModelSpec>& specs,
                                    SplitMode mode, std::uint64_t seed) {
    require(domains.size() >= 1, "transfer_eval: no domains");
    std::vector<std::string> tags;
    std::vector<SplitPlan> plans;
    for (const auto& d : domains) {
        require(d.rows() > 0, "transfer_eval: empty domain");
        const auto t = d.domain_tags();
        require(t.size() == 1, "transfer_eval: each dataset must hold exactly one domain");
        require(std::find(tags.begin(), tags.end(), t[0]) == tags.end(), "transfer_eval: domain '" + t[0] + "' given twice");
        tags.push_back(t[0]);
        plans.push_back(make_splits(d, mode, seed));
    }
    TransferMatrix tm;
    for (const auto& spec0 : specs) {
        ModelSpec spec = spec0;
        spec.seed = seed;
        spec.task = model_task(domains[0].task);
        for (std::size_t a = 0; a < domains.size(); ++a)
            for (std::size_t b = 0; b < domains.size(); ++b)
                tm.cells.push_back({tags[a], tags[b], spec.kind, mode,
                                    evaluate_folds(std::string(to_string(spec.kind)), plain_learner(spec), domains[a],
                                                   plans[a], domains[b], plans[b], seed)});
    }
    return tm;
}

inline TransferMatrix transfer_eval(const Dataset& train, const Dataset& test, const std::vector<ModelSpec>& specs,
                                    SplitMode mode, std::uint64_t seed) {
    return transfer_eval(std::vector<Dataset>{train, test}, specs, mode, seed);
}

struct StrategyReport {
    StrategySpec spec;
    std::vector<std::pair<std::string, EvalReport>> per_domain;  // keyed by test domain
    Metrics average;                                           // mean over domains
};

namespace detail {

/// Tabular cluster feature: cluster the standardized training inputs, append the cluster
/// one-hot (test rows take the nearest centroid), then fit as usual.
inline FoldLearner cluster_feature_learner(const ModelSpec& spec, std::size_t k) {
    return [spec, k](const Dataset& train, const Dataset& test, std::uint64_t seed) {
        const Scaler sc0 = fit_scaler(train.X, train.names);
        const std::size_t kk = std::min(k, train.rows());
        std::vector<int> tr_lab(train.rows(), 0), te_lab(test.rows(), 0);
        if (kk > 1) {
            const Clustering cl = agglomerative(sc0.apply(train.X), kk, Linkage::Ward);
            tr_lab = cl.labels;
            for (std::size_t i = 0; i < test.rows(); ++i) te_lab[i] = assign(cl, sc0.apply_row(test.X.row(i)));
        }
        Dataset tr = train, te = test;
        tr.X = train.X.hcat(one_hot(tr_lab, kk));
        te.X = test.X.hcat(one_hot(te_lab, kk));
        const auto extra = one_hot_names("cluster", kk);
        tr.names.insert(tr.names.end(), extra.begin(), extra.end());
        te.names = tr.names;
        return plain_learner(spec)(tr, te, seed);
    };
}

inline FoldLearner country_feature_learner(const ModelSpec& spec, const std::string& reference) {
    return [spec, reference](const Dataset& train, const Dataset& test, std::uint64_t seed) {
        Dataset tr = train, te = test;
        tr.X = train.X.hcat(country_column(train, reference));
        te.X = test.X.hcat(country_column(test, reference));
        tr.names.push_back("country");
        te.names = tr.names;
        return plain_learner(spec)(tr, te, seed);
    };
}

inline FoldLearner trajectory_learner(const StrategySpec& strategy) {
    return [strategy](const Dataset& train, const Dataset& test, std::uint64_t seed) {
        const auto b = fit_trajectory_pipeline(train, strategy, seed);
        return FoldOutput{predict_trajectory(b, test), b.regressor.importance};
    };
}

inline SplitPlan joint_plan(const SplitPlan& a, std::size_t a_rows, const SplitPlan& b) {
    SplitPlan p = a;
    for (std::size_t k = 0; k < p.folds.size(); ++k)
        for (std::size_t r : b.folds[k]) p.folds[k].push_back(a_rows + r);
    return p;
}

}  // namespace detail

/// Evaluates one transferability strategy on two domains. Fold k of the pooled data is
/// the union of the domains' folds k, and each domain is scored on its own held-out fold.
inline StrategyReport run_strategy(StrategySpec strategy, const Dataset& a, const Dataset& b, SplitMode mode,
                                   std::uint64_t seed) {
    require(a.rows() > 0 && b.rows() > 0, "run_strategy: empty domain");
    require(a.task == b.task, "run_strategy: domains hold different tasks");
    const auto ta = a.domain_tags(), tb = b.domain_tags();
    require(ta.size() == 1 && tb.size() == 1 && ta[0] != tb[0], "run_strategy: need two distinct single-domain datasets");
    strategy.model.task = model_task(a.task);
    if (strategy.reference_domain.empty()) strategy.reference_domain = ta[0];
    strategy.validate(a.task);

    StrategyReport rep;
    rep.spec = strategy;
    const SplitPlan pa = make_splits(a, mode, seed), pb = make_splits(b, mode, seed);
    ModelSpec spec = strategy.model;
    spec.seed = seed;
    const std::string label = strategy.label();

    FoldLearner learner;
    if (a.task == PredictionTask::Trajectory) {
        StrategySpec s = strategy;
        s.model = spec;
        learner = detail::trajectory_learner(s);
    } else {
        switch (strategy.strategy) {
            case Strategy::Separate:
            case Strategy::Joint: learner = plain_learner(spec); break;
            case Strategy::CountryFeature: learner = detail::country_feature_learner(spec, strategy.reference_domain); break;
            case Strategy::ClusterFeature: learner = detail::cluster_feature_learner(spec, strategy.n_clusters); break;
            case Strategy::ZebraUsageFeature: break;  // rejected by validate
        }
    }

    if (strategy.strategy == Strategy::Separate) {
        rep.per_domain.emplace_back(ta[0], evaluate_folds(label, learner, a, pa, a, pa, seed));
        rep.per_domain.emplace_back(tb[0], evaluate_folds(label, learner, b, pb, b, pb, seed));
    } else {
        const Dataset pooled = concat(a, b);
        const SplitPlan pp = detail::joint_plan(pa, a.rows(), pb);
        rep.per_domain.emplace_back(ta[0], evaluate_folds(label, learner, pooled, pp, a, pa, seed));
        rep.per_domain.emplace_back(tb[0], evaluate_folds(label, learner, pooled, pp, b, pb, seed));
    }

    for (const auto& name : kMetricOrder) {
        double s = 0.0;
        int n = 0;
        for (const auto& [tag, r] : rep.per_domain)
            if (r.has_metric(name)) {
                s += r.metric(name);
                ++n;
            }
        if (n == static_cast<int>(rep.per_domain.size())) rep.average.emplace_back(name, s / n);
    }
    return rep;
}

}  // namespace pedx
