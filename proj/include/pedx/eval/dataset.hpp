#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"
#include "pedx/eval/metrics.hpp"
#include "pedx/features/features.hpp"
#include "pedx/models/spec.hpp"

namespace pedx {

enum class PredictionTask { GapSelection, ZebraUsage, Trajectory };

inline std::string_view to_string(PredictionTask t) {
    switch (t) {
        case PredictionTask::GapSelection: return "GapSelection";
        case PredictionTask::ZebraUsage: return "ZebraUsage";
        case PredictionTask::Trajectory: return "Trajectory";
    }
    return "?";
}

inline PredictionTask parse_prediction_task(std::string_view s) {
    if (s == "GapSelection") return PredictionTask::GapSelection;
    if (s == "ZebraUsage") return PredictionTask::ZebraUsage;
    if (s == "Trajectory") return PredictionTask::Trajectory;
    throw InputError("unknown task '" + std::string(s) + "' (expected GapSelection, ZebraUsage or Trajectory)");
}

inline Task model_task(PredictionTask t) {
    return t == PredictionTask::ZebraUsage ? Task::Classification : Task::Regression;
}

struct DatasetOptions {
    bool entry_features = false;  // append the five entry-frame columns (trajectory task)
    /// Gap selection rows are restricted to these conditions; empty keeps all.
    std::vector<GroupCondition> conditions{GroupCondition::Alone};
};

/// Design matrix plus targets and row keys for one prediction task. Rows keep the order
/// of the feature rows they came from.
struct Dataset {
    PredictionTask task = PredictionTask::GapSelection;
    Matrix X;
    Matrix Y;  // gap (s), zebra usage (0/1), or trajectory as x0, y0, x1, y1, ...
    std::vector<std::string> names;
    std::vector<int> trial_ids;
    std::vector<int> participant_ids;
    std::vector<std::string> domains;
    std::vector<GroupCondition> conditions;
    std::vector<int> zebra_used;  // trajectory task: whether the trial ended on the zebra

    std::size_t rows() const { return X.rows(); }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset d;
        d.task = task;
        d.X = X.select_rows(idx);
        d.Y = Y.select_rows(idx);
        d.names = names;
        for (std::size_t i : idx) {
            d.trial_ids.push_back(trial_ids[i]);
            d.participant_ids.push_back(participant_ids[i]);
            d.domains.push_back(domains[i]);
            d.conditions.push_back(conditions[i]);
            if (!zebra_used.empty()) d.zebra_used.push_back(zebra_used[i]);
        }
        return d;
    }

    /// Rows of the given domain.
    Dataset domain(std::string_view tag) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows(); ++i)
            if (domains[i] == tag) idx.push_back(i);
        return subset(idx);
    }

    std::vector<std::string> domain_tags() const {
        std::vector<std::string> tags;
        for (const auto& d : domains)
            if (std::find(tags.begin(), tags.end(), d) == tags.end()) tags.push_back(d);
        return tags;
    }

    /// Target column 0 as labels (classification).
    std::vector<int> labels() const {
        std::vector<int> out(rows());
        for (std::size_t i = 0; i < rows(); ++i) out[i] = Y(i, 0) > 0.5 ? 1 : 0;
        return out;
    }

    Trajectory trajectory(std::size_t i) const { return unflatten(Y.row(i)); }
};

/// Rows of a combined dataset; trial ids must stay unique.
inline Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    require(a.task == b.task && a.names == b.names, "concat: datasets have different tasks or columns");
    Dataset d = a;
    d.X = a.X.vcat(b.X);
    d.Y = a.Y.vcat(b.Y);
    auto app = [](auto& x, const auto& y) { x.insert(x.end(), y.begin(), y.end()); };
    app(d.trial_ids, b.trial_ids);
    app(d.participant_ids, b.participant_ids);
    app(d.domains, b.domains);
    app(d.conditions, b.conditions);
    app(d.zebra_used, b.zebra_used);
    std::set<int> seen(d.trial_ids.begin(), d.trial_ids.end());
    require(seen.size() == d.trial_ids.size(), "concat: trial ids collide across datasets");
    return d;
}

inline Dataset make_dataset(std::span<const FeatureRow> rows, PredictionTask task, const DatasetOptions& opt = {}) {
    Dataset d;
    d.task = task;
    for (auto n : PreEventFeatures::names) d.names.emplace_back(n);
    const bool entry = task == PredictionTask::Trajectory && opt.entry_features;
    if (entry)
        for (auto n : EntryFrameFeatures::names) d.names.emplace_back(n);

    std::vector<double> xs, ys;
    std::size_t n = 0, ydim = 0;
    for (const auto& r : rows) {
        bool use = false;
        switch (task) {
            case PredictionTask::GapSelection:
                use = r.label_gap.has_value() &&
                      (opt.conditions.empty() || std::find(opt.conditions.begin(), opt.conditions.end(), r.condition) !=
                                                     opt.conditions.end());
                break;
            case PredictionTask::ZebraUsage: use = r.label_zebra.has_value(); break;
            case PredictionTask::Trajectory: use = r.trajectory.size() >= 2; break;
        }
        if (!use) continue;
        const auto pre = r.pre.values();
        xs.insert(xs.end(), pre.begin(), pre.end());
        if (entry) {
            require(r.entry.has_value(), "make_dataset: trial " + std::to_string(r.trial_id) + " lacks entry features");
            const auto e = r.entry->values();
            xs.insert(xs.end(), e.begin(), e.end());
        }
        switch (task) {
            case PredictionTask::GapSelection: ys.push_back(*r.label_gap); ydim = 1; break;
            case PredictionTask::ZebraUsage: ys.push_back(*r.label_zebra ? 1.0 : 0.0); ydim = 1; break;
            case PredictionTask::Trajectory: {
                const auto flat = flatten(r.trajectory);
                require(ydim == 0 || flat.size() == ydim,
                        "make_dataset: trial " + std::to_string(r.trial_id) + " has a different resample count");
                ydim = flat.size();
                ys.insert(ys.end(), flat.begin(), flat.end());
                d.zebra_used.push_back(r.label_zebra.value_or(false) ? 1 : 0);
                break;
            }
        }
        d.trial_ids.push_back(r.trial_id);
        d.participant_ids.push_back(r.participant_id);
        d.domains.push_back(r.country_tag);
        d.conditions.push_back(r.condition);
        ++n;
    }
    d.X = Matrix(n, d.names.size(), std::move(xs));
    d.Y = Matrix(n, n == 0 ? 1 : ydim, n == 0 ? std::vector<double>(n) : std::move(ys));
    return d;
}

}  // namespace pedx
