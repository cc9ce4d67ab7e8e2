#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/eval/dataset.hpp"

namespace pedx {

enum class SplitMode { ByTrial, ByParticipant };

inline std::string_view to_string(SplitMode m) { return m == SplitMode::ByTrial ? "trial" : "participant"; }

inline SplitMode parse_split_mode(std::string_view s) {
    if (s == "trial" || s == "ByTrial") return SplitMode::ByTrial;
    if (s == "participant" || s == "ByParticipant") return SplitMode::ByParticipant;
    throw InputError("unknown split mode '" + std::string(s) + "' (expected trial or participant)");
}

inline constexpr std::size_t kFolds = 5;

struct SplitPlan {
    SplitMode mode = SplitMode::ByParticipant;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> folds;  // row indices, ascending within a fold

    std::size_t fold_count() const { return folds.size(); }
    const std::vector<std::size_t>& test_rows(std::size_t k) const { return folds.at(k); }

    std::vector<std::size_t> train_rows(std::size_t k) const {
        std::vector<std::size_t> out;
        for (std::size_t f = 0; f < folds.size(); ++f)
            if (f != k) out.insert(out.end(), folds[f].begin(), folds[f].end());
        std::sort(out.begin(), out.end());
        return out;
    }
};

/// Units (trial or participant ids) are sorted, shuffled with the seed and dealt
/// round-robin into the folds; every row follows its unit. Sorting first makes the unit
/// to fold assignment independent of row order.
inline SplitPlan make_splits(std::span<const int> unit_of_row, SplitMode mode, std::uint64_t seed,
                             std::size_t n_folds = kFolds) {
    std::vector<int> units(unit_of_row.begin(), unit_of_row.end());
    std::sort(units.begin(), units.end());
    units.erase(std::unique(units.begin(), units.end()), units.end());
    require(units.size() >= n_folds, "make_splits: need at least " + std::to_string(n_folds) + " distinct " +
                                         (mode == SplitMode::ByTrial ? "trials" : "participants") + ", got " +
                                         std::to_string(units.size()));
    Rng rng(seed);
    shuffle_in_place(units, rng);
    std::map<int, std::size_t> fold_of;
    for (std::size_t i = 0; i < units.size(); ++i) fold_of[units[i]] = i % n_folds;
    SplitPlan plan;
    plan.mode = mode;
    plan.seed = seed;
    plan.folds.resize(n_folds);
    for (std::size_t r = 0; r < unit_of_row.size(); ++r) plan.folds[fold_of[unit_of_row[r]]].push_back(r);
    return plan;
}

inline SplitPlan make_splits(const Dataset& d, SplitMode mode, std::uint64_t seed, std::size_t n_folds = kFolds) {
    return make_splits(mode == SplitMode::ByTrial ? d.trial_ids : d.participant_ids, mode, seed, n_folds);
}

}  // namespace pedx
