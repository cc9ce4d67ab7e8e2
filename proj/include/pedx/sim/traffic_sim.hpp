#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pedx/core/parallel.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/gaps/gap_engine.hpp"
#include "pedx/sim/types.hpp"

namespace pedx {

namespace sim_detail {

struct Waypoint {
    double t, x, y;
};

/// Piecewise-linear route in time; holds at the last waypoint afterwards.
class Route {
public:
    explicit Route(double x, double y) { pts_.push_back({0.0, x, y}); }

    double end_time() const { return pts_.back().t; }
    const Waypoint& back() const { return pts_.back(); }

    void hold_until(double t) {
        if (t > pts_.back().t) pts_.push_back({t, pts_.back().x, pts_.back().y});
    }

    void walk_to(double x, double y, double speed) {
        const auto& b = pts_.back();
        const double d = std::hypot(x - b.x, y - b.y);
        if (d == 0.0) return;
        pts_.push_back({b.t + d / speed, x, y});
    }

    /// Time at which the route first reaches y >= level (route must get there).
    double time_at_y(double level) const {
        for (std::size_t i = 1; i < pts_.size(); ++i) {
            const auto& a = pts_[i - 1];
            const auto& b = pts_[i];
            if (a.y < level && b.y >= level) return a.t + (level - a.y) / (b.y - a.y) * (b.t - a.t);
        }
        return pts_.back().t;
    }

    TracePoint at(double t) const {
        if (t <= pts_.front().t) return {t, pts_.front().x, pts_.front().y};
        for (std::size_t i = 1; i < pts_.size(); ++i) {
            const auto& a = pts_[i - 1];
            const auto& b = pts_[i];
            if (t <= b.t) {
                const double f = b.t > a.t ? (t - a.t) / (b.t - a.t) : 1.0;
                return {t, a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
            }
        }
        return {t, pts_.back().x, pts_.back().y};
    }

private:
    std::vector<Waypoint> pts_;
};

inline std::vector<double> forward_arrivals(double first, double t_end, const ScenarioConfig& sc, Rng& rng) {
    std::vector<double> a{first};
    while (a.back() <= t_end) a.push_back(a.back() + uniform(rng, sc.gap_min, sc.gap_max));
    return a;
}

/// One lane's free-flow schedule. When `pinned` is set, the lane has vehicles exactly at
/// pinned and pinned + leader_gap (the gap the virtual leader crosses in). The schedule
/// starts early enough that the coupled far lane also has a vehicle at or before t = 0.
inline std::vector<double> lane_arrivals(const ScenarioConfig& sc, double t_end, std::optional<double> pinned,
                                         Rng& rng) {
    const double lead_in = sc.lane_offset_max + sc.lane_jitter;
    if (!pinned) {
        const double g = uniform(rng, sc.gap_min, sc.gap_max);
        return forward_arrivals(-lead_in - uniform(rng, 0.0, g), t_end, sc, rng);
    }
    std::vector<double> before{*pinned};
    while (before.back() > -lead_in) before.push_back(before.back() - uniform(rng, sc.gap_min, sc.gap_max));
    std::reverse(before.begin(), before.end());
    auto after = forward_arrivals(*pinned + sc.leader_gap, t_end, sc, rng);
    before.insert(before.end(), after.begin(), after.end());
    return before;
}

/// Keeps the last arrival at or before `t_lo` through the first arrival after `t_hi`.
inline void truncate(std::vector<double>& a, double t_lo, double t_hi) {
    auto first = std::upper_bound(a.begin(), a.end(), t_lo);
    if (first != a.begin()) --first;
    auto last = std::upper_bound(a.begin(), a.end(), t_hi);
    if (last != a.end()) ++last;
    a = std::vector<double>(first, last);
}

/// Far-lane schedule derived from the near lane: shared phase offset plus per-vehicle
/// jitter, re-drawn until every far gap lies in [gap_min, gap_max] (falling back to the
/// near gap). Pinned vehicles keep zero offset so both lanes pass together there; the
/// lane is filled outward from them so the gaps next to the pinned pair are checked too.
inline std::vector<double> coupled_arrivals(const ScenarioConfig& sc, const std::vector<double>& near,
                                            std::optional<double> pinned, Rng& rng) {
    const double phase = uniform(rng, -sc.lane_offset_max, sc.lane_offset_max);
    const std::size_t n = near.size();
    std::vector<double> far(n);
    auto in_range = [&](double g) { return g >= sc.gap_min && g <= sc.gap_max; };
    // Offset for vehicle i given the already placed neighbour j (or none).
    auto place = [&](std::size_t i, std::optional<std::size_t> j) {
        double d = phase + uniform(rng, -sc.lane_jitter, sc.lane_jitter);
        if (!j) return near[i] + d;
        auto gap = [&](double x) { return i > *j ? x - far[*j] : far[*j] - x; };
        for (int attempt = 1; attempt < 16 && !in_range(gap(near[i] + d)); ++attempt)
            d = phase + uniform(rng, -sc.lane_jitter, sc.lane_jitter);
        return in_range(gap(near[i] + d)) ? near[i] + d : near[i] + (far[*j] - near[*j]);
    };

    std::size_t first_pinned = n;
    if (pinned) {
        for (std::size_t i = 0; i < n; ++i) {
            if (near[i] == *pinned) {
                first_pinned = i;
                break;
            }
        }
    }
    if (first_pinned == n) {
        for (std::size_t i = 0; i < n; ++i)
            far[i] = place(i, i == 0 ? std::nullopt : std::optional<std::size_t>(i - 1));
        return far;
    }
    std::size_t last_pinned = first_pinned;
    far[first_pinned] = near[first_pinned];
    if (first_pinned + 1 < n && near[first_pinned + 1] == *pinned + sc.leader_gap) {
        last_pinned = first_pinned + 1;
        far[last_pinned] = near[last_pinned];
    }
    for (std::size_t i = first_pinned; i-- > 0;) far[i] = place(i, i + 1);
    for (std::size_t i = last_pinned + 1; i < n; ++i) far[i] = place(i, i - 1);
    return far;
}

}  // namespace sim_detail

inline ParticipantTraits draw_traits(const AgentProfile& agent, Rng& rng) {
    ParticipantTraits t;
    t.walk_speed = std::clamp(normal(rng, agent.walk_speed_mean, agent.walk_speed_sd), 0.6, 2.6);
    t.safety_margin = normal(rng, agent.safety_margin_mean, agent.safety_margin_sd);
    return t;
}

/// Critical gap of the agent after `missed` rejected gaps: L / S + F minus the impatience
/// decay, never below the floor.
inline double acceptance_threshold(const ScenarioConfig& sc, const AgentProfile& agent,
                                   const ParticipantTraits& traits, int missed) {
    const double critical = sc.road_width / traits.walk_speed + traits.safety_margin;
    return std::max(agent.threshold_floor, critical - agent.impatience_rate * missed);
}

/// Simulates one trial for a participant with fixed traits. Pure in (config, agent, traits, seed).
inline TrialRecord generate_trial(const ScenarioConfig& sc, const AgentProfile& agent,
                                  const ParticipantTraits& traits, std::uint64_t seed) {
    sc.validate();
    agent.validate();
    require(std::isfinite(traits.walk_speed) && traits.walk_speed > 0.0 && std::isfinite(traits.safety_margin),
            "generate_trial: invalid participant traits");
    using namespace sim_detail;

    Rng rng(seed);
    TrialRecord tr;
    tr.country_tag = agent.profile_name;
    tr.scenario = sc;
    tr.walk_speed = traits.walk_speed;
    tr.safety_margin = traits.safety_margin;

    const double S = traits.walk_speed;
    const double stream_end = sc.horizon + 6.0 * sc.gap_max;

    std::optional<double> leader_open;
    if (sc.group_condition != GroupCondition::Alone) leader_open = uniform(rng, 4.0, 20.0);
    tr.streams[0] = {Lane::Near, +1, lane_arrivals(sc, stream_end, leader_open, rng)};
    tr.streams[1] = {Lane::Far, -1, coupled_arrivals(sc, tr.streams[0].arrival_times, leader_open, rng)};

    // Decisions are drawn in a fixed order so every trial consumes the same draws.
    const bool zebra_choice = bernoulli(rng, agent.zebra_preference);
    const bool follow_choice = bernoulli(rng, agent.leader_follow_weight);
    const bool mind_change_choice = bernoulli(rng, agent.mind_change_prob);
    const double ready_t = uniform(rng, 0.0, 2.0 * agent.orientation_time_mean);

    Route route(sc.start_x, sc.start_y);
    if (sc.zebra_present && zebra_choice) {
        tr.chose_zebra = true;
        route.walk_to(sc.zebra_x, sc.start_y, S);
        const double at_zebra = route.end_time();
        route.hold_until(at_zebra + agent.reaction_time);
        route.walk_to(sc.zebra_x, sc.road_width + 0.5, S);
        tr.zebra_yield = ZebraYield{at_zebra - 1.5, route.time_at_y(sc.road_width) + 0.5};
        route.walk_to(sc.goal_x, sc.goal_y, S);
    } else {
        const auto near = car_gaps(tr.streams[0]);
        const auto far = car_gaps(tr.streams[1]);
        const auto windows = synchronized_gaps(near, far, GapKind::Car);

        std::optional<double> depart;
        if (leader_open && follow_choice) {
            for (const auto& w : windows) {
                if (w.open_t == *leader_open) {
                    depart = w.open_t;
                    tr.followed_leader = true;
                    break;
                }
            }
        }
        if (!depart) {
            int missed = 0;
            const GapObservation* longest = nullptr;
            for (const auto& w : windows) {
                if (w.open_t < ready_t) continue;
                if (!longest || w.duration > longest->duration) longest = &w;
                const double thr = w.open_t > sc.horizon ? agent.threshold_floor
                                                         : acceptance_threshold(sc, agent, traits, missed);
                if (w.duration >= thr) {
                    depart = w.open_t;
                    break;
                }
                ++missed;
            }
            if (!depart) {
                require(longest != nullptr, "generate_trial: no synchronized gap available");
                depart = longest->open_t;
            }
        }
        route.hold_until(*depart + agent.reaction_time);
        if (sc.zebra_present && mind_change_choice) {
            tr.changed_mind = true;
            const double veer_x = sc.start_x + 0.7 * (sc.zebra_x - sc.start_x);
            route.walk_to(sc.start_x, 0.05, S);
            route.walk_to(veer_x, sc.road_width + 0.3, S);
            route.walk_to(sc.goal_x, sc.goal_y, S);
        } else {
            route.walk_to(sc.goal_x, sc.goal_y, S);
        }
    }

    const auto frames = static_cast<std::size_t>(std::ceil(route.end_time() / sc.frame_dt)) + 1;
    tr.trace.reserve(frames);
    for (std::size_t k = 0; k < frames; ++k) tr.trace.push_back(route.at(static_cast<double>(k) * sc.frame_dt));
    tr.entry_frame_index = find_entry_frame(tr.trace);

    // the leader's gap stays on record even when the pedestrian is already across
    double t_keep = tr.trace.back().t + sc.gap_max;
    if (leader_open) t_keep = std::max(t_keep, *leader_open + sc.leader_gap);
    for (auto& s : tr.streams) truncate(s.arrival_times, 0.0, t_keep);
    return tr;
}

/// Simulates one trial, drawing the participant traits from the same seed.
inline TrialRecord generate_trial(const ScenarioConfig& sc, const AgentProfile& agent, std::uint64_t seed) {
    agent.validate();
    Rng rng(derive_seed(seed, 0xA11CEULL));
    const auto traits = draw_traits(agent, rng);
    return generate_trial(sc, agent, traits, seed);
}

/// Participants x configs x repetitions. Trial ids are contiguous in that order, participant
/// ids run 0..n-1, and each participant's traits are drawn once from their own stream.
inline std::vector<TrialRecord> generate_dataset(const std::vector<ScenarioConfig>& configs, const AgentProfile& agent,
                                                 int n_participants, int trials_per_condition, std::uint64_t seed,
                                                 int first_trial_id = 0, int first_participant_id = 0) {
    require(n_participants >= 1, "generate_dataset: n_participants must be >= 1");
    require(trials_per_condition >= 1, "generate_dataset: trials_per_condition must be >= 1");
    require(!configs.empty(), "generate_dataset: no scenario configs");
    agent.validate();
    for (const auto& c : configs) c.validate();

    std::vector<ParticipantTraits> traits(static_cast<std::size_t>(n_participants));
    for (int p = 0; p < n_participants; ++p) {
        Rng rng(derive_seed(seed, 0x7EA17ULL, static_cast<std::uint64_t>(p)));
        traits[static_cast<std::size_t>(p)] = draw_traits(agent, rng);
    }

    const std::size_t per_participant = configs.size() * static_cast<std::size_t>(trials_per_condition);
    const std::size_t total = per_participant * static_cast<std::size_t>(n_participants);
    std::vector<TrialRecord> out(total);
    parallel_for(total, [&](std::size_t i) {
        const std::size_t p = i / per_participant;
        const std::size_t c = (i % per_participant) / static_cast<std::size_t>(trials_per_condition);
        auto tr = generate_trial(configs[c], agent, traits[p], derive_seed(seed, 0x7121A1ULL, i));
        tr.trial_id = first_trial_id + static_cast<int>(i);
        tr.participant_id = first_participant_id + static_cast<int>(p);
        out[i] = std::move(tr);
    });
    return out;
}

}  // namespace pedx
