#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/point.hpp"
#include "pedx/gaps/gap_engine.hpp"
#include "pedx/sim/types.hpp"
#include "pedx/sim/vehicles.hpp"

namespace pedx {

/// Quantities observable before the pedestrian steps onto the road. Counts are stored as
/// doubles so the struct maps straight onto a design-matrix row.
struct PreEventFeatures {
    double T_w = 0.0;   // waiting time before crossing (s)
    double V_p = 0.0;   // average walking speed (m/s)
    double N_en = 0.0;  // unused effective gaps, near lane
    double N_cn = 0.0;  // unused car gaps, near lane
    double M_en = 0.0;  // largest missed effective gap, near lane (s)
    double M_cn = 0.0;
    double N_ef = 0.0;
    double N_cf = 0.0;
    double M_ef = 0.0;
    double M_cf = 0.0;
    double N_eb = 0.0;  // both lanes (synchronized)
    double N_cb = 0.0;
    double M_eb = 0.0;
    double M_cb = 0.0;

    static constexpr std::array<std::string_view, 14> names{"T_w",  "V_p",  "N_en", "N_cn", "M_en", "M_cn", "N_ef",
                                                            "N_cf", "M_ef", "M_cf", "N_eb", "N_cb", "M_eb", "M_cb"};

    std::array<double, 14> values() const {
        return {T_w, V_p, N_en, N_cn, M_en, M_cn, N_ef, N_cf, M_ef, M_cf, N_eb, N_cb, M_eb, M_cb};
    }

    static PreEventFeatures from_values(std::span<const double> v) {
        require(v.size() == 14, "PreEventFeatures: expected 14 values");
        return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], v[13]};
    }

    friend bool operator==(const PreEventFeatures&, const PreEventFeatures&) = default;
};

/// Quantities measured at the frame the pedestrian enters the road.
struct EntryFrameFeatures {
    double D_n = 0.0;   // distance to the approaching near-lane vehicle along the lane (m)
    double V_cn = 0.0;  // its instantaneous speed (m/s)
    double D_f = 0.0;
    double V_cf = 0.0;
    double D_z = 0.0;  // distance to the zebra crossing (m)

    static constexpr std::array<std::string_view, 5> names{"D_n", "V_cn", "D_f", "V_cf", "D_z"};

    std::array<double, 5> values() const { return {D_n, V_cn, D_f, V_cf, D_z}; }

    static EntryFrameFeatures from_values(std::span<const double> v) {
        require(v.size() == 5, "EntryFrameFeatures: expected 5 values");
        return {v[0], v[1], v[2], v[3], v[4]};
    }

    friend bool operator==(const EntryFrameFeatures&, const EntryFrameFeatures&) = default;
};

struct FeatureRow {
    int trial_id = 0;
    int participant_id = 0;
    std::string country_tag;
    GroupCondition condition = GroupCondition::Alone;
    bool zebra_scenario = false;

    PreEventFeatures pre;
    std::optional<EntryFrameFeatures> entry;

    std::optional<double> label_gap;  // accepted synchronized car gap (s); non-zebra trials
    std::optional<bool> label_zebra;  // zebra trials
    std::vector<Point2> trajectory;   // resampled crossing path; zebra trials, empty otherwise

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

inline constexpr std::size_t kDefaultResampleCount = 32;
inline constexpr double kMovingSpeed = 0.2;    // m/s; slower frames count as standing
inline constexpr double kDepartureRadius = 0.05;  // m

/// Resamples a trace segment at m instants spread uniformly over its time span.
inline std::vector<Point2> resample_path(std::span<const TracePoint> seg, std::size_t m) {
    require(m >= 2, "resample_path: need at least 2 points");
    require(seg.size() >= 2, "resample_path: trajectory shorter than 2 frames");
    const double t0 = seg.front().t, t1 = seg.back().t;
    std::vector<Point2> out;
    out.reserve(m);
    std::size_t k = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double t = j + 1 == m ? t1 : t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(m - 1);
        while (k + 2 < seg.size() && seg[k + 1].t < t) ++k;
        const auto& a = seg[k];
        const auto& b = seg[k + 1];
        const double f = b.t > a.t ? std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0) : 0.0;
        out.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
    }
    return out;
}

/// Crossing path from departure (the pedestrian leaves the start spot) to the end of the trace.
inline std::vector<Point2> crossing_trajectory(std::span<const TracePoint> trace, std::size_t m) {
    require(trace.size() >= 2, "crossing_trajectory: trajectory shorter than 2 frames");
    std::size_t first = 0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (std::hypot(trace[k].x - trace[0].x, trace[k].y - trace[0].y) > kDepartureRadius) {
            first = k - 1;
            break;
        }
    }
    return resample_path(trace.subspan(first), m);
}

/// Mean speed over the frames in [from, to] in which the pedestrian is moving.
inline double average_walking_speed(std::span<const TracePoint> trace, double from, double to) {
    double dist = 0.0, time = 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (trace[k - 1].t < from || trace[k].t > to) continue;
        const double dt = trace[k].t - trace[k - 1].t;
        const double d = std::hypot(trace[k].x - trace[k - 1].x, trace[k].y - trace[k - 1].y);
        if (dt > 0.0 && d / dt > kMovingSpeed) {
            dist += d;
            time += dt;
        }
    }
    return time > 0.0 ? dist / time : 0.0;
}

namespace detail {

inline std::pair<double, double> missed_stats(std::span<const GapObservation> gaps) {
    double n = 0.0, m = 0.0;
    for (const auto& g : gaps) {
        if (!g.missed) continue;
        n += 1.0;
        m = std::max(m, g.duration);
    }
    return {n, m};
}

/// Distance along the lane to, and speed of, the closest vehicle that has not yet passed x_p.
inline std::pair<double, double> approaching_vehicle(const TrialRecord& trial, Lane lane, double t, double x_p) {
    const auto& s = trial.stream(lane);
    double best_d = std::numeric_limits<double>::infinity(), best_v = trial.scenario.vehicle_speed;
    for (std::size_t i = 0; i < s.arrival_times.size(); ++i) {
        const auto st = vehicle_state(trial, lane, i, t);
        const double ahead = s.direction * (x_p - st.x);
        if (ahead > 0.0 && ahead < best_d) {
            best_d = ahead;
            best_v = st.speed;
        }
    }
    if (!std::isfinite(best_d)) best_d = trial.scenario.vehicle_speed * trial.scenario.gap_max;
    return {best_d, best_v};
}

}  // namespace detail

/// Feature row of one trial. Pure in its inputs; throws InputError for a no-crossing trial.
inline FeatureRow extract(const TrialRecord& trial, const CrossingEvents& ev, const TrialGaps& gaps,
                          std::size_t resample_count = kDefaultResampleCount) {
    if (!ev.road_entry_t || !ev.entry_frame)
        throw InputError("no-crossing trial " + std::to_string(trial.trial_id));
    const auto& sc = trial.scenario;
    FeatureRow row;
    row.trial_id = trial.trial_id;
    row.participant_id = trial.participant_id;
    row.country_tag = trial.country_tag;
    row.condition = sc.group_condition;
    row.zebra_scenario = sc.zebra_present;

    auto& p = row.pre;
    p.T_w = *ev.road_entry_t - ev.wait_start;
    p.V_p = average_walking_speed(trial.trace, ev.wait_start, ev.crossing_end_t.value_or(trial.trace.back().t));
    std::tie(p.N_en, p.M_en) = detail::missed_stats(gaps.eff_near);
    std::tie(p.N_cn, p.M_cn) = detail::missed_stats(gaps.car_near);
    std::tie(p.N_ef, p.M_ef) = detail::missed_stats(gaps.eff_far);
    std::tie(p.N_cf, p.M_cf) = detail::missed_stats(gaps.car_far);
    std::tie(p.N_eb, p.M_eb) = detail::missed_stats(gaps.eff_both);
    std::tie(p.N_cb, p.M_cb) = detail::missed_stats(gaps.car_both);

    const auto& at = trial.trace[*ev.entry_frame];
    EntryFrameFeatures e;
    std::tie(e.D_n, e.V_cn) = detail::approaching_vehicle(trial, Lane::Near, at.t, at.x);
    std::tie(e.D_f, e.V_cf) = detail::approaching_vehicle(trial, Lane::Far, at.t, at.x);
    e.D_z = std::abs(at.x - sc.zebra_x);
    row.entry = e;

    if (sc.zebra_present) {
        row.label_zebra = ev.used_zebra;
        row.trajectory = crossing_trajectory(trial.trace, resample_count);
    } else {
        require(std::isfinite(ev.accepted_gap_car_both) && ev.accepted_gap_car_both > 0.0,
                "trial " + std::to_string(trial.trial_id) + ": no accepted gap contains road entry");
        row.label_gap = ev.accepted_gap_car_both;
    }
    return row;
}

inline FeatureRow extract(const TrialRecord& trial, std::size_t resample_count = kDefaultResampleCount) {
    const auto a = analyze_trial(trial);
    return extract(trial, a.events, a.gaps, resample_count);
}

struct ExtractionResult {
    std::vector<FeatureRow> rows;
    std::vector<int> skipped_trials;  // no road entry
};

/// Extracts every trial; trials without a road entry are skipped and reported.
inline ExtractionResult extract_all(std::span<const TrialRecord> trials,
                                    std::size_t resample_count = kDefaultResampleCount) {
    ExtractionResult out;
    for (const auto& t : trials) {
        const auto a = analyze_trial(t);
        if (!a.events.road_entry_t) {
            out.skipped_trials.push_back(t.trial_id);
            continue;
        }
        out.rows.push_back(extract(t, a.events, a.gaps, resample_count));
    }
    return out;
}

}  // namespace pedx
