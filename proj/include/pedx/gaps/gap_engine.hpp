#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/sim/types.hpp"

namespace pedx {

enum class LaneScope { Near, Far, Both };
enum class GapKind { Car, Effective };

inline std::string_view to_string(LaneScope s) {
    switch (s) {
        case LaneScope::Near: return "near";
        case LaneScope::Far: return "far";
        case LaneScope::Both: return "both";
    }
    return "?";
}

inline std::string_view to_string(GapKind k) { return k == GapKind::Car ? "car" : "effective"; }

inline LaneScope scope_of(Lane l) { return l == Lane::Near ? LaneScope::Near : LaneScope::Far; }

struct GapObservation {
    LaneScope lane_scope = LaneScope::Near;
    GapKind kind = GapKind::Car;
    double open_t = 0.0;
    double close_t = 0.0;
    double duration = 0.0;
    bool used = false;
    bool missed = false;
    /// A stopwatch instant fell outside the trace and was extrapolated from its end point.
    bool extrapolated = false;

    bool contains(double t) const { return open_t <= t && t < close_t; }
};

/// All six gap lists of a trial: {car, effective} x {near, far, both}.
struct TrialGaps {
    std::vector<GapObservation> car_near, car_far, car_both;
    std::vector<GapObservation> eff_near, eff_far, eff_both;

    std::vector<GapObservation>& get(GapKind k, LaneScope s) {
        if (k == GapKind::Car) return s == LaneScope::Near ? car_near : s == LaneScope::Far ? car_far : car_both;
        return s == LaneScope::Near ? eff_near : s == LaneScope::Far ? eff_far : eff_both;
    }
    const std::vector<GapObservation>& get(GapKind k, LaneScope s) const {
        return const_cast<TrialGaps*>(this)->get(k, s);
    }
};

struct CrossingEvents {
    double wait_start = 0.0;
    std::optional<double> road_entry_t;
    std::optional<double> crossing_end_t;
    std::optional<std::size_t> entry_frame;
    double accepted_gap_car_both = std::numeric_limits<double>::quiet_NaN();
    double accepted_gap_effective_both = std::numeric_limits<double>::quiet_NaN();
    bool used_zebra = false;
};

/// Car gaps of one lane: the arrival-time differences of consecutive vehicles.
inline std::vector<GapObservation> car_gaps(const VehicleStream& stream) {
    std::vector<GapObservation> out;
    const auto& a = stream.arrival_times;
    if (a.size() < 2) return out;
    out.reserve(a.size() - 1);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        GapObservation g;
        g.lane_scope = scope_of(stream.lane);
        g.kind = GapKind::Car;
        g.open_t = a[i];
        g.close_t = a[i + 1];
        g.duration = a[i + 1] - a[i];
        out.push_back(g);
    }
    return out;
}

namespace detail {

struct MeetTime {
    double t;
    bool extrapolated;
};

/// Instant at which a constant-speed vehicle crossing x = 0 at `arrival` reaches the
/// pedestrian's x. The trace is interpolated linearly between frames and held constant
/// beyond its ends. With pedestrian speed below vehicle speed the gap function
/// speed * (t - arrival) - direction * x_p(t) is strictly increasing, so the root is unique.
inline MeetTime meet_time(std::span<const TracePoint> trace, int direction, double speed, double arrival) {
    auto g = [&](std::size_t k) { return speed * (trace[k].t - arrival) - direction * trace[k].x; };
    const std::size_t n = trace.size();
    if (g(0) > 0.0) return {arrival + direction * trace.front().x / speed, true};
    if (g(n - 1) < 0.0) return {arrival + direction * trace.back().x / speed, true};
    std::size_t lo = 0, hi = n - 1;  // g(lo) <= 0 <= g(hi)
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (g(mid) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double glo = g(lo), ghi = g(hi);
    if (ghi == glo) return {trace[lo].t, false};
    const double frac = -glo / (ghi - glo);
    return {trace[lo].t + frac * (trace[hi].t - trace[lo].t), false};
}

}  // namespace detail

/// Effective gaps via the virtual stopwatch: the watch starts when the lead vehicle
/// reaches the pedestrian's current x and stops when the follower does.
inline std::vector<GapObservation> effective_gaps(const VehicleStream& stream, std::span<const TracePoint> trace,
                                                  double vehicle_speed) {
    require(!trace.empty(), "effective_gaps: empty trace");
    require(vehicle_speed > 0.0, "effective_gaps: vehicle speed must be positive");
    std::vector<GapObservation> out;
    const auto& a = stream.arrival_times;
    if (a.size() < 2) return out;
    std::vector<detail::MeetTime> meets;
    meets.reserve(a.size());
    for (double arr : a) meets.push_back(detail::meet_time(trace, stream.direction, vehicle_speed, arr));
    out.reserve(a.size() - 1);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        GapObservation g;
        g.lane_scope = scope_of(stream.lane);
        g.kind = GapKind::Effective;
        g.open_t = meets[i].t;
        g.close_t = meets[i + 1].t;
        g.duration = g.close_t - g.open_t;
        g.extrapolated = meets[i].extrapolated || meets[i + 1].extrapolated;
        out.push_back(g);
    }
    return out;
}

/// Gaps jointly available on both lanes. At every vehicle pass event on either lane the
/// candidate gap runs until the earlier of the two lanes' next pass; candidates whose
/// window lies strictly inside another candidate's window are dropped, so each maximal
/// window is reported once. Candidates are only formed while both lanes have a known
/// next pass. With one lane empty the other lane's gaps pass through.
inline std::vector<GapObservation> synchronized_gaps(std::span<const GapObservation> near,
                                                     std::span<const GapObservation> far, GapKind kind) {
    for (const auto& g : near) require(g.kind == kind, "synchronized_gaps: mixed gap kinds");
    for (const auto& g : far) require(g.kind == kind, "synchronized_gaps: mixed gap kinds");

    auto pass_through = [kind](std::span<const GapObservation> gaps) {
        std::vector<GapObservation> out(gaps.begin(), gaps.end());
        for (auto& g : out) {
            g.lane_scope = LaneScope::Both;
            g.kind = kind;
            g.used = g.missed = false;
        }
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.open_t < b.open_t; });
        return out;
    };
    if (near.empty()) return pass_through(far);
    if (far.empty()) return pass_through(near);

    auto boundaries = [](std::span<const GapObservation> gaps) {
        std::vector<double> b;
        b.reserve(2 * gaps.size());
        for (const auto& g : gaps) {
            b.push_back(g.open_t);
            b.push_back(g.close_t);
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    };
    const std::vector<double> bn = boundaries(near), bf = boundaries(far);
    auto extrapolated_at = [](std::span<const GapObservation> gaps, double t) {
        for (const auto& g : gaps)
            if (g.extrapolated && (g.open_t == t || g.close_t == t)) return true;
        return false;
    };

    std::vector<double> events;
    events.reserve(bn.size() + bf.size());
    std::merge(bn.begin(), bn.end(), bf.begin(), bf.end(), std::back_inserter(events));
    events.erase(std::unique(events.begin(), events.end()), events.end());

    std::vector<GapObservation> out;
    double last_close = -std::numeric_limits<double>::infinity();
    for (double e : events) {
        const auto nn = std::upper_bound(bn.begin(), bn.end(), e);
        const auto nf = std::upper_bound(bf.begin(), bf.end(), e);
        if (nn == bn.end() || nf == bf.end()) break;
        const double close = std::min(*nn, *nf);
        // close(e) is non-decreasing in e, so a later candidate sharing an earlier
        // candidate's close is strictly contained in it.
        if (close == last_close) continue;
        last_close = close;
        GapObservation g;
        g.lane_scope = LaneScope::Both;
        g.kind = kind;
        g.open_t = e;
        g.close_t = close;
        g.duration = close - e;
        g.extrapolated = extrapolated_at(near, e) || extrapolated_at(far, e) || extrapolated_at(near, close) ||
                         extrapolated_at(far, close);
        out.push_back(g);
    }
    return out;
}

/// Index of the gap used when entering at `t`: among the windows containing t, the one
/// opened most recently.
inline std::optional<std::size_t> containing_gap(std::span<const GapObservation> gaps, double t) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < gaps.size(); ++i)
        if (gaps[i].contains(t) && (!best || gaps[i].open_t >= gaps[*best].open_t)) best = i;
    return best;
}

/// Car and effective gaps of a trial, before used/missed annotation.
inline TrialGaps compute_gaps(const TrialRecord& trial) {
    TrialGaps g;
    const auto& near = trial.stream(Lane::Near);
    const auto& far = trial.stream(Lane::Far);
    g.car_near = car_gaps(near);
    g.car_far = car_gaps(far);
    g.car_both = synchronized_gaps(g.car_near, g.car_far, GapKind::Car);
    if (!trial.trace.empty()) {
        g.eff_near = effective_gaps(near, trial.trace, trial.scenario.vehicle_speed);
        g.eff_far = effective_gaps(far, trial.trace, trial.scenario.vehicle_speed);
        g.eff_both = synchronized_gaps(g.eff_near, g.eff_far, GapKind::Effective);
    }
    return g;
}

/// First frame at which y reaches the near road edge (y = 0) coming from the sidewalk.
inline std::optional<std::size_t> find_entry_frame(std::span<const TracePoint> trace) {
    for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k - 1].y < 0.0 && trace[k].y >= 0.0) return k;
    return std::nullopt;
}

struct TrialAnalysis {
    CrossingEvents events;
    TrialGaps gaps;
};

/// Crossing events plus all gap lists with used/missed flags. A gap is missed when it
/// closed during [wait_start, road_entry); it is used when it is the containing gap at
/// road entry.
inline TrialAnalysis analyze_trial(const TrialRecord& trial) {
    require(!trial.trace.empty(), "crossing_events: trial " + std::to_string(trial.trial_id) + " has no trace");
    TrialAnalysis out;
    out.gaps = compute_gaps(trial);
    auto& ev = out.events;
    const auto& trace = trial.trace;
    ev.wait_start = trace.front().t;

    const auto entry = find_entry_frame(trace);
    if (!entry) return out;
    ev.entry_frame = *entry;
    const double t_entry = trace[*entry].t;
    ev.road_entry_t = t_entry;
    for (std::size_t k = *entry; k < trace.size(); ++k) {
        if (trace[k].y >= trial.scenario.road_width) {
            ev.crossing_end_t = trace[k].t;
            break;
        }
    }
    const auto& sc = trial.scenario;
    ev.used_zebra = sc.zebra_present && std::abs(trace[*entry].x - sc.zebra_x) <= sc.zebra_half_width;

    for (GapKind kind : {GapKind::Car, GapKind::Effective}) {
        for (LaneScope scope : {LaneScope::Near, LaneScope::Far, LaneScope::Both}) {
            auto& list = out.gaps.get(kind, scope);
            const auto used = containing_gap(list, t_entry);
            for (std::size_t i = 0; i < list.size(); ++i) {
                auto& g = list[i];
                g.used = used && *used == i;
                g.missed = !g.used && g.close_t >= ev.wait_start && g.close_t < t_entry;
            }
            if (scope == LaneScope::Both && used) {
                (kind == GapKind::Car ? ev.accepted_gap_car_both : ev.accepted_gap_effective_both) =
                    list[*used].duration;
            }
        }
    }
    return out;
}

inline CrossingEvents crossing_events(const TrialRecord& trial) { return analyze_trial(trial).events; }

}  // namespace pedx
