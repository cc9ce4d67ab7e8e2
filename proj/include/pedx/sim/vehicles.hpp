#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>

#include "pedx/sim/types.hpp"

namespace pedx {

struct VehicleState {
    double x = 0.0;
    double speed = 0.0;
};

/// Time for the linear speed ramp used when braking for, and pulling away from, the zebra.
inline constexpr double kZebraRampSeconds = 1.0;
/// Stop line sits this far upstream of the zebra band edge.
inline constexpr double kStopLineClearance = 1.0;

/// Free-flow position: constant speed, crossing x = 0 at `arrival`.
inline double free_flow_x(const ScenarioConfig& sc, int direction, double arrival, double t) {
    return direction * sc.vehicle_speed * (t - arrival);
}

inline double stop_line_x(const ScenarioConfig& sc, int direction) {
    return sc.zebra_x - direction * (sc.zebra_half_width + kStopLineClearance);
}

/// Kinematic state of one point vehicle, including the scripted zebra stop: the speed
/// ramps linearly to zero over one second ending at the stop line, holds until the
/// yield window closes, then ramps back up.
inline VehicleState vehicle_state(const ScenarioConfig& sc, int direction, double arrival, double t,
                                  const std::optional<ZebraYield>& yield) {
    const double v = sc.vehicle_speed;
    if (!yield) return {free_flow_x(sc, direction, arrival, t), v};

    const double xs = stop_line_x(sc, direction);
    const double t_stop_line = arrival + direction * xs / v;
    if (t_stop_line < yield->start || t_stop_line > yield->end) return {free_flow_x(sc, direction, arrival, t), v};

    const double tau = kZebraRampSeconds;
    const double t_brake = t_stop_line - tau / 2.0;
    const double x_brake = xs - direction * v * tau / 2.0;
    const double t_halt = t_brake + tau;
    const double t_release = std::max(yield->end, t_halt);

    if (t < t_brake) return {free_flow_x(sc, direction, arrival, t), v};
    if (t < t_halt) {
        const double s = t - t_brake;
        return {x_brake + direction * (v * s - v * s * s / (2.0 * tau)), v * (1.0 - s / tau)};
    }
    if (t < t_release) return {xs, 0.0};
    if (t < t_release + tau) {
        const double s = t - t_release;
        return {xs + direction * v * s * s / (2.0 * tau), v * s / tau};
    }
    return {xs + direction * (v * tau / 2.0 + v * (t - t_release - tau)), v};
}

inline VehicleState vehicle_state(const TrialRecord& trial, Lane lane, std::size_t index, double t) {
    const auto& s = trial.stream(lane);
    return vehicle_state(trial.scenario, s.direction, s.arrival_times.at(index), t, trial.zebra_yield);
}

}  // namespace pedx
