#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"

namespace pedx {

enum class GroupCondition { Alone, Risky, Safe };
enum class Lane { Near, Far };

inline std::string_view to_string(GroupCondition g) {
    switch (g) {
        case GroupCondition::Alone: return "Alone";
        case GroupCondition::Risky: return "Risky";
        case GroupCondition::Safe: return "Safe";
    }
    return "?";
}

inline GroupCondition parse_group_condition(std::string_view s) {
    if (s == "Alone") return GroupCondition::Alone;
    if (s == "Risky") return GroupCondition::Risky;
    if (s == "Safe") return GroupCondition::Safe;
    throw InputError("unknown group condition '" + std::string(s) + "'");
}

inline std::string_view to_string(Lane l) { return l == Lane::Near ? "near" : "far"; }

inline Lane parse_lane(std::string_view s) {
    if (s == "near") return Lane::Near;
    if (s == "far") return Lane::Far;
    throw InputError("unknown lane '" + std::string(s) + "'");
}

/// Geometry and traffic parameters of one trial.
///
/// Frame: x runs along the road, y across it. The near road edge is y = 0, the lane
/// boundary y = road_width / 2 and the far edge y = road_width. Near-lane traffic moves
/// towards +x (arrives from the left), far-lane traffic towards -x. Vehicle arrival times
/// refer to the line x = 0, which is the pedestrian's starting abscissa.
struct ScenarioConfig {
    int lane_count = 2;
    double vehicle_speed = 8.33;  // 30 km/h
    double gap_min = 2.5;
    double gap_max = 8.5;
    double road_width = 6.0;
    bool zebra_present = false;
    double zebra_x = 5.0;
    double zebra_half_width = 2.0;
    double start_x = 0.0;
    double start_y = -0.5;
    double goal_x = 0.0;
    double goal_y = 7.0;
    GroupCondition group_condition = GroupCondition::Alone;
    double leader_gap = 0.0;
    /// Far-lane vehicles trail their near-lane counterparts by a per-trial phase drawn from
    /// [-lane_offset_max, lane_offset_max] plus per-vehicle jitter in [-lane_jitter, lane_jitter].
    double lane_offset_max = 1.0;
    double lane_jitter = 0.3;
    double frame_dt = 0.02;
    double horizon = 120.0;

    static ScenarioConfig alone() { return {}; }

    static ScenarioConfig zebra() {
        ScenarioConfig c;
        c.zebra_present = true;
        return c;
    }

    static ScenarioConfig group(GroupCondition g) {
        ScenarioConfig c;
        c.group_condition = g;
        c.leader_gap = g == GroupCondition::Risky ? 4.0 : 6.5;
        return c;
    }

    /// The four conditions of the standard design: alone, zebra, risky leader, safe leader.
    static std::vector<ScenarioConfig> standard_design() {
        return {alone(), zebra(), group(GroupCondition::Risky), group(GroupCondition::Safe)};
    }

    void validate() const {
        const double values[] = {vehicle_speed, gap_min, gap_max, road_width, zebra_x, zebra_half_width,
                                 start_x, start_y, goal_x, goal_y, leader_gap, lane_offset_max, lane_jitter,
                                 frame_dt, horizon};
        for (double v : values) require(std::isfinite(v), "scenario: non-finite parameter");
        require(lane_count == 2, "scenario: lane_count must be 2");
        require(gap_min > 0.0 && gap_min < gap_max, "scenario: gap_min must be positive and below gap_max");
        require(vehicle_speed > 0.0, "scenario: vehicle_speed must be positive");
        require(frame_dt > 0.0, "scenario: frame_dt must be positive");
        require(road_width > 0.0, "scenario: road_width must be positive");
        require(zebra_half_width > 0.0, "scenario: zebra_half_width must be positive");
        require(start_y < 0.0, "scenario: start must lie on the near sidewalk (start_y < 0)");
        require(goal_y > road_width, "scenario: goal must lie on the far sidewalk (goal_y > road_width)");
        require(horizon > 0.0, "scenario: horizon must be positive");
        require(lane_offset_max >= 0.0 && lane_jitter >= 0.0, "scenario: lane offsets must be >= 0");
        if (group_condition != GroupCondition::Alone) {
            require(leader_gap == 4.0 || leader_gap == 6.5, "scenario: leader_gap must be 4.0 or 6.5 in group conditions");
            require(leader_gap >= gap_min && leader_gap <= gap_max, "scenario: leader_gap outside [gap_min, gap_max]");
        }
    }
};

/// Population parameters of a simulated pedestrian. Each participant draws a walk speed S
/// and a safety margin F once; the critical gap is L / S + F with L the road width.
struct AgentProfile {
    std::string profile_name = "DE";
    double walk_speed_mean = 1.43;
    double walk_speed_sd = 0.21;
    double safety_margin_mean = 1.5;
    double safety_margin_sd = 0.4;
    double impatience_rate = 0.5;
    double threshold_floor = 3.5;
    double zebra_preference = 0.55;
    double leader_follow_weight = 0.45;
    double mind_change_prob = 0.04;
    double reaction_time = 0.25;
    /// Gaps opening before a per-trial orientation delay, drawn from U(0, 2 * mean), are not judged.
    double orientation_time_mean = 3.0;

    static AgentProfile germany();
    static AgentProfile japan();

    void validate() const {
        const double values[] = {walk_speed_mean, walk_speed_sd, safety_margin_mean, safety_margin_sd,
                                 impatience_rate, threshold_floor, zebra_preference, leader_follow_weight,
                                 mind_change_prob, reaction_time, orientation_time_mean};
        for (double v : values) require(std::isfinite(v), "agent: non-finite parameter");
        require(walk_speed_mean > 0.0, "agent: walk_speed_mean must be positive");
        require(walk_speed_sd >= 0.0 && safety_margin_sd >= 0.0, "agent: standard deviations must be >= 0");
        require(impatience_rate >= 0.0, "agent: impatience_rate must be >= 0");
        require(threshold_floor > 0.0, "agent: threshold_floor must be positive");
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        require(prob(zebra_preference) && prob(leader_follow_weight) && prob(mind_change_prob),
                "agent: probabilities must lie in [0, 1]");
        require(reaction_time >= 0.0 && orientation_time_mean >= 0.0, "agent: reaction and orientation times must be >= 0");
    }
};

inline AgentProfile AgentProfile::germany() { return AgentProfile{}; }

inline AgentProfile AgentProfile::japan() {
    AgentProfile a;
    a.profile_name = "JP";
    a.walk_speed_mean = 1.48;
    a.walk_speed_sd = 0.21;
    a.safety_margin_mean = 1.9;
    a.safety_margin_sd = 0.5;
    a.impatience_rate = 0.1;
    a.threshold_floor = 5.0;
    a.zebra_preference = 0.6;
    a.leader_follow_weight = 0.35;
    a.mind_change_prob = 0.005;
    return a;
}

/// Per-participant draws, fixed across that participant's trials.
struct ParticipantTraits {
    double walk_speed = 1.43;
    double safety_margin = 1.1;
};

struct VehicleStream {
    Lane lane = Lane::Near;
    int direction = +1;
    std::vector<double> arrival_times;  // time each point vehicle crosses x = 0
};

struct TracePoint {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// Vehicles whose stop line passage falls inside [start, end] brake and hold for the
/// pedestrian on the zebra.
struct ZebraYield {
    double start = 0.0;
    double end = 0.0;
};

struct TrialRecord {
    int trial_id = 0;
    int participant_id = 0;
    std::string country_tag;
    ScenarioConfig scenario;
    std::array<VehicleStream, 2> streams;  // [Near, Far]
    std::vector<TracePoint> trace;
    std::optional<std::size_t> entry_frame_index;
    std::optional<ZebraYield> zebra_yield;

    // Generating ground truth, kept for calibration and acceptance checks.
    double walk_speed = 0.0;
    double safety_margin = 0.0;
    bool chose_zebra = false;
    bool followed_leader = false;
    bool changed_mind = false;

    const VehicleStream& stream(Lane l) const { return streams[l == Lane::Near ? 0 : 1]; }
};

}  // namespace pedx
