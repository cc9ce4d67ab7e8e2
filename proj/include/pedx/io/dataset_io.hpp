#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pedx/core/error.hpp"
#include "pedx/core/format.hpp"
#include "pedx/features/features.hpp"
#include "pedx/gaps/gap_engine.hpp"
#include "pedx/io/csv.hpp"
#include "pedx/sim/types.hpp"

namespace pedx::io {

inline constexpr int kTrialFormatVersion = 1;

/// Dataset directory layout:
///   index.csv                one row per trial: ids, country tag, scenario, zebra yield window
///   traces/trial_<id>.csv    t,x,y
///   vehicles/trial_<id>.csv  lane,arrival_t (lane is "near" or "far")
///   events.jsonl             one JSON object per trial: crossing events and generating ground truth
///   manifest.json            seed, config hash, counts
inline const std::vector<std::string> kIndexHeader{
    "trial_id",   "participant_id", "country_tag",     "lane_count",  "vehicle_speed", "gap_min",
    "gap_max",    "road_width",     "zebra_present",   "zebra_x",     "zebra_half_width", "start_x",
    "start_y",    "goal_x",         "goal_y",          "group_condition", "leader_gap", "lane_offset_max",
    "lane_jitter", "frame_dt",      "horizon",         "yield_start", "yield_end"};
inline const std::vector<std::string> kTraceHeader{"t", "x", "y"};
inline const std::vector<std::string> kVehicleHeader{"lane", "arrival_t"};

struct Manifest {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t trials = 0;
    std::size_t participants = 0;
    std::map<std::string, std::size_t> trials_per_domain;
};

inline std::string trial_file_name(int id) { return "trial_" + std::to_string(id) + ".csv"; }

/// Rounds to the precision files carry, so JSON numbers print with at most 9 digits.
inline nlohmann::json json_num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::stod(fmt_num(v));
}

namespace detail {

inline std::string index_row(const TrialRecord& t) {
    const auto& s = t.scenario;
    CsvWriter w({});
    w.cell(t.trial_id).cell(t.participant_id).cell(t.country_tag).cell(s.lane_count).cell(s.vehicle_speed)
        .cell(s.gap_min).cell(s.gap_max).cell(s.road_width).cell(s.zebra_present).cell(s.zebra_x)
        .cell(s.zebra_half_width).cell(s.start_x).cell(s.start_y).cell(s.goal_x).cell(s.goal_y)
        .cell(std::string(to_string(s.group_condition))).cell(s.leader_gap).cell(s.lane_offset_max)
        .cell(s.lane_jitter).cell(s.frame_dt).cell(s.horizon);
    if (t.zebra_yield) w.cell(t.zebra_yield->start).cell(t.zebra_yield->end);
    else w.cell("").cell("");
    w.end_row();
    return w.str();
}

inline nlohmann::json events_json(const TrialRecord& t) {
    const auto ev = crossing_events(t);
    nlohmann::json j;
    j["trial_id"] = t.trial_id;
    j["wait_start"] = json_num(ev.wait_start);
    j["road_entry_t"] = ev.road_entry_t ? json_num(*ev.road_entry_t) : nlohmann::json(nullptr);
    j["crossing_end_t"] = ev.crossing_end_t ? json_num(*ev.crossing_end_t) : nlohmann::json(nullptr);
    j["accepted_gap"] = json_num(ev.accepted_gap_car_both);
    j["used_zebra"] = ev.used_zebra;
    j["walk_speed"] = json_num(t.walk_speed);
    j["safety_margin"] = json_num(t.safety_margin);
    j["chose_zebra"] = t.chose_zebra;
    j["followed_leader"] = t.followed_leader;
    j["changed_mind"] = t.changed_mind;
    return j;
}

}  // namespace detail

/// Writes the trials into `dir` atomically: everything goes to a staging directory that is
/// renamed into place at the end.
inline void write_trial_files(const fs::path& dir, std::span<const TrialRecord> trials, const Manifest& manifest) {
    std::set<int> ids;
    for (const auto& t : trials)
        if (!ids.insert(t.trial_id).second)
            throw InputError("write_trial_files: duplicate trial id " + std::to_string(t.trial_id));

    StagedDirectory stage(dir);
    const fs::path root = stage.path();
    fs::create_directories(root / "traces");
    fs::create_directories(root / "vehicles");

    std::string index = CsvWriter(kIndexHeader).str();
    std::string events;
    for (const auto& t : trials) {
        index += detail::index_row(t);
        events += detail::events_json(t).dump() + "\n";

        CsvWriter tr(kTraceHeader);
        for (const auto& p : t.trace) tr.cell(p.t).cell(p.x).cell(p.y).end_row();
        write_text(root / "traces" / trial_file_name(t.trial_id), tr.str());

        CsvWriter vw(kVehicleHeader);
        for (const auto& s : t.streams)
            for (double a : s.arrival_times) vw.cell(std::string(to_string(s.lane))).cell(a).end_row();
        write_text(root / "vehicles" / trial_file_name(t.trial_id), vw.str());
    }
    write_text(root / "index.csv", index);
    write_text(root / "events.jsonl", events);

    nlohmann::ordered_json m;
    m["format"] = "pedx-trials";
    m["version"] = kTrialFormatVersion;
    m["seed"] = manifest.seed;
    m["config_hash"] = manifest.config_hash;
    m["counts"]["trials"] = manifest.trials;
    m["counts"]["participants"] = manifest.participants;
    for (const auto& [tag, n] : manifest.trials_per_domain) m["counts"]["per_domain"][tag] = n;
    write_text(root / "manifest.json", m.dump(2) + "\n");
    stage.commit();
}

inline Manifest make_manifest(std::span<const TrialRecord> trials, std::uint64_t seed, const std::string& config_hash) {
    Manifest m;
    m.seed = seed;
    m.config_hash = config_hash;
    m.trials = trials.size();
    std::set<int> people;
    for (const auto& t : trials) {
        people.insert(t.participant_id);
        ++m.trials_per_domain[t.country_tag];
    }
    m.participants = people.size();
    return m;
}

inline Manifest read_manifest(const fs::path& dir) {
    const fs::path p = dir / "manifest.json";
    try {
        const auto j = nlohmann::json::parse(read_text(p));
        if (j.at("format") != "pedx-trials") throw InputError("manifest.json: not a pedx trial dataset");
        if (j.at("version") != kTrialFormatVersion) throw InputError("manifest.json: unsupported version");
        Manifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.trials = j.at("counts").at("trials").get<std::size_t>();
        m.participants = j.at("counts").at("participants").get<std::size_t>();
        if (j.at("counts").contains("per_domain"))
            for (const auto& [k, v] : j.at("counts").at("per_domain").items()) m.trials_per_domain[k] = v.get<std::size_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("manifest.json: " + std::string(e.what()));
    }
}

namespace detail {

inline ScenarioConfig scenario_from_index(const CsvTable& t, std::size_t r) {
    ScenarioConfig s;
    auto num = [&](const char* c) { return t.number(r, t.column(c)); };
    s.lane_count = static_cast<int>(t.integer(r, t.column("lane_count")));
    s.vehicle_speed = num("vehicle_speed");
    s.gap_min = num("gap_min");
    s.gap_max = num("gap_max");
    s.road_width = num("road_width");
    s.zebra_present = t.boolean(r, t.column("zebra_present"));
    s.zebra_x = num("zebra_x");
    s.zebra_half_width = num("zebra_half_width");
    s.start_x = num("start_x");
    s.start_y = num("start_y");
    s.goal_x = num("goal_x");
    s.goal_y = num("goal_y");
    try {
        s.group_condition = parse_group_condition(t.text(r, t.column("group_condition")));
    } catch (const InputError& e) {
        t.fail(r, e.what());
    }
    s.leader_gap = num("leader_gap");
    s.lane_offset_max = num("lane_offset_max");
    s.lane_jitter = num("lane_jitter");
    s.frame_dt = num("frame_dt");
    s.horizon = num("horizon");
    try {
        s.validate();
    } catch (const InputError& e) {
        t.fail(r, e.what());
    }
    return s;
}

inline std::vector<TracePoint> read_trace(const fs::path& p) {
    const CsvTable t = read_csv(p);
    require_header(t, kTraceHeader);
    if (t.rows.empty()) throw InputError(t.source + ": trace has no rows");
    std::vector<TracePoint> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        TracePoint q{t.number(r, 0), t.number(r, 1), t.number(r, 2)};
        if (!std::isfinite(q.t) || !std::isfinite(q.x) || !std::isfinite(q.y)) t.fail(r, "non-finite value");
        if (!out.empty() && !(q.t > out.back().t)) t.fail(r, "time stamps must be strictly increasing");
        out.push_back(q);
    }
    return out;
}

inline void read_vehicles(const fs::path& p, TrialRecord& trial) {
    const CsvTable t = read_csv(p);
    require_header(t, kVehicleHeader);
    trial.streams[0] = {Lane::Near, +1, {}};
    trial.streams[1] = {Lane::Far, -1, {}};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Lane lane{};
        try {
            lane = parse_lane(t.text(r, 0));
        } catch (const InputError& e) {
            t.fail(r, e.what());
        }
        const double a = t.number(r, 1);
        if (!std::isfinite(a)) t.fail(r, "non-finite arrival time");
        auto& list = trial.streams[lane == Lane::Near ? 0 : 1].arrival_times;
        if (!list.empty() && !(a > list.back())) t.fail(r, "arrival times must increase within a lane");
        list.push_back(a);
    }
}

inline std::vector<int> trial_ids_in(const fs::path& dir) {
    std::vector<int> ids;
    if (!fs::exists(dir)) return ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (n.rfind("trial_", 0) != 0 || e.path().extension() != ".csv") continue;
        try {
            std::size_t used = 0;
            const std::string stem = e.path().stem().string().substr(6);
            const int id = std::stoi(stem, &used);
            if (used == stem.size()) ids.push_back(id);
        } catch (const std::exception&) {
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace detail

/// Reads a dataset directory and checks that index, traces and vehicle files refer to the
/// same trials. events.jsonl is optional; without it the generating ground truth stays at
/// its defaults.
inline std::vector<TrialRecord> read_trial_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir.string());
    const CsvTable idx = read_csv(dir / "index.csv");
    require_header(idx, kIndexHeader);

    std::vector<TrialRecord> trials;
    std::set<int> ids;
    for (std::size_t r = 0; r < idx.rows.size(); ++r) {
        TrialRecord t;
        t.trial_id = static_cast<int>(idx.integer(r, idx.column("trial_id")));
        t.participant_id = static_cast<int>(idx.integer(r, idx.column("participant_id")));
        t.country_tag = idx.text(r, idx.column("country_tag"));
        if (t.country_tag.empty()) idx.fail(r, "empty country_tag");
        if (!ids.insert(t.trial_id).second) idx.fail(r, "duplicate trial_id " + std::to_string(t.trial_id));
        t.scenario = detail::scenario_from_index(idx, r);
        const auto& ys = idx.text(r, idx.column("yield_start"));
        const auto& ye = idx.text(r, idx.column("yield_end"));
        if (ys.empty() != ye.empty()) idx.fail(r, "yield_start and yield_end must both be set or both be empty");
        if (!ys.empty()) t.zebra_yield = ZebraYield{idx.number(r, idx.column("yield_start")), idx.number(r, idx.column("yield_end"))};

        const fs::path trace = dir / "traces" / trial_file_name(t.trial_id);
        const fs::path veh = dir / "vehicles" / trial_file_name(t.trial_id);
        if (!fs::exists(trace)) idx.fail(r, "missing trace file traces/" + trial_file_name(t.trial_id));
        if (!fs::exists(veh)) idx.fail(r, "missing vehicle file vehicles/" + trial_file_name(t.trial_id));
        t.trace = detail::read_trace(trace);
        detail::read_vehicles(veh, t);
        t.entry_frame_index = find_entry_frame(t.trace);
        trials.push_back(std::move(t));
    }
    for (const char* sub : {"traces", "vehicles"})
        for (int id : detail::trial_ids_in(dir / sub))
            if (!ids.count(id))
                throw InputError(std::string(sub) + "/" + trial_file_name(id) + ": trial " + std::to_string(id) +
                                 " is not listed in index.csv");

    const fs::path ev = dir / "events.jsonl";
    if (fs::exists(ev)) {
        std::map<int, std::size_t> pos;
        for (std::size_t i = 0; i < trials.size(); ++i) pos[trials[i].trial_id] = i;
        std::istringstream in(read_text(ev));
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = "events.jsonl:" + std::to_string(lineno) + ": ";
            try {
                const auto j = nlohmann::json::parse(line);
                const int id = j.at("trial_id").get<int>();
                if (!pos.count(id)) throw InputError(where + "trial " + std::to_string(id) + " is not listed in index.csv");
                auto& t = trials[pos[id]];
                auto num = [&](const char* k) { return j.at(k).is_null() ? 0.0 : j.at(k).get<double>(); };
                t.walk_speed = num("walk_speed");
                t.safety_margin = num("safety_margin");
                t.chose_zebra = j.at("chose_zebra").get<bool>();
                t.followed_leader = j.at("followed_leader").get<bool>();
                t.changed_mind = j.at("changed_mind").get<bool>();
            } catch (const nlohmann::json::exception& e) {
                throw InputError(where + e.what());
            }
        }
    }
    return trials;
}

// ---- feature table -------------------------------------------------------------------

/// Column order: ids, 14 pre-event features, 5 entry-frame features, labels, then the
/// resampled trajectory as x_1,y_1,...,x_m,y_m. Missing values are empty cells.
inline std::vector<std::string> feature_header(std::size_t m) {
    std::vector<std::string> h{"trial_id", "participant_id", "country_tag", "condition", "zebra_scenario"};
    for (auto n : PreEventFeatures::names) h.emplace_back(n);
    for (auto n : EntryFrameFeatures::names) h.emplace_back(n);
    h.emplace_back("label_gap");
    h.emplace_back("label_zebra");
    for (std::size_t i = 1; i <= m; ++i) {
        h.push_back("x_" + std::to_string(i));
        h.push_back("y_" + std::to_string(i));
    }
    return h;
}

inline std::string features_csv(std::span<const FeatureRow> rows, std::size_t m) {
    CsvWriter w(feature_header(m));
    for (const auto& r : rows) {
        w.cell(r.trial_id).cell(r.participant_id).cell(r.country_tag).cell(std::string(to_string(r.condition)))
            .cell(r.zebra_scenario);
        for (double v : r.pre.values()) w.cell(v);
        for (std::size_t j = 0; j < EntryFrameFeatures::names.size(); ++j)
            r.entry ? w.cell(r.entry->values()[j]) : w.cell("");
        r.label_gap ? w.cell(*r.label_gap) : w.cell("");
        r.label_zebra ? w.cell(*r.label_zebra) : w.cell("");
        if (!r.trajectory.empty() && r.trajectory.size() != m)
            throw InputError("features_csv: trial " + std::to_string(r.trial_id) + " has a trajectory of the wrong length");
        for (std::size_t i = 0; i < m; ++i)
            r.trajectory.empty() ? w.cell("").cell("") : w.cell(r.trajectory[i].x).cell(r.trajectory[i].y);
        w.end_row();
    }
    return w.str();
}

inline std::vector<FeatureRow> parse_features(const CsvTable& t) {
    const std::size_t fixed = 5 + 14 + 5 + 2;
    if (t.header.size() < fixed || (t.header.size() - fixed) % 2 != 0)
        throw InputError(t.source + ":1: unexpected feature header");
    const std::size_t m = (t.header.size() - fixed) / 2;
    require_header(t, feature_header(m));
    std::vector<FeatureRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        FeatureRow f;
        f.trial_id = static_cast<int>(t.integer(r, 0));
        f.participant_id = static_cast<int>(t.integer(r, 1));
        f.country_tag = t.text(r, 2);
        try {
            f.condition = parse_group_condition(t.text(r, 3));
        } catch (const InputError& e) {
            t.fail(r, e.what());
        }
        f.zebra_scenario = t.boolean(r, 4);
        std::vector<double> pre(14);
        for (std::size_t j = 0; j < 14; ++j) pre[j] = t.number(r, 5 + j);
        f.pre = PreEventFeatures::from_values(pre);
        std::size_t blank = 0;
        std::vector<double> entry(5);
        for (std::size_t j = 0; j < 5; ++j) {
            if (t.text(r, 19 + j).empty()) ++blank;
            else entry[j] = t.number(r, 19 + j);
        }
        if (blank != 0 && blank != 5) t.fail(r, "entry-frame features must be all present or all empty");
        if (blank == 0) f.entry = EntryFrameFeatures::from_values(entry);
        if (!t.text(r, 24).empty()) f.label_gap = t.number(r, 24);
        if (!t.text(r, 25).empty()) f.label_zebra = t.boolean(r, 25);
        if (m > 0 && !t.text(r, fixed).empty()) {
            for (std::size_t i = 0; i < m; ++i) f.trajectory.push_back({t.number(r, fixed + 2 * i), t.number(r, fixed + 2 * i + 1)});
        }
        out.push_back(std::move(f));
    }
    return out;
}

inline std::vector<FeatureRow> read_features(const fs::path& p) { return parse_features(read_csv(p)); }

}  // namespace pedx::io
