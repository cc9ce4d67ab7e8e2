#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/format.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/eval/splits.hpp"
#include "pedx/models/spec.hpp"
#include "pedx/sim/types.hpp"
#include "pedx/transfer/trajectory.hpp"

namespace pedx::io {

namespace fs = std::filesystem;

inline constexpr int kConfigVersion = 1;

/// A parsed key = value file with [sections]. Every value remembers its line.
struct IniDocument {
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::string source;
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::map<std::string, int> section_line;
    std::vector<std::string> section_order;

    bool has_section(const std::string& s) const { return sections.count(s) > 0; }

    const Entry* find(const std::string& section, const std::string& key) const {
        const auto s = sections.find(section);
        if (s == sections.end()) return nullptr;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw InputError(source + ":" + std::to_string(line) + ": " + what);
    }
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline IniDocument parse_ini(std::istream& in, const std::string& source) {
    IniDocument doc;
    doc.source = source;
    std::string line, current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = trim(line);
        if (v.empty() || v.front() == '#' || v.front() == ';') continue;
        if (v.front() == '[') {
            if (v.back() != ']') doc.fail(lineno, "unterminated section header");
            current = std::string(trim(v.substr(1, v.size() - 2)));
            if (current.empty()) doc.fail(lineno, "empty section name");
            if (doc.sections.count(current)) doc.fail(lineno, "duplicate section [" + current + "]");
            doc.sections[current];
            doc.section_line[current] = lineno;
            doc.section_order.push_back(current);
            continue;
        }
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) doc.fail(lineno, "expected 'key = value'");
        if (current.empty()) doc.fail(lineno, "key outside of any [section]");
        const std::string key(trim(v.substr(0, eq)));
        std::string_view value = trim(v.substr(eq + 1));
        if (const auto hash = value.find(" #"); hash != std::string_view::npos) value = trim(value.substr(0, hash));
        if (key.empty()) doc.fail(lineno, "empty key");
        auto& sec = doc.sections[current];
        if (sec.count(key)) doc.fail(lineno, "duplicate key '" + key + "' in [" + current + "]");
        sec[key] = {std::string(value), lineno, false};
    }
    return doc;
}

namespace detail {

template <class T>
T parse_number(const IniDocument& doc, const IniDocument::Entry& e, const std::string& key) {
    T v{};
    const auto& s = e.value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        doc.fail(e.line, "'" + key + "': '" + s + "' is not a valid number");
    return v;
}

inline bool parse_bool(const IniDocument& doc, const IniDocument::Entry& e, const std::string& key) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    doc.fail(e.line, "'" + key + "': expected true or false");
}

inline std::vector<std::string> parse_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Runs fn on a value; InputErrors it throws are re-reported at the value's line.
template <class Fn>
auto at_line(const IniDocument& doc, const IniDocument::Entry& e, Fn&& fn) {
    try {
        return fn();
    } catch (const InputError& ex) {
        doc.fail(e.line, ex.what());
    }
}

}  // namespace detail

struct GenerationBlock {
    int participants = 30;
    int trials_per_condition = 15;
    std::vector<std::string> domains{"DE", "JP"};
};

/// Everything a CLI command needs. Paths are resolved against the config file's directory.
struct ExperimentConfig {
    std::string source;
    std::uint64_t seed = 42;
    fs::path out = "out";
    PredictionTask task = PredictionTask::GapSelection;
    SplitMode split = SplitMode::ByParticipant;
    std::vector<ModelKind> models;
    std::vector<Strategy> strategies{Strategy::Separate, Strategy::Joint, Strategy::CountryFeature,
                                     Strategy::ClusterFeature};
    std::size_t n_clusters = 2;
    bool per_cluster = false;  // trajectory ClusterFeature: one regressor per cluster
    DatasetOptions dataset_options;
    std::size_t resample_count = 32;
    GradientParams gd;
    ForestParams forest;

    ScenarioConfig scenario;
    std::map<std::string, AgentProfile> agents;  // keyed by domain tag
    std::optional<GenerationBlock> generation;
    std::optional<fs::path> dataset_path;

    fs::path dataset_dir() const { return dataset_path ? *dataset_path : out / "dataset"; }

    /// Default model list per task.
    std::vector<ModelKind> model_list() const {
        if (!models.empty()) return models;
        if (task == PredictionTask::ZebraUsage)
            return {ModelKind::LogisticRegression, ModelKind::LinearSVM, ModelKind::RandomForest, ModelKind::MLP};
        return {ModelKind::LinearRegression, ModelKind::RandomForest, ModelKind::MLP};
    }

    ModelSpec model_spec(ModelKind kind) const {
        const auto& hidden = task == PredictionTask::GapSelection ? kHiddenGapSelection
                             : task == PredictionTask::ZebraUsage ? kHiddenZebraUsage
                                                                  : kHiddenTrajectory;
        ModelSpec s = make_spec(kind, model_task(task), hidden, seed);
        s.gd = gd;
        s.forest = forest;
        return s;
    }

    /// Scenario list of the standard design with the configured overrides.
    std::vector<ScenarioConfig> design() const {
        auto d = ScenarioConfig::standard_design();
        for (auto& c : d) {
            const bool zebra = c.zebra_present;
            const auto g = c.group_condition;
            const double leader = c.leader_gap;
            c = scenario;
            c.zebra_present = zebra;
            c.group_condition = g;
            c.leader_gap = leader;
        }
        return d;
    }
};

namespace detail {

inline void apply_scenario(const IniDocument& doc, ScenarioConfig& sc) {
    const std::pair<const char*, double ScenarioConfig::*> fields[] = {
        {"vehicle_speed", &ScenarioConfig::vehicle_speed}, {"gap_min", &ScenarioConfig::gap_min},
        {"gap_max", &ScenarioConfig::gap_max},             {"road_width", &ScenarioConfig::road_width},
        {"zebra_x", &ScenarioConfig::zebra_x},             {"zebra_half_width", &ScenarioConfig::zebra_half_width},
        {"start_x", &ScenarioConfig::start_x},             {"start_y", &ScenarioConfig::start_y},
        {"goal_x", &ScenarioConfig::goal_x},               {"goal_y", &ScenarioConfig::goal_y},
        {"lane_offset_max", &ScenarioConfig::lane_offset_max}, {"lane_jitter", &ScenarioConfig::lane_jitter},
        {"frame_dt", &ScenarioConfig::frame_dt},           {"horizon", &ScenarioConfig::horizon}};
    for (const auto& [key, member] : fields)
        if (const auto* e = doc.find("scenario", key)) sc.*member = parse_number<double>(doc, *e, key);
    if (const auto* e = doc.find("scenario", "lane_count")) sc.lane_count = parse_number<int>(doc, *e, "lane_count");
    // Cross-field checks point at the later of the two keys.
    const auto* gmin = doc.find("scenario", "gap_min");
    const auto* gmax = doc.find("scenario", "gap_max");
    if (!(sc.gap_min < sc.gap_max)) {
        const int line = std::max(gmin ? gmin->line : 0, gmax ? gmax->line : 0);
        doc.fail(line ? line : doc.section_line.at("scenario"),
                 "gap_min (" + fmt_num(sc.gap_min) + ") must be below gap_max (" + fmt_num(sc.gap_max) + ")");
    }
    try {
        sc.validate();
    } catch (const InputError& ex) {
        doc.fail(doc.section_line.count("scenario") ? doc.section_line.at("scenario") : 1, ex.what());
    }
}

inline void apply_agent(const IniDocument& doc, const std::string& section, AgentProfile& a) {
    if (const auto* e = doc.find(section, "preset")) {
        if (e->value == "germany" || e->value == "DE") a = AgentProfile::germany();
        else if (e->value == "japan" || e->value == "JP") a = AgentProfile::japan();
        else doc.fail(e->line, "unknown agent preset '" + e->value + "' (expected germany or japan)");
    }
    const std::pair<const char*, double AgentProfile::*> fields[] = {
        {"walk_speed_mean", &AgentProfile::walk_speed_mean},
        {"walk_speed_sd", &AgentProfile::walk_speed_sd},
        {"safety_margin_mean", &AgentProfile::safety_margin_mean},
        {"safety_margin_sd", &AgentProfile::safety_margin_sd},
        {"impatience_rate", &AgentProfile::impatience_rate},
        {"threshold_floor", &AgentProfile::threshold_floor},
        {"zebra_preference", &AgentProfile::zebra_preference},
        {"leader_follow_weight", &AgentProfile::leader_follow_weight},
        {"mind_change_prob", &AgentProfile::mind_change_prob},
        {"reaction_time", &AgentProfile::reaction_time},
        {"orientation_time_mean", &AgentProfile::orientation_time_mean}};
    for (const auto& [key, member] : fields)
        if (const auto* e = doc.find(section, key)) a.*member = parse_number<double>(doc, *e, key);
    try {
        a.validate();
    } catch (const InputError& ex) {
        doc.fail(doc.section_line.at(section), ex.what());
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const IniDocument& doc, const fs::path& base_dir = {}) {
    using namespace detail;
    ExperimentConfig c;
    c.source = doc.source;
    for (const auto& s : doc.section_order) {
        const bool known = s == "experiment" || s == "generation" || s == "dataset" || s == "scenario" ||
                           s == "models" || s.rfind("agent.", 0) == 0;
        if (!known) doc.fail(doc.section_line.at(s), "unknown section [" + s + "]");
    }
    if (!doc.has_section("experiment")) throw InputError(doc.source + ": missing [experiment] section");
    auto resolve = [&](const std::string& p) { return (fs::path(p).is_absolute() ? fs::path(p) : base_dir / p).lexically_normal(); };

    if (const auto* e = doc.find("experiment", "version")) {
        const int v = parse_number<int>(doc, *e, "version");
        if (v != kConfigVersion) doc.fail(e->line, "unsupported config version " + std::to_string(v));
    }
    if (const auto* e = doc.find("experiment", "seed")) c.seed = parse_number<std::uint64_t>(doc, *e, "seed");
    if (const auto* e = doc.find("experiment", "out")) c.out = resolve(e->value);
    if (const auto* e = doc.find("experiment", "task"))
        c.task = at_line(doc, *e, [&] { return parse_prediction_task(e->value); });
    if (const auto* e = doc.find("experiment", "split"))
        c.split = at_line(doc, *e, [&] { return parse_split_mode(e->value); });
    if (const auto* e = doc.find("experiment", "models"))
        for (const auto& m : parse_list(e->value)) c.models.push_back(at_line(doc, *e, [&] { return parse_model_kind(m); }));
    if (const auto* e = doc.find("experiment", "strategies")) {
        c.strategies.clear();
        for (const auto& s : parse_list(e->value)) {
            const auto st = at_line(doc, *e, [&] { return parse_strategy(s); });
            if (st == Strategy::ZebraUsageFeature && c.task != PredictionTask::Trajectory)
                doc.fail(e->line, "ZebraUsageFeature is only valid for the Trajectory task");
            c.strategies.push_back(st);
        }
    }
    if (const auto* e = doc.find("experiment", "n_clusters")) {
        const int k = parse_number<int>(doc, *e, "n_clusters");
        if (k < 1) doc.fail(e->line, "n_clusters must be >= 1");
        c.n_clusters = static_cast<std::size_t>(k);
    }
    if (const auto* e = doc.find("experiment", "per_cluster")) {
        c.per_cluster = parse_bool(doc, *e, "per_cluster");
        if (c.per_cluster && c.task != PredictionTask::Trajectory)
            doc.fail(e->line, "per_cluster only applies to the Trajectory task");
    }
    if (const auto* e = doc.find("experiment", "entry_features"))
        c.dataset_options.entry_features = parse_bool(doc, *e, "entry_features");
    if (const auto* e = doc.find("experiment", "gap_conditions")) {
        c.dataset_options.conditions.clear();
        for (const auto& g : parse_list(e->value))
            if (g != "all") c.dataset_options.conditions.push_back(at_line(doc, *e, [&] { return parse_group_condition(g); }));
    }
    if (const auto* e = doc.find("experiment", "resample_count")) {
        const int m = parse_number<int>(doc, *e, "resample_count");
        if (m < 2) doc.fail(e->line, "resample_count must be >= 2");
        c.resample_count = static_cast<std::size_t>(m);
    }
    for (const auto& m : c.models) {
        const auto t = model_task(c.task);
        const auto* e = doc.find("experiment", "models");
        if (t == Task::Regression && (m == ModelKind::LogisticRegression || m == ModelKind::LinearSVM))
            doc.fail(e->line, std::string(to_string(m)) + " cannot be used for the regression task " +
                                  std::string(to_string(c.task)));
        if (t == Task::Classification && m == ModelKind::LinearRegression)
            doc.fail(e->line, "LinearRegression cannot be used for the classification task ZebraUsage");
    }

    if (doc.has_section("models")) {
        if (const auto* e = doc.find("models", "learning_rate")) c.gd.learning_rate = parse_number<double>(doc, *e, "learning_rate");
        if (const auto* e = doc.find("models", "momentum")) c.gd.momentum = parse_number<double>(doc, *e, "momentum");
        if (const auto* e = doc.find("models", "epochs")) c.gd.epochs = parse_number<int>(doc, *e, "epochs");
        if (const auto* e = doc.find("models", "batch_size")) c.gd.batch_size = parse_number<int>(doc, *e, "batch_size");
        if (const auto* e = doc.find("models", "l2")) c.gd.l2 = parse_number<double>(doc, *e, "l2");
        if (const auto* e = doc.find("models", "n_trees")) c.forest.n_trees = parse_number<int>(doc, *e, "n_trees");
        if (const auto* e = doc.find("models", "max_depth")) c.forest.max_depth = parse_number<int>(doc, *e, "max_depth");
        try {
            c.model_spec(c.model_list().front()).validate();
        } catch (const InputError& ex) {
            doc.fail(doc.section_line.at("models"), ex.what());
        }
    }

    if (doc.has_section("scenario")) apply_scenario(doc, c.scenario);
    for (const auto& sc : c.design()) {
        try {
            sc.validate();
        } catch (const InputError& ex) {
            if (!doc.has_section("scenario")) throw;
            doc.fail(doc.section_line.at("scenario"), ex.what());
        }
    }

    const bool gen = doc.has_section("generation"), data = doc.has_section("dataset");
    if (gen == data)
        throw InputError(doc.source + ": exactly one of [generation] or [dataset] is required");
    if (gen) {
        GenerationBlock g;
        if (const auto* e = doc.find("generation", "participants")) g.participants = parse_number<int>(doc, *e, "participants");
        if (const auto* e = doc.find("generation", "trials_per_condition"))
            g.trials_per_condition = parse_number<int>(doc, *e, "trials_per_condition");
        if (const auto* e = doc.find("generation", "domains")) g.domains = parse_list(e->value);
        const int line = doc.section_line.at("generation");
        if (g.participants < 1) doc.fail(line, "participants must be >= 1");
        if (g.trials_per_condition < 1) doc.fail(line, "trials_per_condition must be >= 1");
        if (g.domains.empty()) doc.fail(line, "domains must not be empty");
        for (const auto& d : g.domains) {
            AgentProfile a = d == "JP" ? AgentProfile::japan() : AgentProfile::germany();
            a.profile_name = d;
            const std::string section = "agent." + d;
            if (doc.has_section(section)) {
                apply_agent(doc, section, a);
                a.profile_name = d;
            }
            c.agents[d] = a;
        }
        c.generation = g;
    } else {
        const auto* e = doc.find("dataset", "path");
        if (!e) doc.fail(doc.section_line.at("dataset"), "[dataset] needs 'path'");
        c.dataset_path = resolve(e->value);
    }

    for (const auto& [name, sec] : doc.sections)
        for (const auto& [key, entry] : sec)
            if (!entry.used) doc.fail(entry.line, "unknown key '" + key + "' in [" + name + "]");
    return c;
}

inline ExperimentConfig load_config(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open config " + p.string());
    const auto doc = parse_ini(in, p.filename().string());
    return parse_config(doc, p.parent_path());
}

}  // namespace pedx::io
