#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pedx/core/error.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/eval/cross_validate.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/eval/splits.hpp"
#include "pedx/eval/stats.hpp"
#include "pedx/features/features.hpp"
#include "pedx/io/config.hpp"
#include "pedx/io/csv.hpp"
#include "pedx/io/dataset_io.hpp"
#include "pedx/io/reports.hpp"
#include "pedx/sim/traffic_sim.hpp"
#include "pedx/transfer/transfer.hpp"

namespace pedx::io {

/// Command-line overrides. Unset fields keep the config value.
struct CommandOptions {
    fs::path config;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    std::optional<std::string> split;
    std::optional<std::string> task;
    std::vector<std::string> strategies;
    // stats
    std::string grouping = "country";
    std::vector<std::string> values{"T_w"};
    std::string domain;               // restrict to one domain; empty keeps all
    std::vector<std::string> groups;  // restrict to these group keys; empty keeps all
};

inline constexpr int kDomainTrialIdStride = 100000;
inline constexpr int kDomainParticipantIdStride = 1000;

inline std::uint64_t parse_seed(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) throw InputError(what + ": invalid seed '" + s + "'");
    return v;
}

/// Config plus overrides. Precedence: command-line flag, then PEDX_SEED, then the file.
inline ExperimentConfig resolve_config(const CommandOptions& o) {
    if (o.config.empty()) throw InputError("--config is required");
    ExperimentConfig c = load_config(o.config);
    if (const char* env = std::getenv("PEDX_SEED"); env && *env) c.seed = parse_seed(env, "PEDX_SEED");
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.split) c.split = parse_split_mode(*o.split);
    if (o.task) c.task = parse_prediction_task(*o.task);
    if (!o.strategies.empty()) {
        c.strategies.clear();
        for (const auto& s : o.strategies) c.strategies.push_back(parse_strategy(s));
    }
    for (auto s : c.strategies)
        if (s == Strategy::ZebraUsageFeature && c.task != PredictionTask::Trajectory)
            throw InputError("strategy ZebraUsageFeature is only valid for the Trajectory task");
    for (auto m : c.model_list()) {
        try {
            c.model_spec(m).validate();
        } catch (const InputError& e) {
            throw InputError("model " + std::string(to_string(m)) + " does not fit task " + std::string(to_string(c.task)) +
                             ": " + e.what());
        }
    }
    return c;
}

// ---- simulate --------------------------------------------------------------------------

inline std::vector<TrialRecord> simulate_trials(const ExperimentConfig& c) {
    if (!c.generation) throw InputError(c.source + ": simulate needs a [generation] section");
    const auto design = c.design();
    std::vector<TrialRecord> all;
    for (std::size_t i = 0; i < c.generation->domains.size(); ++i) {
        const auto& tag = c.generation->domains[i];
        auto trials = generate_dataset(design, c.agents.at(tag), c.generation->participants,
                                       c.generation->trials_per_condition, derive_seed(c.seed, 0xD0D0, i),
                                       static_cast<int>(i) * kDomainTrialIdStride,
                                       static_cast<int>(i) * kDomainParticipantIdStride);
        for (auto& t : trials) all.push_back(std::move(t));
    }
    return all;
}

inline Manifest cmd_simulate(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    if (!c.generation) throw InputError(o.config.filename().string() + ": simulate needs a [generation] section");
    const int per_domain = c.generation->participants * c.generation->trials_per_condition *
                           static_cast<int>(c.design().size());
    if (per_domain > kDomainTrialIdStride || c.generation->participants > kDomainParticipantIdStride)
        throw InputError("too many trials or participants per domain for the id layout");
    const auto trials = simulate_trials(c);
    const Manifest m = make_manifest(trials, c.seed, hex64(fnv1a(read_text(o.config))));
    write_trial_files(c.dataset_dir(), trials, m);
    log << "simulate: wrote " << m.trials << " trials (" << m.participants << " participants) to "
        << c.dataset_dir().string() << "\n";
    return m;
}

// ---- feature extraction ------------------------------------------------------------------

struct LoadedData {
    std::vector<FeatureRow> rows;
    std::vector<int> skipped;
};

inline LoadedData load_features(const ExperimentConfig& c) {
    const auto trials = read_trial_files(c.dataset_dir());
    if (trials.empty()) throw InputError(c.dataset_dir().string() + ": dataset has no trials");
    auto ex = extract_all(trials, c.resample_count);
    return {std::move(ex.rows), std::move(ex.skipped_trials)};
}

inline void cmd_extract(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    const auto data = load_features(c);
    StagedDirectory stage(c.out / "features");
    write_text(stage.path() / "features.csv", features_csv(data.rows, c.resample_count));
    CsvWriter sk({"trial_id"});
    for (int id : data.skipped) sk.cell(id).end_row();
    write_text(stage.path() / "skipped_trials.csv", sk.str());
    stage.commit();
    log << "extract: " << data.rows.size() << " feature rows, " << data.skipped.size() << " trials without road entry\n";
}

/// One dataset per domain for the configured task, in order of first appearance.
inline std::vector<Dataset> task_datasets(const ExperimentConfig& c, const std::vector<FeatureRow>& rows) {
    const Dataset all = make_dataset(rows, c.task, c.dataset_options);
    if (all.rows() == 0)
        throw InputError("no rows for task " + std::string(to_string(c.task)) + " in " + c.dataset_dir().string());
    std::vector<Dataset> out;
    for (const auto& tag : all.domain_tags()) out.push_back(all.domain(tag));
    return out;
}

// ---- run ---------------------------------------------------------------------------------

inline void cmd_run(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    const auto data = load_features(c);
    const auto domains = task_datasets(c, data.rows);

    std::vector<ModelSpec> specs;
    for (auto k : c.model_list()) specs.push_back(c.model_spec(k));

    // The transfer matrix diagonal is exactly the within-domain cross-validation.
    std::optional<TransferMatrix> tm;
    if (domains.size() >= 2) tm = transfer_eval(domains, specs, c.split, c.seed);
    std::vector<DomainEval> evals;
    std::map<std::string, std::vector<EvalReport>> by_domain;
    for (const auto& d : domains) {
        const std::string tag = d.domain_tags().at(0);
        const SplitPlan plan = make_splits(d, c.split, c.seed);
        for (const auto& spec : specs) {
            auto rep = tm ? tm->at(tag, tag, spec.kind) : cross_validate(spec, d, plan);
            by_domain[tag].push_back(rep);
            evals.push_back({tag, std::move(rep)});
        }
    }

    StagedDirectory stage(c.out / "run");
    const fs::path dir = stage.path();
    write_text(dir / "eval.csv", eval_summary_csv(evals));
    write_text(dir / "eval_folds.csv", eval_folds_csv(evals));
    write_text(dir / "eval.json", eval_json(evals));
    write_text(dir / "importance_top3.csv", importance_top_csv(evals));

    if (tm) {
        write_text(dir / "transfer_matrix.csv", transfer_matrix_csv(*tm));
        write_text(dir / "transfer_matrix.json", transfer_json(*tm));
    }

    if (c.task == PredictionTask::GapSelection) {
        const std::pair<const char*, const char*> plots[] = {
            {"plot_gap_vs_missed.csv", "N_cb"}, {"plot_gap_vs_wait.csv", "T_w"}, {"plot_gap_vs_speed.csv", "V_p"}};
        for (const auto& [file, feature] : plots) {
            std::vector<std::string> blocks;
            for (const auto& d : domains)
                blocks.push_back(gap_plot_csv(d, by_domain.at(d.domains[0]), feature, std::string(feature) == "N_cb"));
            write_text(dir / file, join_csv(blocks));
        }
    } else if (c.task == PredictionTask::ZebraUsage) {
        std::vector<std::string> blocks;
        for (const auto& d : domains) blocks.push_back(accuracy_plot_csv(d, by_domain.at(d.domains[0])));
        write_text(dir / "plot_acc_vs_wait.csv", join_csv(blocks));
    }
    stage.commit();

    for (const auto& e : evals) {
        log << "run: " << e.domain << " " << e.report.label;
        for (const auto& [k, v] : e.report.mean) log << " " << k << "=" << fmt_num(v);
        log << "\n";
    }
}

// ---- transfer strategies -----------------------------------------------------------------

inline std::vector<StrategyReport> run_strategies(const ExperimentConfig& c, const std::vector<Dataset>& domains) {
    if (domains.size() != 2)
        throw InputError("transfer needs exactly two domains, found " + std::to_string(domains.size()));
    std::vector<StrategyReport> out;
    for (auto st : c.strategies)
        for (auto kind : c.model_list()) {
            StrategySpec s;
            s.strategy = st;
            s.n_clusters = c.n_clusters;
            s.per_cluster = c.per_cluster && c.task == PredictionTask::Trajectory;
            s.model = c.model_spec(kind);
            out.push_back(run_strategy(s, domains[0], domains[1], c.split, c.seed));
        }
    return out;
}

inline void cmd_transfer(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    const auto data = load_features(c);
    const auto domains = task_datasets(c, data.rows);
    const auto reps = run_strategies(c, domains);
    StagedDirectory stage(c.out / "transfer");
    write_text(stage.path() / "strategies.csv", strategy_csv(reps));
    write_text(stage.path() / "strategies.json", strategy_json(reps));
    stage.commit();
    for (const auto& r : reps) {
        log << "transfer: " << r.spec.label();
        for (const auto& [k, v] : r.average) log << " " << k << "=" << fmt_num(v);
        log << "\n";
    }
}

// ---- stats -------------------------------------------------------------------------------

/// Group key of a feature row: "country" (domain tag), "condition" (Alone/Risky/Safe, or
/// Zebra for zebra trials) or "scenario" (zebra vs no zebra).
inline std::string group_key(const FeatureRow& r, const std::string& grouping) {
    if (grouping == "country") return r.country_tag;
    if (grouping == "condition") return r.zebra_scenario ? "Zebra" : std::string(to_string(r.condition));
    if (grouping == "scenario") return r.zebra_scenario ? "zebra" : "no_zebra";
    throw InputError("unknown grouping '" + grouping + "' (expected country, condition or scenario)");
}

/// A per-trial value: a pre-event feature name, or accepted_gap (non-zebra trials only).
inline std::optional<double> row_value(const FeatureRow& r, const std::string& value) {
    if (value == "accepted_gap") return r.label_gap;
    const auto& names = PreEventFeatures::names;
    const auto it = std::find(names.begin(), names.end(), value);
    if (it == names.end()) throw InputError("unknown value column '" + value + "'");
    return r.pre.values()[static_cast<std::size_t>(it - names.begin())];
}

struct StatsEntry {
    std::string value;
    std::vector<std::string> groups;
    TestResult result;
};

/// U test for two groups, H test for more, Bonferroni over the requested values.
inline std::vector<StatsEntry> group_tests(const std::vector<FeatureRow>& rows, const CommandOptions& o) {
    if (o.values.empty()) throw InputError("stats: no --value given");
    std::vector<StatsEntry> out;
    for (const auto& value : o.values) {
        std::map<std::string, std::vector<double>> groups;
        for (const auto& r : rows) {
            if (!o.domain.empty() && r.country_tag != o.domain) continue;
            const std::string key = group_key(r, o.grouping);
            if (!o.groups.empty() && std::find(o.groups.begin(), o.groups.end(), key) == o.groups.end()) continue;
            if (const auto v = row_value(r, value)) groups[key].push_back(*v);
        }
        if (groups.size() < 2)
            throw InputError("stats: grouping '" + o.grouping + "' yields " + std::to_string(groups.size()) +
                             " group(s) for '" + value + "'; need at least 2");
        StatsEntry e;
        e.value = value;
        std::vector<std::vector<double>> g;
        for (auto& [k, v] : groups) {
            e.groups.push_back(k);
            g.push_back(std::move(v));
        }
        e.result = g.size() == 2 ? mann_whitney_u(g[0], g[1]) : kruskal_wallis_h(g);
        e.result = bonferroni(e.result, static_cast<int>(o.values.size()));
        out.push_back(std::move(e));
    }
    return out;
}

inline std::string stats_json(const std::vector<StatsEntry>& entries, const CommandOptions& o) {
    nlohmann::ordered_json j;
    j["kind"] = "stats";
    j["grouping"] = o.grouping;
    j["domain"] = o.domain;
    j["tests"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        auto t = test_result_json(e.result);
        t["value"] = e.value;
        t["groups"] = e.groups;
        j["tests"].push_back(std::move(t));
    }
    return j.dump(2) + "\n";
}

inline void write_text_atomic(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".partial";
    write_text(tmp, text);
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw RuntimeFailure("cannot move " + tmp.string() + " to " + p.string() + ": " + ec.message());
}

inline std::vector<StatsEntry> cmd_stats(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    const auto data = load_features(c);
    const auto entries = group_tests(data.rows, o);
    std::string name = "stats_" + o.grouping;
    if (!o.domain.empty()) name += "_" + o.domain;
    write_text_atomic(c.out / "stats" / (name + ".json"), stats_json(entries, o));
    for (const auto& e : entries)
        log << "stats: " << e.value << " by " << o.grouping << ": " << e.result.test << " = " << fmt_num(e.result.statistic)
            << ", p = " << fmt_num(e.result.p_value) << "\n";
    return entries;
}

// ---- report ------------------------------------------------------------------------------

namespace detail {

inline std::string md_metrics_table(const nlohmann::json& reports, const std::string& key_name, const char* key_field) {
    std::vector<std::string> cols;
    for (const auto& r : reports)
        for (const auto& [k, v] : r.at("mean").items())
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    std::vector<std::string> ordered;
    for (const auto& n : kMetricOrder)
        if (std::find(cols.begin(), cols.end(), n) != cols.end()) ordered.push_back(n);
    std::string s = "| " + key_name + " | model |";
    for (const auto& c : ordered) s += " " + c + " |";
    s += "\n|---|---|";
    for (std::size_t i = 0; i < ordered.size(); ++i) s += "---|";
    s += "\n";
    for (const auto& r : reports) {
        s += "| " + r.at(key_field).get<std::string>() + " | " + r.at("label").get<std::string>() + " |";
        for (const auto& c : ordered) {
            const auto& m = r.at("mean");
            s += " " + (m.contains(c) && !m.at(c).is_null() ? fmt_num(m.at(c).get<double>()) : std::string("")) + " |";
        }
        s += "\n";
    }
    return s;
}

inline nlohmann::json read_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(p.string() + ": " + e.what());
    }
}

}  // namespace detail

/// Collects the JSON reports under the output directory into summary.md.
inline fs::path cmd_report(const CommandOptions& o, std::ostream& log = std::cout) {
    const ExperimentConfig c = resolve_config(o);
    std::string md = "# Experiment summary\n\nseed: " + std::to_string(c.seed) + ", task: " +
                     std::string(to_string(c.task)) + ", split: " + std::string(to_string(c.split)) + "\n";
    bool any = false;
    try {
        if (const auto p = c.out / "run" / "eval.json"; fs::exists(p)) {
            any = true;
            md += "\n## Cross-validation\n\n" + detail::md_metrics_table(detail::read_json(p).at("reports"), "domain", "domain");
        }
        if (const auto p = c.out / "run" / "transfer_matrix.json"; fs::exists(p)) {
            any = true;
            auto cells = detail::read_json(p).at("cells");
            for (auto& x : cells) x["pair"] = x.at("train_domain").get<std::string>() + " -> " + x.at("test_domain").get<std::string>();
            md += "\n## Transfer matrix\n\n" + detail::md_metrics_table(cells, "train -> test", "pair");
        }
        if (const auto p = c.out / "transfer" / "strategies.json"; fs::exists(p)) {
            any = true;
            const auto doc = detail::read_json(p);
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : doc.at("reports"))
                {
                const auto label = r.at("label").get<std::string>();
                rows.push_back({{"strategy", label.substr(0, label.find('/'))}, {"label", r.at("model")}, {"mean", r.at("average")}});
            }
            md += "\n## Transfer strategies (domain average)\n\n" + detail::md_metrics_table(rows, "strategy", "strategy");
        }
        if (const auto dir = c.out / "stats"; fs::is_directory(dir)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dir))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (!files.empty()) {
                any = true;
                md += "\n## Group tests\n\n| file | value | groups | test | statistic | p (Bonferroni) |\n|---|---|---|---|---|---|\n";
                for (const auto& f : files) {
                    const auto doc = detail::read_json(f);
                    for (const auto& t : doc.at("tests")) {
                        std::string g;
                        for (const auto& x : t.at("groups")) g += (g.empty() ? "" : ", ") + x.get<std::string>();
                        md += "| " + f.filename().string() + " | " + t.at("value").get<std::string>() + " | " + g + " | " +
                              t.at("test").get<std::string>() + " | " + fmt_num(t.at("statistic").get<double>()) + " | " +
                              fmt_num(t.at("p_value").get<double>()) + " |\n";
                    }
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError("report: malformed report file: " + std::string(e.what()));
    }
    if (!any) throw InputError("report: no reports found under " + c.out.string() + " (run 'run', 'transfer' or 'stats' first)");
    const fs::path out = c.out / "summary.md";
    write_text_atomic(out, md);
    log << "report: wrote " << out.string() << "\n";
    return out;
}

}  // namespace pedx::io
