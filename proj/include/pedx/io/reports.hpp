#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pedx/core/error.hpp"
#include "pedx/eval/cross_validate.hpp"
#include "pedx/eval/dataset.hpp"
#include "pedx/eval/stats.hpp"
#include "pedx/io/csv.hpp"
#include "pedx/io/dataset_io.hpp"
#include "pedx/transfer/transfer.hpp"

namespace pedx::io {

/// One cross-validation run: the domain it was evaluated on plus the report.
struct DomainEval {
    std::string domain;
    EvalReport report;
};

namespace detail {

/// Metric names present in any of the given metric lists, in canonical order.
inline std::vector<std::string> metric_columns(const std::vector<const Metrics*>& lists) {
    std::set<std::string> seen;
    for (const auto* l : lists)
        for (const auto& [k, v] : *l) seen.insert(k);
    std::vector<std::string> out;
    for (const auto& n : kMetricOrder)
        if (seen.count(n)) out.push_back(n);
    return out;
}

inline void metric_cells(CsvWriter& w, const Metrics& m, const std::vector<std::string>& cols) {
    for (const auto& c : cols) {
        const auto it = std::find_if(m.begin(), m.end(), [&](const auto& kv) { return kv.first == c; });
        it == m.end() ? w.cell("") : w.cell(it->second);
    }
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j[k] = json_num(v);
    return j;
}

inline nlohmann::ordered_json importance_json(const Importance& imp) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& [name, score] : imp) j.push_back({{"feature", name}, {"score", json_num(score)}});
    return j;
}

}  // namespace detail

/// Mean metrics, one row per (domain, model).
inline std::string eval_summary_csv(const std::vector<DomainEval>& evals) {
    std::vector<const Metrics*> lists;
    for (const auto& e : evals) lists.push_back(&e.report.mean);
    const auto cols = detail::metric_columns(lists);
    std::vector<std::string> header{"domain", "model", "task", "split"};
    header.insert(header.end(), cols.begin(), cols.end());
    CsvWriter w(header);
    for (const auto& e : evals) {
        w.cell(e.domain).cell(e.report.label).cell(std::string(to_string(e.report.task)))
            .cell(std::string(to_string(e.report.mode)));
        detail::metric_cells(w, e.report.mean, cols);
        w.end_row();
    }
    return w.str();
}

/// Per-fold metrics, for dispersion diagnostics.
inline std::string eval_folds_csv(const std::vector<DomainEval>& evals) {
    std::vector<const Metrics*> lists;
    for (const auto& e : evals)
        for (const auto& f : e.report.folds) lists.push_back(&f.metrics);
    const auto cols = detail::metric_columns(lists);
    std::vector<std::string> header{"domain", "model", "fold", "n_train", "n_test"};
    header.insert(header.end(), cols.begin(), cols.end());
    CsvWriter w(header);
    for (const auto& e : evals)
        for (const auto& f : e.report.folds) {
            w.cell(e.domain).cell(e.report.label).cell(f.fold).cell(f.n_train).cell(f.n_test);
            detail::metric_cells(w, f.metrics, cols);
            w.end_row();
        }
    return w.str();
}

inline nlohmann::ordered_json eval_report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["task"] = std::string(to_string(r.task));
    j["split"] = std::string(to_string(r.mode));
    j["mean"] = detail::metrics_json(r.mean);
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : r.folds)
        j["folds"].push_back({{"fold", f.fold}, {"n_train", f.n_train}, {"n_test", f.n_test},
                              {"metrics", detail::metrics_json(f.metrics)}});
    j["importance"] = detail::importance_json(r.importance);
    return j;
}

inline std::string eval_json(const std::vector<DomainEval>& evals) {
    nlohmann::ordered_json j;
    j["kind"] = "evaluation";
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& e : evals) {
        auto r = eval_report_json(e.report);
        r["domain"] = e.domain;
        j["reports"].push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

/// Top-ranked features per model (rows) and domain (column groups).
inline std::string importance_top_csv(const std::vector<DomainEval>& evals, std::size_t top = 3) {
    std::vector<std::string> domains, models;
    for (const auto& e : evals) {
        if (std::find(domains.begin(), domains.end(), e.domain) == domains.end()) domains.push_back(e.domain);
        if (std::find(models.begin(), models.end(), e.report.label) == models.end()) models.push_back(e.report.label);
    }
    std::vector<std::string> header{"model"};
    for (const auto& d : domains)
        for (std::size_t r = 1; r <= top; ++r) header.push_back(d + "_" + std::to_string(r));
    CsvWriter w(header);
    for (const auto& m : models) {
        w.cell(m);
        for (const auto& d : domains) {
            const EvalReport* rep = nullptr;
            for (const auto& e : evals)
                if (e.domain == d && e.report.label == m) rep = &e.report;
            for (std::size_t r = 0; r < top; ++r)
                rep && r < rep->importance.size() ? w.cell(rep->importance[r].first) : w.cell("");
        }
        w.end_row();
    }
    return w.str();
}

/// Rows = model and training domain, columns = test domain x metric.
inline std::string transfer_matrix_csv(const TransferMatrix& tm) {
    std::vector<std::string> tests;
    std::vector<const Metrics*> lists;
    for (const auto& c : tm.cells) {
        if (std::find(tests.begin(), tests.end(), c.test_domain) == tests.end()) tests.push_back(c.test_domain);
        lists.push_back(&c.report.mean);
    }
    const auto cols = detail::metric_columns(lists);
    std::vector<std::string> header{"model", "train_domain"};
    for (const auto& t : tests)
        for (const auto& c : cols) header.push_back(t + "_" + c);
    CsvWriter w(header);
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& c : tm.cells) {
        std::pair<std::string, std::string> k{std::string(to_string(c.kind)), c.train_domain};
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    for (const auto& [model, train] : keys) {
        w.cell(model).cell(train);
        for (const auto& t : tests) {
            const TransferCell* cell = nullptr;
            for (const auto& c : tm.cells)
                if (std::string(to_string(c.kind)) == model && c.train_domain == train && c.test_domain == t) cell = &c;
            if (cell) detail::metric_cells(w, cell->report.mean, cols);
            else
                for (std::size_t i = 0; i < cols.size(); ++i) w.cell("");
        }
        w.end_row();
    }
    return w.str();
}

inline std::string transfer_json(const TransferMatrix& tm) {
    nlohmann::ordered_json j;
    j["kind"] = "transfer_matrix";
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : tm.cells) {
        auto r = eval_report_json(c.report);
        r["train_domain"] = c.train_domain;
        r["test_domain"] = c.test_domain;
        j["cells"].push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

/// Rows = strategy, columns = domain x metric, then the domain average.
inline std::string strategy_csv(const std::vector<StrategyReport>& reps) {
    std::vector<std::string> domains;
    std::vector<const Metrics*> lists;
    for (const auto& r : reps)
        for (const auto& [d, e] : r.per_domain) {
            if (std::find(domains.begin(), domains.end(), d) == domains.end()) domains.push_back(d);
            lists.push_back(&e.mean);
        }
    const auto cols = detail::metric_columns(lists);
    std::vector<std::string> header{"strategy", "model"};
    for (const auto& d : domains)
        for (const auto& c : cols) header.push_back(d + "_" + c);
    for (const auto& c : cols) header.push_back("AVG_" + c);
    CsvWriter w(header);
    for (const auto& r : reps) {
        const std::string label = r.spec.label();
        const std::string name = label.substr(0, label.find('/'));
        w.cell(name).cell(std::string(to_string(r.spec.model.kind)));
        for (const auto& d : domains) {
            const EvalReport* e = nullptr;
            for (const auto& [dd, ee] : r.per_domain)
                if (dd == d) e = &ee;
            if (e) detail::metric_cells(w, e->mean, cols);
            else
                for (std::size_t i = 0; i < cols.size(); ++i) w.cell("");
        }
        detail::metric_cells(w, r.average, cols);
        w.end_row();
    }
    return w.str();
}

inline std::string strategy_json(const std::vector<StrategyReport>& reps) {
    nlohmann::ordered_json j;
    j["kind"] = "strategies";
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : reps) {
        nlohmann::ordered_json s;
        s["strategy"] = std::string(to_string(r.spec.strategy));
        s["model"] = std::string(to_string(r.spec.model.kind));
        s["label"] = r.spec.label();
        s["n_clusters"] = r.spec.n_clusters;
        s["average"] = detail::metrics_json(r.average);
        s["per_domain"] = nlohmann::ordered_json::array();
        for (const auto& [d, e] : r.per_domain) {
            auto x = eval_report_json(e);
            x["domain"] = d;
            s["per_domain"].push_back(std::move(x));
        }
        j["reports"].push_back(std::move(s));
    }
    return j.dump(2) + "\n";
}

inline nlohmann::ordered_json test_result_json(const TestResult& r) {
    nlohmann::ordered_json j;
    j["test"] = r.test;
    j["statistic"] = json_num(r.statistic);
    j["p_value"] = json_num(r.p_value);
    j["p_raw"] = json_num(r.p_raw);
    j["group_sizes"] = r.group_sizes;
    j["exact"] = r.exact;
    j["bonferroni_k"] = r.bonferroni_k;
    return j;
}

// ---- plot data ----------------------------------------------------------------------

/// Bin index per value: `n_bins` bins holding (nearly) equal numbers of rows, ties kept
/// together. Returns the bin of every input row.
inline std::vector<int> quantile_bins(const std::vector<double>& v, std::size_t n_bins) {
    require(n_bins >= 1, "quantile_bins: need at least one bin");
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<int> bin(v.size(), 0);
    for (std::size_t r = 0; r < order.size(); ++r) {
        int b = static_cast<int>(r * n_bins / order.size());
        if (r > 0 && v[order[r]] == v[order[r - 1]]) b = bin[order[r - 1]];
        bin[order[r]] = b;
    }
    return bin;
}

struct BinStat {
    int bin = 0;
    double lo = 0.0, hi = 0.0;
    std::size_t n = 0;
    std::vector<double> means;  // one per series
};

/// Per-bin count, value range and mean of each series.
inline std::vector<BinStat> bin_means(const std::vector<double>& x, const std::vector<int>& bin,
                                      const std::vector<std::vector<double>>& series) {
    std::map<int, BinStat> acc;
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto& b = acc[bin[i]];
        if (b.n == 0) {
            b.bin = bin[i];
            b.lo = b.hi = x[i];
            b.means.assign(series.size(), 0.0);
        }
        b.lo = std::min(b.lo, x[i]);
        b.hi = std::max(b.hi, x[i]);
        ++b.n;
        for (std::size_t s = 0; s < series.size(); ++s) b.means[s] += series[s][i];
    }
    std::vector<BinStat> out;
    for (auto& [k, b] : acc) {
        for (auto& m : b.means) m /= static_cast<double>(b.n);
        out.push_back(b);
    }
    return out;
}

inline std::string bins_csv(const std::string& domain, const std::vector<BinStat>& bins,
                            const std::vector<std::string>& series_names) {
    std::vector<std::string> header{"domain", "bin", "x_lo", "x_hi", "n"};
    header.insert(header.end(), series_names.begin(), series_names.end());
    CsvWriter w(header);
    for (const auto& b : bins) {
        w.cell(domain).cell(b.bin).cell(b.lo).cell(b.hi).cell(b.n);
        for (double m : b.means) w.cell(m);
        w.end_row();
    }
    return w.str();
}

inline constexpr std::size_t kPlotBins = 5;
inline constexpr int kMissedCountCap = 8;  // counts at or above go into the last bin

inline std::vector<double> column_of(const Dataset& d, const std::string& name) {
    const auto it = std::find(d.names.begin(), d.names.end(), name);
    require(it != d.names.end(), "dataset has no column '" + name + "'");
    const auto j = static_cast<std::size_t>(it - d.names.begin());
    std::vector<double> out(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) out[i] = d.X(i, j);
    return out;
}

/// Binned mean accepted gap (observed and out-of-fold predicted per model) against one
/// feature. Integer binning for counts, quantile bins otherwise.
inline std::string gap_plot_csv(const Dataset& d, const std::vector<EvalReport>& reports, const std::string& feature,
                                bool integer_bins) {
    const auto x = column_of(d, feature);
    std::vector<int> bin(x.size());
    if (integer_bins)
        for (std::size_t i = 0; i < x.size(); ++i) bin[i] = std::min(static_cast<int>(std::lround(x[i])), kMissedCountCap);
    else bin = quantile_bins(x, kPlotBins);
    std::vector<std::vector<double>> series{std::vector<double>(d.rows())};
    std::vector<std::string> names{"mean_gap_observed"};
    for (std::size_t i = 0; i < d.rows(); ++i) series[0][i] = d.Y(i, 0);
    for (const auto& r : reports) {
        require(r.predictions.rows() == d.rows(), "gap_plot_csv: report does not match dataset");
        std::vector<double> p(d.rows());
        for (std::size_t i = 0; i < d.rows(); ++i) p[i] = r.predictions(i, 0);
        series.push_back(std::move(p));
        names.push_back("mean_gap_" + r.label);
    }
    return bins_csv(d.domains.empty() ? "" : d.domains[0], bin_means(x, bin, series), names);
}

/// Binned out-of-fold accuracy (percent) against waiting time, one column per model.
inline std::string accuracy_plot_csv(const Dataset& d, const std::vector<EvalReport>& reports) {
    const auto x = column_of(d, "T_w");
    const auto bin = quantile_bins(x, kPlotBins);
    std::vector<std::vector<double>> series;
    std::vector<std::string> names;
    for (const auto& r : reports) {
        require(r.predictions.rows() == d.rows(), "accuracy_plot_csv: report does not match dataset");
        std::vector<double> hit(d.rows());
        for (std::size_t i = 0; i < d.rows(); ++i)
            hit[i] = ((r.predictions(i, 0) >= 0.5) == (d.Y(i, 0) > 0.5)) ? 100.0 : 0.0;
        series.push_back(std::move(hit));
        names.push_back("acc_" + r.label);
    }
    return bins_csv(d.domains.empty() ? "" : d.domains[0], bin_means(x, bin, series), names);
}

/// Concatenates per-domain CSV blocks that share a header.
inline std::string join_csv(const std::vector<std::string>& blocks) {
    std::string out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b == 0) {
            out += blocks[b];
            continue;
        }
        const auto nl = blocks[b].find('\n');
        if (nl != std::string::npos) out += blocks[b].substr(nl + 1);
    }
    return out;
}

}  // namespace pedx::io
