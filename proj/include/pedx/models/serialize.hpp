#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pedx/core/error.hpp"
#include "pedx/models/model.hpp"

namespace pedx {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline json spec_to_json(const ModelSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"task", to_string(s.task)},
            {"learning_rate", s.gd.learning_rate},
            {"momentum", s.gd.momentum},
            {"epochs", s.gd.epochs},
            {"batch_size", s.gd.batch_size},
            {"l2", s.gd.l2},
            {"tol", s.gd.tol},
            {"n_trees", s.forest.n_trees},
            {"max_depth", s.forest.max_depth},
            {"min_samples_leaf", s.forest.min_samples_leaf},
            {"hidden", s.hidden},
            {"svm_c", s.svm_c},
            {"seed", s.seed}};
}

inline ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.task = parse_task_kind(j.at("task").get<std::string>());
    s.gd.learning_rate = j.at("learning_rate").get<double>();
    s.gd.momentum = j.at("momentum").get<double>();
    s.gd.epochs = j.at("epochs").get<int>();
    s.gd.batch_size = j.at("batch_size").get<int>();
    s.gd.l2 = j.at("l2").get<double>();
    s.gd.tol = j.at("tol").get<double>();
    s.forest.n_trees = j.at("n_trees").get<int>();
    s.forest.max_depth = j.at("max_depth").get<int>();
    s.forest.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.svm_c = j.at("svm_c").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

inline json params_to_json(const TrainedModel& m) {
    if (const auto* p = std::get_if<LinearParams>(&m.params))
        return {{"coef", p->coef}, {"intercept", p->intercept}, {"ridge_jitter_applied", p->ridge_jitter_applied}};
    if (const auto* p = std::get_if<LinearClassifier>(&m.params)) return {{"w", p->w}, {"b", p->b}};
    if (const auto* p = std::get_if<ForestModel>(&m.params)) {
        json trees = json::array();
        for (const auto& t : p->trees) {
            std::vector<int> feature, left, right, depth;
            std::vector<double> threshold, value;
            for (const auto& n : t.nodes) {
                feature.push_back(n.feature);
                left.push_back(n.left);
                right.push_back(n.right);
                depth.push_back(n.depth);
                threshold.push_back(n.threshold);
                value.insert(value.end(), n.value.begin(), n.value.end());
            }
            trees.push_back({{"feature", feature},
                             {"threshold", threshold},
                             {"left", left},
                             {"right", right},
                             {"depth", depth},
                             {"value", value}});
        }
        return {{"trees", trees}, {"impurity_importance", p->impurity_importance}};
    }
    const auto& p = std::get<MlpModel>(m.params);
    return {{"h1", p.net.shape.h1}, {"h2", p.net.shape.h2}, {"theta", p.net.theta}, {"y_mean", p.y_mean},
            {"y_sd", p.y_sd}};
}

}  // namespace detail

/// Versioned JSON document: spec, dimensions, column names, flat parameter arrays. Doubles
/// are written with round-trip precision so a reloaded model predicts bit-identically.
inline nlohmann::json model_to_json(const TrainedModel& m) {
    nlohmann::json imp = nlohmann::json::array();
    for (const auto& [name, score] : m.importance) imp.push_back({name, score});
    return {{"format", "pedx-model"},
            {"version", kModelFormatVersion},
            {"spec", detail::spec_to_json(m.spec)},
            {"input_dim", m.input_dim},
            {"output_dim", m.output_dim},
            {"columns", m.column_names},
            {"params", detail::params_to_json(m)},
            {"loss_history", m.loss_history},
            {"importance", imp}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        require(j.at("format").get<std::string>() == "pedx-model", "model JSON: wrong format tag");
        const int version = j.at("version").get<int>();
        require(version == kModelFormatVersion, "model JSON: unsupported version " + std::to_string(version));
        TrainedModel m;
        m.spec = detail::spec_from_json(j.at("spec"));
        m.input_dim = j.at("input_dim").get<std::size_t>();
        m.output_dim = j.at("output_dim").get<std::size_t>();
        m.column_names = j.at("columns").get<std::vector<std::string>>();
        m.loss_history = j.at("loss_history").get<std::vector<double>>();
        for (const auto& e : j.at("importance")) m.importance.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
        const auto& p = j.at("params");
        switch (m.spec.kind) {
            case ModelKind::LinearRegression: {
                LinearParams lp;
                lp.input_dim = m.input_dim;
                lp.output_dim = m.output_dim;
                lp.coef = p.at("coef").get<std::vector<double>>();
                lp.intercept = p.at("intercept").get<std::vector<double>>();
                lp.ridge_jitter_applied = p.at("ridge_jitter_applied").get<bool>();
                require(lp.coef.size() == lp.input_dim * lp.output_dim && lp.intercept.size() == lp.output_dim,
                        "model JSON: linear parameter size mismatch");
                m.params = std::move(lp);
                break;
            }
            case ModelKind::LogisticRegression:
            case ModelKind::LinearSVM: {
                LinearClassifier lc;
                lc.w = p.at("w").get<std::vector<double>>();
                lc.b = p.at("b").get<double>();
                require(lc.w.size() == m.input_dim, "model JSON: classifier weight size mismatch");
                m.params = std::move(lc);
                break;
            }
            case ModelKind::RandomForest: {
                ForestModel f;
                f.task = m.spec.task;
                f.input_dim = m.input_dim;
                f.output_dim = m.output_dim;
                f.impurity_importance = p.at("impurity_importance").get<std::vector<double>>();
                const std::size_t o = f.output_dim;
                for (const auto& jt : p.at("trees")) {
                    const auto feature = jt.at("feature").get<std::vector<int>>();
                    const auto left = jt.at("left").get<std::vector<int>>();
                    const auto right = jt.at("right").get<std::vector<int>>();
                    const auto depth = jt.at("depth").get<std::vector<int>>();
                    const auto threshold = jt.at("threshold").get<std::vector<double>>();
                    const auto value = jt.at("value").get<std::vector<double>>();
                    const std::size_t nn = feature.size();
                    require(nn >= 1 && left.size() == nn && right.size() == nn && depth.size() == nn &&
                                threshold.size() == nn && value.size() == nn * o,
                            "model JSON: tree array size mismatch");
                    DecisionTree t;
                    for (std::size_t k = 0; k < nn; ++k) {
                        TreeNode node{feature[k], threshold[k], left[k], right[k], depth[k],
                                      std::vector<double>(value.begin() + static_cast<std::ptrdiff_t>(k * o),
                                                          value.begin() + static_cast<std::ptrdiff_t>((k + 1) * o))};
                        if (node.feature >= 0)
                            require(static_cast<std::size_t>(node.feature) < m.input_dim && node.left > 0 &&
                                        static_cast<std::size_t>(node.left) < nn && node.right > 0 &&
                                        static_cast<std::size_t>(node.right) < nn,
                                    "model JSON: tree node out of range");
                        t.nodes.push_back(std::move(node));
                    }
                    f.trees.push_back(std::move(t));
                }
                m.params = std::move(f);
                break;
            }
            case ModelKind::MLP: {
                MlpModel mm;
                mm.net.shape = {m.input_dim, p.at("h1").get<std::size_t>(), p.at("h2").get<std::size_t>(), m.output_dim};
                mm.net.task = m.spec.task;
                mm.net.theta = p.at("theta").get<std::vector<double>>();
                mm.y_mean = p.at("y_mean").get<std::vector<double>>();
                mm.y_sd = p.at("y_sd").get<std::vector<double>>();
                require(mm.net.theta.size() == mm.net.shape.param_count(), "model JSON: MLP parameter count mismatch");
                m.params = std::move(mm);
                break;
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace pedx
