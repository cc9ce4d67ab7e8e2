#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"

namespace pedx {

enum class ModelKind { LinearRegression, LogisticRegression, LinearSVM, RandomForest, MLP };
enum class Task { Regression, Classification };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LinearRegression: return "LinearRegression";
        case ModelKind::LogisticRegression: return "LogisticRegression";
        case ModelKind::LinearSVM: return "LinearSVM";
        case ModelKind::RandomForest: return "RandomForest";
        case ModelKind::MLP: return "MLP";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "LinearRegression" || s == "Linear") return ModelKind::LinearRegression;
    if (s == "LogisticRegression" || s == "Logistic") return ModelKind::LogisticRegression;
    if (s == "LinearSVM" || s == "SVM") return ModelKind::LinearSVM;
    if (s == "RandomForest" || s == "RF") return ModelKind::RandomForest;
    if (s == "MLP" || s == "NN") return ModelKind::MLP;
    throw InputError("unknown model kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Task t) { return t == Task::Regression ? "Regression" : "Classification"; }

inline Task parse_task_kind(std::string_view s) {
    if (s == "Regression") return Task::Regression;
    if (s == "Classification") return Task::Classification;
    throw InputError("unknown task '" + std::string(s) + "'");
}

/// Mini-batch gradient descent with momentum. batch_size 0 means full batch.
struct GradientParams {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 500;
    int batch_size = 32;
    double l2 = 1e-4;
    double tol = 1e-6;  // early stop when the epoch loss changes by less than this
};

struct ForestParams {
    int n_trees = 100;
    int max_depth = 5;
    int min_samples_leaf = 1;
};

struct ModelSpec {
    ModelKind kind = ModelKind::LinearRegression;
    Task task = Task::Regression;
    GradientParams gd;
    ForestParams forest;
    std::vector<int> hidden{2, 4};
    double svm_c = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(forest.n_trees >= 1, "ModelSpec: n_trees must be >= 1");
        require(forest.max_depth >= 1, "ModelSpec: max_depth must be >= 1");
        require(forest.min_samples_leaf >= 1, "ModelSpec: min_samples_leaf must be >= 1");
        require(hidden.size() == 2 && hidden[0] > 0 && hidden[1] > 0, "ModelSpec: MLP needs two positive hidden sizes");
        require(gd.learning_rate > 0.0 && gd.epochs >= 1 && gd.batch_size >= 0 && gd.l2 >= 0.0,
                "ModelSpec: invalid gradient-descent parameters");
        require(svm_c > 0.0, "ModelSpec: svm_c must be positive");
        if (kind == ModelKind::LinearRegression)
            require(task == Task::Regression, "ModelSpec: LinearRegression is a regression model");
        if (kind == ModelKind::LogisticRegression || kind == ModelKind::LinearSVM)
            require(task == Task::Classification, "ModelSpec: " + std::string(to_string(kind)) + " is a classifier");
    }
};

/// Hidden layer sizes used per prediction problem.
inline const std::vector<int> kHiddenGapSelection{2, 4};
inline const std::vector<int> kHiddenZebraUsage{8, 4};
inline const std::vector<int> kHiddenTrajectory{8, 32};

inline ModelSpec make_spec(ModelKind kind, Task task, std::vector<int> hidden, std::uint64_t seed) {
    ModelSpec s;
    s.kind = kind;
    s.task = task;
    s.hidden = std::move(hidden);
    s.seed = seed;
    return s;
}

}  // namespace pedx
