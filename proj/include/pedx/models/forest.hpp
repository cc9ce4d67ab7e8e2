#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "pedx/core/matrix.hpp"
#include "pedx/core/parallel.hpp"
#include "pedx/core/rng.hpp"
#include "pedx/models/spec.hpp"

namespace pedx {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    std::vector<double> value;  // regression: per-output mean; classification: P(class 1)
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf(std::span<const double> x) const {
        const TreeNode* n = &nodes.front();
        while (n->feature >= 0) n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
        return *n;
    }

    /// Number of splits on the longest root-to-leaf path.
    int depth() const {
        int d = 0;
        for (const auto& n : nodes)
            if (n.feature < 0) d = std::max(d, n.depth);
        return d;
    }
};

struct ForestModel {
    Task task = Task::Regression;
    std::size_t input_dim = 0;
    std::size_t output_dim = 1;
    std::vector<DecisionTree> trees;
    std::vector<double> impurity_importance;  // normalized to sum 1 (all zero if no split was made)

    /// Regression: mean of tree outputs. Classification: fraction of trees voting class 1.
    Matrix predict(const Matrix& X) const {
        Matrix out(X.rows(), output_dim);
        const double inv = 1.0 / static_cast<double>(trees.size());
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const auto x = X.row(i);
            for (const auto& t : trees) {
                const auto& v = t.leaf(x).value;
                if (task == Task::Classification)
                    out(i, 0) += v[0] >= 0.5 ? 1.0 : 0.0;
                else
                    for (std::size_t o = 0; o < output_dim; ++o) out(i, o) += v[o];
            }
            for (std::size_t o = 0; o < output_dim; ++o) out(i, o) *= inv;
        }
        return out;
    }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const Matrix& Y, Task task, const ForestParams& params, std::size_t mtry, Rng& rng)
        : X_(X), Y_(Y), task_(task), params_(params), mtry_(mtry), rng_(rng), gain_(X.cols(), 0.0) {}

    DecisionTree build(std::vector<std::size_t> sample) {
        DecisionTree tree;
        grow(tree, std::move(sample), 0);
        return tree;
    }

    const std::vector<double>& gains() const { return gain_; }

private:
    struct Stats {
        double n = 0.0;
        std::vector<double> sum, sumsq;
    };

    Stats stats_of(std::span<const std::size_t> idx) const {
        Stats s;
        s.sum.assign(Y_.cols(), 0.0);
        s.sumsq.assign(Y_.cols(), 0.0);
        for (std::size_t i : idx) add(s, i, +1.0);
        return s;
    }

    void add(Stats& s, std::size_t i, double sign) const {
        s.n += sign;
        for (std::size_t o = 0; o < Y_.cols(); ++o) {
            s.sum[o] += sign * Y_(i, o);
            s.sumsq[o] += sign * Y_(i, o) * Y_(i, o);
        }
    }

    /// Node impurity times node size: SSE summed over outputs, or n * Gini.
    double weighted_impurity(const Stats& s) const {
        if (s.n <= 0.0) return 0.0;
        if (task_ == Task::Classification) {
            const double p = s.sum[0] / s.n;
            return s.n * 2.0 * p * (1.0 - p);
        }
        double sse = 0.0;
        for (std::size_t o = 0; o < s.sum.size(); ++o) sse += std::max(0.0, s.sumsq[o] - s.sum[o] * s.sum[o] / s.n);
        return sse;
    }

    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> f(X_.cols());
        std::iota(f.begin(), f.end(), std::size_t{0});
        if (mtry_ < f.size()) {
            shuffle_in_place(f, rng_);
            f.resize(mtry_);
        }
        std::sort(f.begin(), f.end());
        return f;
    }

    int grow(DecisionTree& tree, std::vector<std::size_t> idx, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const Stats parent = stats_of(idx);
        {
            auto& node = tree.nodes.back();
            node.depth = depth;
            node.value.resize(Y_.cols());
            for (std::size_t o = 0; o < Y_.cols(); ++o) node.value[o] = parent.sum[o] / parent.n;
        }
        const double parent_imp = weighted_impurity(parent);
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (depth >= params_.max_depth || idx.size() < 2 * min_leaf || parent_imp <= 1e-12) return id;

        int best_f = -1;
        double best_gain = 1e-12, best_thr = 0.0;
        std::vector<std::size_t> order(idx);
        for (std::size_t f : candidate_features()) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return X_(a, f) < X_(b, f); });
            Stats left;
            left.sum.assign(Y_.cols(), 0.0);
            left.sumsq.assign(Y_.cols(), 0.0);
            Stats right = parent;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                add(left, order[k], +1.0);
                add(right, order[k], -1.0);
                const double xa = X_(order[k], f), xb = X_(order[k + 1], f);
                if (xa == xb || k + 1 < min_leaf || order.size() - (k + 1) < min_leaf) continue;
                const double gain = parent_imp - weighted_impurity(left) - weighted_impurity(right);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    const double mid = 0.5 * (xa + xb);
                    best_thr = mid < xb ? mid : xa;
                }
            }
        }
        if (best_f < 0) return id;

        gain_[static_cast<std::size_t>(best_f)] += best_gain;
        std::vector<std::size_t> li, ri;
        for (std::size_t i : idx) (X_(i, static_cast<std::size_t>(best_f)) <= best_thr ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        tree.nodes[static_cast<std::size_t>(id)].feature = best_f;
        tree.nodes[static_cast<std::size_t>(id)].threshold = best_thr;
        const int l = grow(tree, std::move(li), depth + 1);
        const int r = grow(tree, std::move(ri), depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    const Matrix& X_;
    const Matrix& Y_;
    Task task_;
    ForestParams params_;
    std::size_t mtry_;
    Rng& rng_;
    std::vector<double> gain_;
};

}  // namespace detail

/// Bagged CART ensemble. Tree t draws its bootstrap sample and feature subsets from
/// stream (seed, t), so the fit does not depend on how trees are scheduled.
inline ForestModel fit_forest(const Matrix& X, const Matrix& Y, Task task, const ForestParams& params,
                              std::uint64_t seed) {
    const std::size_t n = X.rows(), d = X.cols();
    ForestModel f;
    f.task = task;
    f.input_dim = d;
    f.output_dim = task == Task::Classification ? 1 : Y.cols();
    const std::size_t mtry = task == Task::Classification
                                 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))))
                                 : std::max<std::size_t>(1, d / 3);
    const auto n_trees = static_cast<std::size_t>(params.n_trees);
    f.trees.resize(n_trees);
    std::vector<std::vector<double>> gains(n_trees);
    parallel_for(n_trees, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = static_cast<std::size_t>(rng() % n);
        detail::TreeBuilder builder(X, Y, task, params, mtry, rng);
        f.trees[t] = builder.build(std::move(sample));
        gains[t] = builder.gains();
    });
    f.impurity_importance.assign(d, 0.0);
    for (const auto& g : gains)
        for (std::size_t j = 0; j < d; ++j) f.impurity_importance[j] += g[j];
    const double total = std::accumulate(f.impurity_importance.begin(), f.impurity_importance.end(), 0.0);
    if (total > 0.0)
        for (auto& v : f.impurity_importance) v /= total;
    return f;
}

}  // namespace pedx
