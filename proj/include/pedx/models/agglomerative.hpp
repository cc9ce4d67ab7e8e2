#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/matrix.hpp"

namespace pedx {

enum class Linkage { Ward, Average, Complete };

inline std::string_view to_string(Linkage l) {
    switch (l) {
        case Linkage::Ward: return "Ward";
        case Linkage::Average: return "Average";
        case Linkage::Complete: return "Complete";
    }
    return "?";
}

inline Linkage parse_linkage(std::string_view s) {
    if (s == "Ward" || s == "ward") return Linkage::Ward;
    if (s == "Average" || s == "average") return Linkage::Average;
    if (s == "Complete" || s == "complete") return Linkage::Complete;
    throw InputError("unknown linkage '" + std::string(s) + "'");
}

/// One merge of the dendrogram. Each side is named by one of its member rows.
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0.0;
};

struct Clustering {
    std::size_t n_clusters = 0;
    Linkage linkage = Linkage::Ward;
    std::vector<int> labels;  // per training row; cluster ids follow first appearance in row order
    Matrix centroids;         // n_clusters x d
    std::vector<Merge> merges;  // ascending height, all n - 1 merges of the full tree
};

namespace detail {

class CondensedDistances {
public:
    explicit CondensedDistances(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
    double& at(std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return d_[n_ * i - i * (i + 1) / 2 + (j - i - 1)];
    }

private:
    std::size_t n_;
    std::vector<double> d_;
};

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace detail

/// Bottom-up clustering via the nearest-neighbour chain. Ward heights follow the usual
/// convention sqrt(2 |A||B| / (|A|+|B|)) * |c_A - c_B|, maintained with Lance-Williams
/// updates on squared distances.
inline Clustering agglomerative(const Matrix& X, std::size_t n_clusters, Linkage linkage = Linkage::Ward) {
    const std::size_t n = X.rows(), d = X.cols();
    require(n_clusters >= 1, "agglomerative: n_clusters must be >= 1");
    require(n_clusters <= n, "agglomerative: n_clusters (" + std::to_string(n_clusters) + ") exceeds row count (" +
                                 std::to_string(n) + ")");
    Clustering c;
    c.n_clusters = n_clusters;
    c.linkage = linkage;

    if (n > 1) {
        const bool ward = linkage == Linkage::Ward;
        detail::CondensedDistances D(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) s += (X(i, k) - X(j, k)) * (X(i, k) - X(j, k));
                D.at(i, j) = ward ? s : std::sqrt(s);
            }
        std::vector<double> size(n, 1.0);
        std::vector<char> active(n, 1);
        std::vector<std::size_t> chain;
        chain.reserve(n);
        for (std::size_t step = 0; step + 1 < n; ++step) {
            if (chain.empty())
                for (std::size_t i = 0; i < n; ++i)
                    if (active[i]) {
                        chain.push_back(i);
                        break;
                    }
            std::size_t a = 0, b = 0;
            for (;;) {
                a = chain.back();
                const std::size_t prev = chain.size() > 1 ? chain[chain.size() - 2] : n;
                double best = prev < n ? D.at(a, prev) : std::numeric_limits<double>::infinity();
                b = prev;
                for (std::size_t i = 0; i < n; ++i) {
                    if (!active[i] || i == a) continue;
                    const double v = D.at(a, i);
                    if (v < best) {
                        best = v;
                        b = i;
                    }
                }
                if (b == prev) break;
                chain.push_back(b);
            }
            chain.pop_back();
            chain.pop_back();
            const double h = D.at(a, b);
            const std::size_t keep = std::min(a, b), gone = std::max(a, b);
            c.merges.push_back({keep, gone, ward ? std::sqrt(h) : h});
            const double na = size[a], nb = size[b];
            for (std::size_t k = 0; k < n; ++k) {
                if (!active[k] || k == a || k == b) continue;
                const double da = D.at(a, k), db = D.at(b, k);
                double v = 0.0;
                switch (linkage) {
                    case Linkage::Ward: {
                        const double nk = size[k];
                        v = ((na + nk) * da + (nb + nk) * db - nk * h) / (na + nb + nk);
                        break;
                    }
                    case Linkage::Average: v = (na * da + nb * db) / (na + nb); break;
                    case Linkage::Complete: v = std::max(da, db); break;
                }
                D.at(keep, k) = v;
            }
            active[gone] = 0;
            size[keep] = na + nb;
        }
        std::stable_sort(c.merges.begin(), c.merges.end(),
                         [](const Merge& x, const Merge& y) { return x.height < y.height; });
    }

    detail::UnionFind uf(n);
    for (std::size_t m = 0; m + n_clusters < n; ++m) uf.unite(c.merges[m].a, c.merges[m].b);
    c.labels.assign(n, -1);
    std::vector<int> id_of_root(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = uf.find(i);
        if (id_of_root[r] < 0) id_of_root[r] = next++;
        c.labels[i] = id_of_root[r];
    }
    c.centroids = Matrix(n_clusters, d);
    std::vector<double> count(n_clusters, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(c.labels[i]);
        count[l] += 1.0;
        for (std::size_t k = 0; k < d; ++k) c.centroids(l, k) += X(i, k);
    }
    for (std::size_t l = 0; l < n_clusters; ++l)
        for (std::size_t k = 0; k < d; ++k) c.centroids(l, k) /= count[l];
    return c;
}

/// Nearest centroid; ties go to the lower cluster id.
inline int assign(const Clustering& c, std::span<const double> x) {
    require(x.size() == c.centroids.cols(), "assign: dimension mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < c.n_clusters; ++l) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - c.centroids(l, k)) * (x[k] - c.centroids(l, k));
        if (s < best_d) {
            best_d = s;
            best = static_cast<int>(l);
        }
    }
    return best;
}

}  // namespace pedx
