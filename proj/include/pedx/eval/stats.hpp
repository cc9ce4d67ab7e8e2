#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "pedx/core/error.hpp"

namespace pedx {

enum class Alternative { TwoSided, Less, Greater };

struct TestResult {
    std::string test;  // "MannWhitneyU" or "KruskalWallisH"
    double statistic = 0.0;
    double p_value = 1.0;
    double p_raw = 1.0;  // before correction
    std::vector<std::size_t> group_sizes;
    bool exact = false;
    int bonferroni_k = 0;  // 0: no correction
};

/// Bonferroni adjustment for k comparisons: p = min(1, k * p_raw).
inline TestResult bonferroni(TestResult r, int k) {
    require(k >= 1, "bonferroni: k must be >= 1");
    r.bonferroni_k = k;
    r.p_value = std::min(1.0, static_cast<double>(k) * r.p_raw);
    return r;
}

namespace detail {

/// Midranks (1-based) of the pooled values, plus the tie term sum(t^3 - t).
inline std::vector<double> midranks(std::span<const double> v, double& tie_term) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return r;
}

inline void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) require(std::isfinite(x), std::string(what) + ": non-finite value");
}

}  // namespace detail

inline constexpr std::size_t kExactMaxGroupSize = 8;

/// Mann-Whitney U test. The statistic is U of sample a (pairs with a > b, ties counting one
/// half). Less means a tends to be smaller than b. Exact permutation distribution over the
/// pooled midranks when both samples have at most 8 values; otherwise the tie-corrected
/// normal approximation with continuity correction.
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alt = Alternative::TwoSided) {
    require(!a.empty() && !b.empty(), "mann_whitney_u: both samples need at least one value");
    detail::check_finite(a, "mann_whitney_u");
    detail::check_finite(b, "mann_whitney_u");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    double tie_term = 0.0;
    const auto r = detail::midranks(pooled, tie_term);
    const double base = static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;
    const double u = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(na), 0.0) - base;

    TestResult res;
    res.test = "MannWhitneyU";
    res.statistic = u;
    res.group_sizes = {na, nb};
    double p_less = 1.0, p_greater = 1.0;
    if (na <= kExactMaxGroupSize && nb <= kExactMaxGroupSize) {
        res.exact = true;
        // Walk every size-na subset of the pooled ranks.
        std::vector<char> pick(n, 0);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), 1);
        std::size_t total = 0, le = 0, ge = 0;
        const double eps = 1e-9;
        do {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (pick[i]) s += r[i];
            const double uu = s - base;
            ++total;
            if (uu <= u + eps) ++le;
            if (uu >= u - eps) ++ge;
        } while (std::prev_permutation(pick.begin(), pick.end()));
        p_less = static_cast<double>(le) / static_cast<double>(total);
        p_greater = static_cast<double>(ge) / static_cast<double>(total);
    } else {
        const double nn = static_cast<double>(n);
        const double mean = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
        const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                           ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
        if (var > 0.0) {
            const boost::math::normal z01;
            const double sd = std::sqrt(var);
            p_less = boost::math::cdf(z01, (u - mean + 0.5) / sd);
            p_greater = boost::math::cdf(boost::math::complement(z01, (u - mean - 0.5) / sd));
        }
    }
    switch (alt) {
        case Alternative::Less: res.p_raw = p_less; break;
        case Alternative::Greater: res.p_raw = p_greater; break;
        case Alternative::TwoSided: res.p_raw = std::min(1.0, 2.0 * std::min(p_less, p_greater)); break;
    }
    res.p_raw = std::clamp(res.p_raw, 0.0, 1.0);
    res.p_value = res.p_raw;
    return res;
}

/// Kruskal-Wallis H with tie correction; p from the chi-square distribution with
/// (groups - 1) degrees of freedom. All values identical gives H = 0, p = 1.
inline TestResult kruskal_wallis_h(const std::vector<std::vector<double>>& groups) {
    require(groups.size() >= 2, "kruskal_wallis_h: need at least 2 groups");
    std::vector<double> pooled;
    TestResult res;
    res.test = "KruskalWallisH";
    for (const auto& g : groups) {
        require(!g.empty(), "kruskal_wallis_h: empty group");
        detail::check_finite(g, "kruskal_wallis_h");
        pooled.insert(pooled.end(), g.begin(), g.end());
        res.group_sizes.push_back(g.size());
    }
    double tie_term = 0.0;
    const auto r = detail::midranks(pooled, tie_term);
    const double N = static_cast<double>(pooled.size());
    const double denom = 1.0 - tie_term / (N * N * N - N);
    if (!(denom > 0.0)) {
        res.statistic = 0.0;
        res.p_raw = res.p_value = 1.0;
        return res;
    }
    double s = 0.0;
    std::size_t off = 0;
    for (const auto& g : groups) {
        double rs = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rs += r[off + i];
        off += g.size();
        s += rs * rs / static_cast<double>(g.size());
    }
    const double h = std::max(0.0, (12.0 / (N * (N + 1.0)) * s - 3.0 * (N + 1.0)) / denom);
    res.statistic = h;
    const boost::math::chi_squared chi(static_cast<double>(groups.size() - 1));
    res.p_raw = h > 0.0 ? std::clamp(boost::math::cdf(boost::math::complement(chi, h)), 0.0, 1.0) : 1.0;
    res.p_value = res.p_raw;
    return res;
}

}  // namespace pedx
