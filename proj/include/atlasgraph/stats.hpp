#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "atlasgraph/errors.hpp"

namespace atlasgraph::stats {

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DimensionMismatch("loglog_slope: need at least two paired samples");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]);
        double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw DimensionMismatch("pearson: need at least two paired samples");
    const double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Ranks starting at 1; tied values share their mean rank.
inline std::vector<double> ranks(const std::vector<double>& v)
{
    std::vector<size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t t = i; t <= j; ++t)
            r[order[t]] = mean_rank;
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    return pearson(ranks(a), ranks(b));
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw DimensionMismatch("median: empty input");
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2)
        return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

// Distortion of a distance estimate: worst expansion times worst contraction
// over pairs with positive reference distance.
inline double distortion(const std::vector<double>& estimate, const std::vector<double>& reference)
{
    double expand = 0.0, contract = 0.0;
    for (size_t i = 0; i < estimate.size(); ++i) {
        if (reference[i] <= 0.0 || estimate[i] <= 0.0)
            continue;
        expand = std::max(expand, estimate[i] / reference[i]);
        contract = std::max(contract, reference[i] / estimate[i]);
    }
    return expand * contract;
}

}  // namespace atlasgraph::stats
