#pragma once

// Across-run summary statistics for box-and-whisker plots.
//
// Quantiles use linear interpolation between closest ranks, inclusive
// (Hyndman-Fan type 7, numpy's default): for sorted x[0..n-1],
//   h = (n - 1) p,  Q(p) = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
// Whiskers are Tukey's: the most extreme data points within 1.5 IQR of the
// quartiles. Points beyond the whiskers are outliers.

#include "rgtd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace rgtd::stats {

/// Type-7 quantile of already sorted data.
inline double quantile_sorted(const std::vector<double>& x, double p) {
    if (x.empty()) throw UsageError("quantile: empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantile: p must lie in [0, 1]");
    const double h = static_cast<double>(x.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0 || lo + 1 >= x.size()) return x[lo];
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

inline double quantile(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    return quantile_sorted(x, p);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

struct BoxSummary {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    double lo_whisker = 0.0;
    double hi_whisker = 0.0;
    std::vector<double> outliers;  // ascending

    double iqr() const noexcept { return q3 - q1; }
};

inline BoxSummary summarize(std::vector<double> x) {
    if (x.empty()) throw UsageError("summarize: empty data");
    std::sort(x.begin(), x.end());
    BoxSummary b;
    b.median = quantile_sorted(x, 0.5);
    b.q1 = quantile_sorted(x, 0.25);
    b.q3 = quantile_sorted(x, 0.75);
    b.min = x.front();
    b.max = x.back();
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.lo_whisker = b.q1;
    b.hi_whisker = b.q3;
    for (double v : x) {
        if (v >= lo_fence) {
            b.lo_whisker = std::min(v, b.q1);
            break;
        }
    }
    for (auto it = x.rbegin(); it != x.rend(); ++it) {
        if (*it <= hi_fence) {
            b.hi_whisker = std::max(*it, b.q3);
            break;
        }
    }
    for (double v : x)
        if (v < b.lo_whisker || v > b.hi_whisker) b.outliers.push_back(v);
    return b;
}

struct RunStatistics {
    std::int64_t iter = 0;
    BoxSummary box;
};

/// series[r][i] is run r's value at logged point i; every run must have the
/// same number of points.
inline std::vector<RunStatistics> across_runs(const std::vector<std::vector<double>>& series,
                                              const std::vector<std::int64_t>& iters) {
    if (series.empty()) throw UsageError("across_runs: no runs");
    for (const auto& s : series)
        if (s.size() != iters.size()) throw UsageError("across_runs: runs have different lengths");
    std::vector<RunStatistics> out;
    out.reserve(iters.size());
    std::vector<double> col(series.size());
    for (std::size_t i = 0; i < iters.size(); ++i) {
        for (std::size_t r = 0; r < series.size(); ++r) col[r] = series[r][i];
        out.push_back({iters[i], summarize(col)});
    }
    return out;
}

}  // namespace rgtd::stats
