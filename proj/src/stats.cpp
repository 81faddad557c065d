#include "conc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conc/kernels/kernels.hpp"

namespace conc::stats {

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return kernels::sum(x) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    const size_t n = x.size();
    if (n < 2) return 0.0;
    const double m = mean(x);
    std::vector<double> centered(n);
    kernels::subtract_scalar(x, m, centered);
    return std::sqrt(kernels::sumsq(centered) / static_cast<double>(n - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const size_t n = x.size();
    const double mx = mean(x);
    const double my = mean(y);
    std::vector<double> cx(n), cy(n);
    kernels::subtract_scalar(x, mx, cx);
    kernels::subtract_scalar(y, my, cy);
    const double sxy = kernels::dot(cx, cy);
    const double sxx = kernels::sumsq(cx);
    const double syy = kernels::sumsq(cy);
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mid-rank for ties
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

double quantile_type7(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n == 0) return std::nan("");
    if (n == 1) return v[0];
    const double h = (static_cast<double>(n) - 1.0) * q;
    const auto lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - std::floor(h);
    return v[lo] + frac * (v[hi] - v[lo]);
}

double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double ks_p_value(double d, size_t n) {
    // Asymptotic Kolmogorov distribution with the Stephens small-sample
    // adjustment of the argument.
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 1e-9) return 1.0;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

double ks_statistic_uniform(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const size_t n = sample.size();
    double d = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = std::clamp(sample[i], 0.0, 1.0);
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        d = std::max({d, x - lo, hi - x});
    }
    return d;
}

}  // namespace conc::stats
