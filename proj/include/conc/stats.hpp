#pragma once

#include <span>
#include <vector>

namespace conc::stats {

double mean(std::span<const double> x);

/// Sample standard deviation, n-1 denominator.
double sample_sd(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);

double spearman(std::span<const double> x, std::span<const double> y);

/// Quantile by linear interpolation between order statistics
/// (hyndman-fan type 7, the R default): h = (n-1)q.
double quantile_type7(std::vector<double> sorted_or_not, double q);

/// Two-sided tail probability of a standard normal.
double normal_two_sided_p(double z);

/// Asymptotic Kolmogorov-Smirnov p-value for statistic d at sample size n.
double ks_p_value(double d, size_t n);

/// KS distance of a sample against the U(0,1) cdf.
double ks_statistic_uniform(std::vector<double> sample);

}  // namespace conc::stats
