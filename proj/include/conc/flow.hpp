#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conc/concentration.hpp"
#include "conc/tape.hpp"

namespace conc {

/// One regression-panel row. dP is the market-adjusted, per-stock demeaned
/// session return in basis points; imbalances follow the buy-minus-sell
/// sign convention everywhere.
struct SessionFeatures {
    std::string symbol;
    std::string session_id;
    int64_t day_index = 0;
    double dP_bps = 0.0;
    double E_b = 0.0, E_s = 0.0;
    double G_b = 0.0, G_s = 0.0;
    double dE = 0.0, dG = 0.0;
    double dM = 0.0, dV = 0.0, dN = 0.0;
    std::optional<Exclusion> excluded;
};

struct Panel {
    std::vector<SessionFeatures> rows;           // included sessions only
    std::vector<SessionFeatures> excluded_rows;  // carried for reporting
    ExclusionCounts exclusions;
    bool standardized = false;
    size_t single_firm_side_sessions = 0;
    std::string market_adjustment;  // "index_csv" or "cross_stock_mean"
    std::vector<std::string> warnings;

    std::vector<double> column(double SessionFeatures::*field) const;
};

/// Percent return between the notional-weighted VWAP of the last and first
/// trade slices. Slice size is max(1, floor(frac * n_trades)), counted in
/// trades. Throws DomainError when fewer than two trades are present.
double session_return(const SessionTape& session, double head_frac = 0.10,
                      double tail_frac = 0.10);

struct Imbalances {
    double dM = 0.0;  // aggressive trade-count imbalance
    double dV = 0.0;  // aggressive notional imbalance
    double dN = 0.0;  // distinct-firm-count imbalance
};

/// All three (x_b - x_s)/(x_b + x_s) imbalances for one session.
Imbalances flow_imbalances(const SessionTape& session);

/// Daily market return series, percent. Loaded from the date,return_pct CSV.
struct IndexReturns {
    std::map<int64_t, double> by_day;  // epoch-day -> percent
};

IndexReturns load_index_returns(const std::string& path);

struct RawReturn {
    std::string symbol;
    int64_t day_index = 0;
    double return_pct = 0.0;
};

/// Subtract the market return per day, then the per-stock mean of the
/// adjusted series; result in basis points, aligned with the input. With no
/// index series the equal-weighted cross-stock mean daily return stands in
/// as the market proxy. Missing index dates are fatal and listed.
std::vector<double> market_adjust(std::span<const RawReturn> returns,
                                  const IndexReturns* index);

/// Divide dE,dG,dM,dV,dN by their per-stock sample standard deviation
/// (n-1). Returns are left in bps and are not rescaled. Stocks with a zero
/// sigma in any column (or fewer than 2 sessions) are dropped to
/// excluded_rows with a warning.
void standardize(Panel& panel);

struct ScatterPair {
    std::string x_name, y_name;
    double correlation = 0.0;
    std::vector<double> bin_x_mean, bin_y_mean;
    std::vector<size_t> bin_count;
};

struct Histogram {
    std::string name;
    std::vector<double> edges;
    std::vector<size_t> counts;
};

struct ScatterMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> correlation;  // names x names
    std::vector<ScatterPair> pairs;
    std::vector<Histogram> histograms;
    std::vector<std::string> warnings;
};

/// Pairwise correlations, equal-count binned conditional means and marginal
/// histograms for the panel variables (the scatter-matrix plot data).
ScatterMatrix scatter_matrix(const Panel& panel, int n_bins = 20);

/// Same machinery for one x/y pair of raw vectors (used for the binned
/// residual-on-residual plot).
ScatterPair binned_pair(std::span<const double> x, std::span<const double> y, int n_bins,
                        const std::string& x_name, const std::string& y_name);

}  // namespace conc
