#pragma once

#include <span>
#include <string>
#include <vector>

#include "conc/concentration.hpp"

namespace conc {

/// Per-firm entropy summands for one session: z_i = -w_i ln(w_i) / ln(N),
/// so the raw normalized entropy is E_raw = sum z_i. A single-firm session
/// contributes one summand of 0 (E_raw = 0, fully concentrated).
struct SummandSession {
    std::string session_id;
    int64_t day_index = 0;
    std::vector<std::pair<FirmId, double>> z;  // ascending firm id
    double e_raw = 0.0;
};

struct SummandSeries {
    std::string symbol;
    Side side = Side::Buy;
    std::vector<SummandSession> sessions;  // ordered; lags count included steps
};

SummandSession make_summands(const FirmFractions& f, std::string session_id,
                             int64_t day_index);

/// Demeaned form ready for decomposition: z'_i(t) = z_i(t) - mean(E)/N_t.
struct PreparedSeries {
    std::string symbol;
    Side side = Side::Buy;
    double e_mean = 0.0;
    std::vector<SummandSession> sessions;  // z holds z', e_raw holds sum of z'
};

PreparedSeries prepare_summands(const SummandSeries& series);

/// Sample autocorrelation of a series, lags 1..max_lag. The series is
/// demeaned first; lag products average over the available pairs and the
/// denominator is the full-sample second moment, so gamma(0) = 1. Throws
/// DomainError on zero variance or series too short for max_lag.
std::vector<double> concentration_acf(std::span<const double> series, int max_lag);

struct AcfDecomposition {
    int max_lag = 0;
    std::vector<double> gamma;        // plain ACF of the aggregate series
    std::vector<double> gamma_same;   // same-firm component
    std::vector<double> gamma_cross;  // cross-firm component, sign flipped
    std::vector<int64_t> pair_count;  // (t, t+tau) pairs entering each lag
    size_t n_sessions = 0;
};

/// Split the ACF numerator into same-firm and cross-firm sums; the cross
/// term's sign is flipped so gamma = gamma_same - gamma_cross holds at
/// every lag. With mask_month_boundaries, firm identity is not matched
/// across calendar-month edges (all mass moves to the cross term).
AcfDecomposition decompose_acf(const SummandSeries& series, int max_lag,
                               bool mask_month_boundaries = false);
AcfDecomposition decompose_prepared(const PreparedSeries& prepared, int max_lag,
                                    bool mask_month_boundaries = false);

struct AcfAverage {
    int max_lag = 0;
    std::vector<double> gamma;
    std::vector<double> gamma_same;
    std::vector<double> gamma_cross;
    std::vector<int64_t> pair_count;    // summed across series
    std::vector<double> band;           // +-2/sqrt(pairs) significance band
    size_t n_series = 0;
};

/// Equal-weight average of per-(symbol, side) decompositions.
AcfAverage average_decompositions(std::span<const AcfDecomposition> parts);

/// Asserts the decomposition identity, then renders plot rows:
/// lag, gamma, gamma_same, gamma_cross, band, pair_count, log10 columns.
std::string acf_report_csv(const AcfAverage& avg);

}  // namespace conc
