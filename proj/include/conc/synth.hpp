#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "conc/flow.hpp"

namespace conc {

/// Synthetic market configuration. Generation is a pure function of
/// (config, seed): the same pair always yields byte-identical output.
struct SynthConfig {
    int n_stocks = 46;
    int n_days = 674;
    std::string start_date = "2000-05-01";  // sessions skip Sat/Sun

    int firms_per_day_min = 33;
    int firms_per_day_max = 72;
    int trades_per_day_min = 1000;
    int trades_per_day_max = 3000;

    // Order sizes in shares, log-normal.
    double size_log_mu = 6.0;
    double size_log_sigma = 1.2;

    struct Metaorder {
        double start_probability = 0.03;  // per stock-day, when none active
        double participation = 0.35;      // fraction of day volume consumed
        int horizon_days = 5;             // consecutive sessions worked
    } metaorder;

    struct Impact {
        double a_E = 25.0;  // bps per standardized unit
        double a_M = -3.0;
        double a_V = 82.0;
        double a_N = -61.0;
        // Additive offsets on days whose realized concentration regime
        // matches, in bps.
        double offset_conc_buy_conc_sell = 0.0;
        double offset_conc_buy_dilute_sell = 0.0;
        double offset_dilute_buy_conc_sell = 0.0;
        double offset_dilute_buy_dilute_sell = 0.0;
        double regime_q_low = 0.30;
        double regime_q_high = 0.70;
    } impact;

    double noise_sigma_bps = 150.0;
    /// When set, noise_sigma_bps is recomputed so the planted linear signal
    /// explains approximately this fraction of return variance.
    std::optional<double> target_r2;

    // Correlation targets for the direct-panel path (Gaussian copula over
    // the standardized imbalances).
    double corr_dE_dN = -0.20;
    double corr_dM_dV = 0.50;
    double corr_dV_dN = 0.15;
    double corr_dE_dM = 0.0;
    double corr_dE_dV = 0.0;
    double corr_dM_dN = 0.10;

    uint64_t seed = 1;
};

SynthConfig load_synth_config(const std::string& path);
SynthConfig parse_synth_config(const std::string& json_text);

struct SynthSummary {
    size_t trades_written = 0;
    size_t sessions = 0;
    double realized_noise_sigma_bps = 0.0;
};

/// Emit a firm-attributed tape in the ingest CSV format, grouped by symbol
/// and time-ordered within each symbol. Prices follow per-day paths whose
/// head/tail VWAP difference reproduces the planted return model applied to
/// the day's realized (trim-filtered) imbalances.
SynthSummary generate_tape(const SynthConfig& cfg, uint64_t seed, std::ostream& out);

/// Fast path: draw standardized imbalances from the copula and compute
/// returns from the planted model directly, bypassing trade synthesis.
Panel generate_panel(const SynthConfig& cfg, uint64_t seed);

}  // namespace conc
