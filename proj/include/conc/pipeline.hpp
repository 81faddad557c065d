#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conc/acf.hpp"
#include "conc/flow.hpp"
#include "conc/regress.hpp"
#include "conc/tape.hpp"

// High-level orchestration shared by the CLI and the acceptance suite.
// Every stage communicates through the documented CSV/JSON formats; given
// fixed inputs and seeds the outputs are byte-stable.

namespace conc {

struct RunConfig {
    WindowSpec window;
    FilterConfig filter;
    std::optional<std::string> index_csv;
    double head_frac = 0.10;
    double tail_frac = 0.10;
    double q_low = 0.30;
    double q_high = 0.70;
    bool bootstrap = true;
    int bootstrap_reps = 1000;
    uint64_t bootstrap_seed = 1;
    int acf_max_lag = 20;
    bool acf_mask_months = false;
    int scatter_bins = 20;
    double dominance_threshold = 0.25;
};

struct IngestResult {
    Panel panel;
    std::vector<PreparedSeries> summands;
    StringPool firm_names;
    double dominance = 0.0;  // share of sessions with a dominant firm
    std::vector<RowError> parse_errors;
};

IngestResult ingest_tape_file(const std::string& path, const RunConfig& cfg);
IngestResult ingest_tape_stream(std::istream& in, const RunConfig& cfg);

struct RegressReport {
    FitResult impact;                     // dP on [dE, dM, dV, dN]
    std::optional<BootstrapResult> boot;
    PartialFit partial;
    RegimeAssignment regimes;
    FitResult dummy;
    ScatterMatrix scatter;
    ScatterPair residual_plot;            // binned (dE', dP')
    std::vector<std::string> warnings;
};

RegressReport run_regression(const Panel& panel, const RunConfig& cfg);

nlohmann::json report_to_json(const RegressReport& rep, const Panel& panel,
                              const RunConfig& cfg);

struct AcfResult {
    AcfAverage average;
    std::vector<AcfDecomposition> per_series;
    std::vector<std::string> series_names;
};

AcfResult run_acf(std::span<const PreparedSeries> series, const RunConfig& cfg);

}  // namespace conc
