// conc — trading-concentration analytics over firm-attributed trade tapes.
//
// Subcommands:
//   synth    generate a synthetic tape (and optionally a direct panel)
//   ingest   tape CSV -> standardized panel CSV (+ summand sidecar)
//   regress  panel CSV -> fit report JSON + plot-data CSVs
//   acf      tape or panel+summands -> concentration ACF decomposition CSVs
//   report   ingest + regress + acf in one pass
//
// Exit codes: 0 success, 1 analysis/domain error, 2 usage/input error.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "conc/errors.hpp"
#include "conc/panel_io.hpp"
#include "conc/pipeline.hpp"
#include "conc/synth.hpp"

namespace fs = std::filesystem;
using namespace conc;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write to " + path.string());
    return out;
}

int parse_clock_minute(const std::string& hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':') throw InputError("clock must be HH:MM: " + hhmm);
    const int h = std::stoi(hhmm.substr(0, 2));
    const int m = std::stoi(hhmm.substr(3, 2));
    if (h > 23 || m > 59) throw InputError("clock must be HH:MM: " + hhmm);
    return h * 60 + m;
}

struct CommonOpts {
    std::string window_kind = "daily";
    int trade_count = 500;
    std::string session_open = "08:00";
    std::string session_close = "16:30";
    double trim_open_min = 30.0;
    double trim_close_min = 30.0;
    int min_trades = 500;
    double max_move_pct = 5.0;
    double dominance_threshold = 0.25;
    std::string index_csv;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--window", window_kind, "Window kind: daily or count")
            ->check(CLI::IsMember({"daily", "count"}));
        cmd->add_option("--trade-count", trade_count,
                        "Trades per window for --window count");
        cmd->add_option("--session-open", session_open, "Exchange open, HH:MM UTC");
        cmd->add_option("--session-close", session_close, "Exchange close, HH:MM UTC");
        cmd->add_option("--trim-open", trim_open_min, "Minutes trimmed after the open");
        cmd->add_option("--trim-close", trim_close_min, "Minutes trimmed before the close");
        cmd->add_option("--min-trades", min_trades, "Minimum trades per included session");
        cmd->add_option("--max-move", max_move_pct,
                        "Exclude sessions whose raw |return| exceeds this percent");
        cmd->add_option("--index", index_csv,
                        "date,return_pct CSV of market returns; defaults to the "
                        "cross-stock mean as proxy");
        cmd->add_option("--dominance-threshold", dominance_threshold,
                        "volume share that marks a dominant firm");
    }

    RunConfig to_config() const {
        RunConfig cfg;
        cfg.window.kind = window_kind == "count" ? WindowSpec::Kind::TradeCount
                                                 : WindowSpec::Kind::CalendarDay;
        cfg.window.trade_count = trade_count;
        cfg.window.clock.open_minute = parse_clock_minute(session_open);
        cfg.window.clock.close_minute = parse_clock_minute(session_close);
        cfg.window.trim_open_ms = static_cast<int64_t>(trim_open_min * kMsPerMinute);
        cfg.window.trim_close_ms = static_cast<int64_t>(trim_close_min * kMsPerMinute);
        cfg.filter.min_trades = min_trades;
        cfg.filter.max_abs_return_pct = max_move_pct;
        cfg.dominance_threshold = dominance_threshold;
        if (!index_csv.empty()) cfg.index_csv = index_csv;
        return cfg;
    }
};

void print_ingest_summary(const IngestResult& res, const RunConfig& cfg, std::ostream& out) {
    const auto& e = res.panel.exclusions;
    out << "sessions: " << (e.included + e.too_few_trades + e.large_move + e.zero_variance)
        << "\nincluded: " << e.included << "\nexcluded_too_few_trades: " << e.too_few_trades
        << "\nexcluded_large_move: " << e.large_move
        << "\nexcluded_zero_variance: " << e.zero_variance
        << "\nsingle_firm_side_sessions: " << res.panel.single_firm_side_sessions
        << "\ndominant_firm_share(threshold=" << cfg.dominance_threshold
        << "): " << res.dominance << "\nmarket_adjustment: " << res.panel.market_adjustment
        << "\nparse_errors: " << res.parse_errors.size() << "\n";
    for (const auto& w : res.panel.warnings) out << "warning: " << w << "\n";
    size_t shown = 0;
    for (const auto& err : res.parse_errors) {
        if (++shown > 10) {
            out << "  ... " << res.parse_errors.size() - 10 << " more\n";
            break;
        }
        out << "  line " << err.line << ": " << err.message << "\n";
    }
}

void write_scatter_files(const ScatterMatrix& m, const ScatterPair& residual_plot,
                         const fs::path& dir) {
    {
        auto out = open_out(dir / "scatter_correlations.csv");
        out << "x,y,correlation\n";
        for (size_t i = 0; i < m.names.size(); ++i)
            for (size_t j = 0; j < m.names.size(); ++j)
                out << m.names[i] << ',' << m.names[j] << ','
                    << format_double(m.correlation[i][j]) << '\n';
    }
    {
        auto out = open_out(dir / "scatter_pairs.csv");
        out << "x,y,bin,x_mean,y_mean,count\n";
        for (const auto& p : m.pairs)
            for (size_t b = 0; b < p.bin_x_mean.size(); ++b)
                out << p.x_name << ',' << p.y_name << ',' << b << ','
                    << format_double(p.bin_x_mean[b]) << ',' << format_double(p.bin_y_mean[b])
                    << ',' << p.bin_count[b] << '\n';
    }
    {
        auto out = open_out(dir / "histograms.csv");
        out << "variable,bin_lo,bin_hi,count\n";
        for (const auto& h : m.histograms)
            for (size_t b = 0; b < h.counts.size(); ++b)
                out << h.name << ',' << format_double(h.edges[b]) << ','
                    << format_double(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
    }
    {
        auto out = open_out(dir / "residual_plot.csv");
        out << "bin,dE_residual_mean,dP_residual_bps_mean,count\n";
        for (size_t b = 0; b < residual_plot.bin_x_mean.size(); ++b)
            out << b << ',' << format_double(residual_plot.bin_x_mean[b]) << ','
                << format_double(residual_plot.bin_y_mean[b]) << ','
                << residual_plot.bin_count[b] << '\n';
    }
}

void write_acf_files(const AcfResult& acf, const fs::path& acf_path,
                     const fs::path& decomp_path) {
    {
        auto out = open_out(acf_path);
        out << acf_report_csv(acf.average);
    }
    {
        auto out = open_out(decomp_path);
        out << "series,lag,gamma,gamma_same,gamma_cross,pairs\n";
        for (size_t s = 0; s < acf.per_series.size(); ++s) {
            const auto& d = acf.per_series[s];
            for (int lag = 1; lag <= d.max_lag; ++lag) {
                const auto i = static_cast<size_t>(lag - 1);
                out << acf.series_names[s] << ',' << lag << ',' << format_double(d.gamma[i])
                    << ',' << format_double(d.gamma_same[i]) << ','
                    << format_double(d.gamma_cross[i]) << ',' << d.pair_count[i] << '\n';
            }
        }
    }
}

int run(int argc, char** argv) {
    CLI::App app{"trading-concentration analytics"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic firm-attributed tape");
    std::string synth_config_path, synth_out, synth_panel_out, synth_index_out;
    uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config_path, "synth config JSON")->required();
    synth->add_option("--seed", synth_seed, "generator seed (overrides config)")->required();
    synth->add_option("--out", synth_out, "output tape CSV path")->required();
    synth->add_option("--panel", synth_panel_out,
                      "also emit a direct copula panel CSV to this path");
    synth->add_option("--emit-index", synth_index_out,
                      "emit a zero market-return CSV covering the generated dates");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "tape CSV -> standardized panel CSV");
    std::string ingest_tape, ingest_out, ingest_summands;
    CommonOpts ingest_opts;
    ingest->add_option("--tape", ingest_tape, "input tape CSV")->required();
    ingest->add_option("--out", ingest_out, "output panel CSV")->required();
    ingest->add_option("--summands", ingest_summands,
                       "also write the per-firm summand sidecar CSV");
    ingest_opts.add_to(ingest);

    // ---- regress ----
    auto* regress = app.add_subcommand("regress", "panel CSV -> fit report JSON");
    std::string regress_panel, regress_out, regress_plots;
    bool no_bootstrap = false, stamp = false;
    int reps = 1000, bins = 20;
    uint64_t boot_seed = 1;
    double q_low = 0.30, q_high = 0.70;
    regress->add_option("--panel", regress_panel, "input panel CSV")->required();
    regress->add_option("--out", regress_out, "output report JSON")->required();
    regress->add_option("--plots", regress_plots, "directory for plot-data CSVs");
    regress->add_flag("--no-bootstrap", no_bootstrap, "skip the shuffle bootstrap");
    regress->add_option("--reps", reps, "bootstrap repetitions");
    regress->add_option("--seed", boot_seed, "bootstrap seed");
    regress->add_option("--qlow", q_low, "dilute quantile");
    regress->add_option("--qhigh", q_high, "concentrated quantile");
    regress->add_option("--bins", bins, "scatter/conditional-mean bins");
    regress->add_flag("--stamp", stamp, "embed a wall-clock timestamp in the report");

    // ---- acf ----
    auto* acf = app.add_subcommand("acf", "concentration ACF and same/cross decomposition");
    std::string acf_tape, acf_panel, acf_summands, acf_out = "acf.csv",
                acf_decomp = "acf_decomposition.csv";
    int max_lag = 20;
    bool mask_months = false;
    CommonOpts acf_opts;
    acf->add_option("--tape", acf_tape, "input tape CSV (computes summands itself)");
    acf->add_option("--panel", acf_panel, "input panel CSV (requires --summands)");
    acf->add_option("--summands", acf_summands, "summand sidecar CSV");
    acf->add_option("--out", acf_out, "averaged ACF CSV");
    acf->add_option("--decomposition", acf_decomp, "per-series decomposition CSV");
    acf->add_option("--max-lag", max_lag, "maximum lag in included-session steps");
    acf->add_flag("--mask-months", mask_months,
                  "do not match firm identities across calendar months");
    acf_opts.add_to(acf);

    // ---- report ----
    auto* report = app.add_subcommand("report", "full pipeline: ingest + regress + acf");
    std::string report_tape, report_dir;
    CommonOpts report_opts;
    int report_reps = 1000, report_bins = 20, report_max_lag = 20;
    uint64_t report_seed = 1;
    bool report_no_bootstrap = false, report_stamp = false;
    double report_qlow = 0.30, report_qhigh = 0.70;
    report->add_option("--tape", report_tape, "input tape CSV")->required();
    report->add_option("--outdir", report_dir, "output directory")->required();
    report->add_option("--reps", report_reps, "bootstrap repetitions");
    report->add_option("--seed", report_seed, "bootstrap seed");
    report->add_flag("--no-bootstrap", report_no_bootstrap, "skip the shuffle bootstrap");
    report->add_option("--qlow", report_qlow, "dilute quantile");
    report->add_option("--qhigh", report_qhigh, "concentrated quantile");
    report->add_option("--bins", report_bins, "scatter bins");
    report->add_option("--max-lag", report_max_lag, "ACF maximum lag");
    report->add_flag("--stamp", report_stamp, "embed a wall-clock timestamp");
    report_opts.add_to(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage errors
    }

    if (synth->parsed()) {
        SynthConfig cfg = load_synth_config(synth_config_path);
        {
            auto out = open_out(synth_out);
            const SynthSummary summary = generate_tape(cfg, synth_seed, out);
            std::cout << "tape: " << synth_out << "\ntrades: " << summary.trades_written
                      << "\nsessions: " << summary.sessions
                      << "\nnoise_sigma_bps: " << summary.realized_noise_sigma_bps << "\n";
        }
        if (!synth_panel_out.empty()) {
            const Panel panel = generate_panel(cfg, synth_seed);
            auto out = open_out(synth_panel_out);
            write_panel_csv(panel, out);
            std::cout << "panel: " << synth_panel_out << " (" << panel.rows.size()
                      << " rows)\n";
        }
        if (!synth_index_out.empty()) {
            auto out = open_out(synth_index_out);
            out << "date,return_pct\n";
            int64_t d = *parse_date(cfg.start_date);
            int written = 0;
            while (written < cfg.n_days) {
                const int weekday = static_cast<int>(((d % 7) + 7 + 4) % 7);
                if (weekday != 0 && weekday != 6) {
                    out << format_date(d) << ",0\n";
                    ++written;
                }
                ++d;
            }
        }
        return 0;
    }

    if (ingest->parsed()) {
        const RunConfig cfg = ingest_opts.to_config();
        const IngestResult res = ingest_tape_file(ingest_tape, cfg);
        {
            auto out = open_out(ingest_out);
            write_panel_csv(res.panel, out);
        }
        if (!ingest_summands.empty()) {
            auto out = open_out(ingest_summands);
            write_summands_csv(res.summands, res.firm_names, out);
        }
        std::cout << "panel: " << ingest_out << "\n";
        print_ingest_summary(res, cfg, std::cout);
        return 0;
    }

    if (regress->parsed()) {
        RunConfig cfg;
        cfg.bootstrap = !no_bootstrap;
        cfg.bootstrap_reps = reps;
        cfg.bootstrap_seed = boot_seed;
        cfg.q_low = q_low;
        cfg.q_high = q_high;
        cfg.scatter_bins = bins;
        const Panel panel = read_panel_file(regress_panel);
        if (panel.rows.empty()) throw DomainError("regress: panel has no included rows");
        const RegressReport rep = run_regression(panel, cfg);
        json j = report_to_json(rep, panel, cfg);
        if (stamp) {
            const auto now = std::chrono::system_clock::now();
            j["generated_at_ms"] =
                std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch())
                    .count();
        }
        {
            auto out = open_out(regress_out);
            out << j.dump(2) << '\n';
        }
        if (!regress_plots.empty())
            write_scatter_files(rep.scatter, rep.residual_plot, regress_plots);
        std::cout << "report: " << regress_out << "\nr2: " << rep.impact.r2
                  << "\neta: " << rep.partial.eta << "\n";
        return 0;
    }

    if (acf->parsed()) {
        RunConfig cfg = acf_opts.to_config();
        cfg.acf_max_lag = max_lag;
        cfg.acf_mask_months = mask_months;
        std::vector<PreparedSeries> series;
        if (!acf_tape.empty()) {
            IngestResult res = ingest_tape_file(acf_tape, cfg);
            series = std::move(res.summands);
        } else if (!acf_panel.empty() && !acf_summands.empty()) {
            std::ifstream in(acf_summands, std::ios::binary);
            if (!in) throw InputError("cannot open summands file: " + acf_summands);
            StringPool firms;
            series = read_summands_csv(in, firms);
        } else {
            throw InputError("acf: provide --tape, or --panel together with --summands");
        }
        const AcfResult result = run_acf(series, cfg);
        write_acf_files(result, acf_out, acf_decomp);
        std::cout << "acf: " << acf_out << "\ndecomposition: " << acf_decomp
                  << "\nseries: " << result.series_names.size()
                  << "\ngamma(1): " << result.average.gamma[0] << "\n";
        return 0;
    }

    if (report->parsed()) {
        RunConfig cfg = report_opts.to_config();
        cfg.bootstrap = !report_no_bootstrap;
        cfg.bootstrap_reps = report_reps;
        cfg.bootstrap_seed = report_seed;
        cfg.q_low = report_qlow;
        cfg.q_high = report_qhigh;
        cfg.scatter_bins = report_bins;
        cfg.acf_max_lag = report_max_lag;
        const fs::path dir(report_dir);
        fs::create_directories(dir);

        const IngestResult res = ingest_tape_file(report_tape, cfg);
        {
            auto out = open_out(dir / "panel.csv");
            write_panel_csv(res.panel, out);
        }
        {
            auto out = open_out(dir / "summands.csv");
            write_summands_csv(res.summands, res.firm_names, out);
        }
        if (res.panel.rows.empty()) throw DomainError("report: no included sessions");
        const RegressReport rep = run_regression(res.panel, cfg);
        json j = report_to_json(rep, res.panel, cfg);
        j["dominant_firm_share"] = res.dominance;
        if (report_stamp) {
            const auto now = std::chrono::system_clock::now();
            j["generated_at_ms"] =
                std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch())
                    .count();
        }
        {
            auto out = open_out(dir / "fit_report.json");
            out << j.dump(2) << '\n';
        }
        write_scatter_files(rep.scatter, rep.residual_plot, dir);
        const AcfResult acf_result = run_acf(res.summands, cfg);
        write_acf_files(acf_result, dir / "acf.csv", dir / "acf_decomposition.csv");
        {
            auto out = open_out(dir / "ingest_summary.txt");
            print_ingest_summary(res, cfg, out);
        }
        std::cout << "outputs in " << dir.string() << "\n";
        print_ingest_summary(res, cfg, std::cout);
        std::cout << "r2: " << rep.impact.r2 << "\neta: " << rep.partial.eta << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
