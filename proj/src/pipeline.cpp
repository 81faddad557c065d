#include "conc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "conc/errors.hpp"
#include "conc/kernels/kernels.hpp"
#include "conc/panel_io.hpp"

namespace conc {

using nlohmann::json;

namespace {

struct SessionDraft {
    std::string symbol;
    std::string session_id;
    int64_t day_index = 0;
    size_t n_trades = 0;
    double raw_return_pct = 0.0;
    ConcentrationScores buy_scores, sell_scores;
    Imbalances imbalances;
    double max_buy_frac = 0.0, max_sell_frac = 0.0;
    SummandSession buy_summands, sell_summands;
    std::optional<Exclusion> excluded;
    bool single_firm_side = false;
};

}  // namespace

IngestResult ingest_tape_stream(std::istream& in, const RunConfig& cfg) {
    if (cfg.filter.min_trades < 1)
        throw InputError("ingest: min_trades must be >= 1");
    if (!(cfg.filter.max_abs_return_pct > 0.0))
        throw InputError("ingest: max_abs_return_pct must be > 0");
    if (!(cfg.q_low > 0.0 && cfg.q_low < cfg.q_high && cfg.q_high < 1.0))
        throw InputError("ingest: quantiles must satisfy 0 < q_low < q_high < 1");
    if (!(cfg.dominance_threshold > 0.0 && cfg.dominance_threshold <= 1.0))
        throw InputError("ingest: dominance threshold must lie in (0, 1]");

    Tape tape = parse_tape(in);

    std::optional<IndexReturns> index;
    if (cfg.index_csv) index = load_index_returns(*cfg.index_csv);

    std::vector<SessionDraft> drafts;
    sessionize_stream(tape.records, cfg.window, [&](SessionTape&& session) {
        SessionDraft d;
        d.symbol = tape.symbols.name(session.symbol);
        d.session_id = session.session_id;
        d.day_index = session.day_index;
        d.n_trades = session.trades.size();

        if (d.n_trades < static_cast<size_t>(cfg.filter.min_trades)) {
            d.excluded = Exclusion::TooFewTrades;
            drafts.push_back(std::move(d));
            return;
        }
        // Large-move screen on the raw return, before market adjustment.
        d.raw_return_pct = session_return(session, cfg.head_frac, cfg.tail_frac);
        if (std::fabs(d.raw_return_pct) > cfg.filter.max_abs_return_pct) {
            d.excluded = Exclusion::LargeMove;
            drafts.push_back(std::move(d));
            return;
        }

        const FirmFractions buy = volume_fractions(session, Side::Buy);
        const FirmFractions sell = volume_fractions(session, Side::Sell);
        d.buy_scores = concentration_scores(buy);
        d.sell_scores = concentration_scores(sell);
        d.max_buy_frac = buy.max_fraction();
        d.max_sell_frac = sell.max_fraction();
        d.single_firm_side = buy.n() == 1 || sell.n() == 1;
        d.imbalances = flow_imbalances(session);
        d.buy_summands = make_summands(buy, session.session_id, session.day_index);
        d.sell_summands = make_summands(sell, session.session_id, session.day_index);
        drafts.push_back(std::move(d));
    });

    // Market adjustment over the included sessions only.
    std::vector<RawReturn> raw;
    std::vector<size_t> included_idx;
    for (size_t i = 0; i < drafts.size(); ++i) {
        if (drafts[i].excluded) continue;
        raw.push_back({drafts[i].symbol, drafts[i].day_index, drafts[i].raw_return_pct});
        included_idx.push_back(i);
    }
    std::vector<double> dp_bps;
    if (!raw.empty()) dp_bps = market_adjust(raw, index ? &*index : nullptr);

    IngestResult result;
    result.firm_names = std::move(tape.firms);
    result.parse_errors = std::move(tape.errors);
    Panel& panel = result.panel;
    panel.market_adjustment = index ? "index_csv" : "cross_stock_mean";

    std::vector<DominanceInputs> dominance;
    for (size_t k = 0; k < included_idx.size(); ++k) {
        const SessionDraft& d = drafts[included_idx[k]];
        SessionFeatures r;
        r.symbol = d.symbol;
        r.session_id = d.session_id;
        r.day_index = d.day_index;
        r.dP_bps = dp_bps[k];
        r.E_b = d.buy_scores.entropy;
        r.E_s = d.sell_scores.entropy;
        r.G_b = d.buy_scores.gini;
        r.G_s = d.sell_scores.gini;
        r.dE = r.E_b - r.E_s;
        r.dG = r.G_b - r.G_s;
        r.dM = d.imbalances.dM;
        r.dV = d.imbalances.dV;
        r.dN = d.imbalances.dN;
        panel.rows.push_back(std::move(r));
        ++panel.exclusions.included;
        if (d.single_firm_side) ++panel.single_firm_side_sessions;
        dominance.push_back({d.max_buy_frac, d.max_sell_frac});
    }
    for (const SessionDraft& d : drafts) {
        if (!d.excluded) continue;
        SessionFeatures r;
        r.symbol = d.symbol;
        r.session_id = d.session_id;
        r.day_index = d.day_index;
        r.excluded = d.excluded;
        panel.excluded_rows.push_back(std::move(r));
        if (*d.excluded == Exclusion::TooFewTrades) ++panel.exclusions.too_few_trades;
        else ++panel.exclusions.large_move;
    }
    if (!dominance.empty()) result.dominance = dominance_frequency(dominance, cfg.dominance_threshold);

    standardize(panel);

    // Summand series per (symbol, side), included sessions only, in stream
    // order. Stocks dropped by standardization are dropped here too so the
    // ACF inputs match the panel.
    std::map<std::string, bool> surviving;
    for (const auto& r : panel.rows) surviving[r.symbol] = true;
    std::vector<std::string> symbol_order;
    std::map<std::string, SummandSeries> buy_series, sell_series;
    for (size_t i : included_idx) {
        SessionDraft& d = drafts[i];
        if (!surviving.count(d.symbol)) continue;
        if (!buy_series.count(d.symbol)) {
            symbol_order.push_back(d.symbol);
            buy_series[d.symbol] = {d.symbol, Side::Buy, {}};
            sell_series[d.symbol] = {d.symbol, Side::Sell, {}};
        }
        buy_series[d.symbol].sessions.push_back(std::move(d.buy_summands));
        sell_series[d.symbol].sessions.push_back(std::move(d.sell_summands));
    }
    for (const std::string& sym : symbol_order) {
        result.summands.push_back(prepare_summands(buy_series[sym]));
        result.summands.push_back(prepare_summands(sell_series[sym]));
    }
    return result;
}

IngestResult ingest_tape_file(const std::string& path, const RunConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open tape file: " + path);
    return ingest_tape_stream(in, cfg);
}

RegressReport run_regression(const Panel& panel, const RunConfig& cfg) {
    RegressReport rep;
    const Eigen::MatrixXd X = panel_design(panel);
    const Eigen::VectorXd y = panel_response(panel);

    rep.impact = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    fit_diagnostics(X, y, rep.impact);
    if (cfg.bootstrap)
        rep.boot = bootstrap_null(X, y, rep.impact, cfg.bootstrap_reps, cfg.bootstrap_seed);

    rep.partial = two_stage_partial(panel);
    // Frisch-Waugh-Lovell gate: the two-stage eta must equal the full-model
    // dE coefficient before anything is reported.
    const double alpha = rep.impact.coef_of("dE");
    if (!(std::fabs(rep.partial.eta - alpha) <= 1e-9 * std::max(1.0, std::fabs(alpha))))
        throw DomainError("two-stage eta " + std::to_string(rep.partial.eta) +
                          " does not match the full-model dE coefficient " +
                          std::to_string(alpha));

    rep.regimes = regime_classify(panel, cfg.q_low, cfg.q_high);
    rep.dummy = dummy_regression(panel, rep.regimes, &rep.warnings);
    rep.scatter = scatter_matrix(panel, cfg.scatter_bins);
    for (const auto& w : rep.scatter.warnings) rep.warnings.push_back(w);

    std::vector<double> conc_res(rep.partial.conc_residuals.data(),
                                 rep.partial.conc_residuals.data() + rep.partial.conc_residuals.size());
    std::vector<double> price_res(rep.partial.price_residuals.data(),
                                  rep.partial.price_residuals.data() + rep.partial.price_residuals.size());
    rep.residual_plot = binned_pair(conc_res, price_res, cfg.scatter_bins, "dE_residual",
                                    "dP_residual_bps");

    if (rep.boot) {
        for (size_t i = 0; i < rep.boot->names.size(); ++i) {
            const double pb = rep.boot->p_values[i];
            const double pc = rep.impact.p[static_cast<Eigen::Index>(i) + 1];
            const double floor_p = 1.0 / static_cast<double>(rep.boot->n_reps);
            const double hi = std::max(pb, pc);
            const double lo = std::max(std::min(pb, pc), floor_p);
            if (hi > 0.01 && hi / lo > 2.0)
                rep.warnings.push_back("bootstrap and classical p-values disagree by more "
                                       "than 2x for " + rep.boot->names[i]);
        }
        for (const auto& w : rep.boot->warnings) rep.warnings.push_back(w);
    }
    return rep;
}

namespace {

json fit_to_json(const FitResult& fit, const BootstrapResult* boot) {
    json coeffs = json::array();
    for (size_t i = 0; i < fit.names.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        json c;
        c["name"] = fit.names[i];
        c["value"] = fit.coef[j];
        c["std_error"] = fit.se[j];
        c["p_classical"] = fit.p[j];
        if (boot != nullptr) {
            for (size_t b = 0; b < boot->names.size(); ++b) {
                if (boot->names[b] == fit.names[i]) {
                    c["p_bootstrap"] = boot->p_values[b];
                    c["bootstrap_null_sigma"] = boot->null_sigma[b];
                }
            }
        }
        if (auto it = fit.r2_single.find(fit.names[i]); it != fit.r2_single.end())
            c["r2_single"] = it->second;
        if (auto it = fit.r2_partial.find(fit.names[i]); it != fit.r2_partial.end())
            c["r2_partial"] = it->second;
        coeffs.push_back(std::move(c));
    }
    json out;
    out["coefficients"] = std::move(coeffs);
    out["r2"] = fit.r2;
    out["n_samples"] = fit.n;
    out["intercept_included"] = fit.intercept;
    return out;
}

}  // namespace

json report_to_json(const RegressReport& rep, const Panel& panel, const RunConfig& cfg) {
    json j;
    j["model"] = fit_to_json(rep.impact, rep.boot ? &*rep.boot : nullptr);

    json partial;
    partial["eta"] = rep.partial.eta;
    partial["std_error"] = rep.partial.se;
    partial["r2"] = rep.partial.r2;
    j["partial_regression"] = std::move(partial);

    if (rep.boot) {
        json b;
        b["n_reps"] = rep.boot->n_reps;
        b["seed"] = rep.boot->seed;
        j["bootstrap"] = std::move(b);
    }

    json regimes;
    regimes["q_low_value"] = rep.regimes.q_low_value;
    regimes["q_high_value"] = rep.regimes.q_high_value;
    regimes["quantile_estimator"] =
        "linear interpolation between order statistics (type 7)";
    json counts;
    for (int r = 0; r < 5; ++r)
        counts[std::string(regime_name(static_cast<RegimeLabel>(r)))] =
            rep.regimes.counts[r];
    regimes["counts"] = std::move(counts);
    j["regimes"] = std::move(regimes);

    j["regime_model"] = fit_to_json(rep.dummy, nullptr);

    json excl;
    excl["included"] = panel.exclusions.included;
    excl["too_few_trades"] = panel.exclusions.too_few_trades;
    excl["large_move"] = panel.exclusions.large_move;
    excl["zero_variance"] = panel.exclusions.zero_variance;
    j["exclusions"] = std::move(excl);

    json config;
    config["q_low"] = cfg.q_low;
    config["q_high"] = cfg.q_high;
    config["bootstrap"] = cfg.bootstrap;
    config["bootstrap_reps"] = cfg.bootstrap_reps;
    config["bootstrap_seed"] = cfg.bootstrap_seed;
    config["min_trades"] = cfg.filter.min_trades;
    config["max_abs_return_pct"] = cfg.filter.max_abs_return_pct;
    config["scatter_bins"] = cfg.scatter_bins;
    config["market_adjustment"] = panel.market_adjustment;
    j["config"] = std::move(config);

    j["kernel_isa"] = kernels::isa_name(kernels::active_isa());
    j["warnings"] = rep.warnings;
    j["notes"] = json::array({
        "r2_partial is (r2_full - r2_without)/(1 - r2_without)",
        "p-values are two-sided normal; bootstrap p-values rank |coef| against "
        "response-shuffled refits",
    });
    return j;
}

AcfResult run_acf(std::span<const PreparedSeries> series, const RunConfig& cfg) {
    if (series.empty()) throw DomainError("acf: no summand series");
    size_t min_len = series[0].sessions.size();
    for (const auto& s : series) min_len = std::min(min_len, s.sessions.size());
    if (static_cast<size_t>(cfg.acf_max_lag) + 1 >= min_len)
        throw DomainError("acf: max_lag " + std::to_string(cfg.acf_max_lag) +
                          " too large for shortest series (length " + std::to_string(min_len) +
                          "); use max_lag <= " + std::to_string(static_cast<int>(min_len) - 2));

    AcfResult out;
    for (const auto& s : series) {
        out.per_series.push_back(decompose_prepared(s, cfg.acf_max_lag, cfg.acf_mask_months));
        out.series_names.push_back(s.symbol + (s.side == Side::Buy ? "/B" : "/S"));
    }
    out.average = average_decompositions(out.per_series);
    return out;
}

}  // namespace conc
