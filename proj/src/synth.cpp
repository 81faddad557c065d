#include "conc/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <ostream>
#include <cstring>

#include "conc/concentration.hpp"
#include "conc/errors.hpp"
#include "conc/regress.hpp"
#include "conc/rng.hpp"
#include "conc/stats.hpp"

namespace conc {

namespace {

using nlohmann::json;

constexpr uint64_t kStreamFlow = 1;
constexpr uint64_t kStreamMeta = 2;
constexpr uint64_t kStreamNoise = 3;
constexpr uint64_t kStreamStock = 4;
constexpr uint64_t kStreamPanel = 5;

// Session clock mirrors the ingest defaults: 08:00-16:30, half-hour trims.
constexpr int64_t kOpenMs = 8 * kMsPerHour;
constexpr int64_t kCloseMs = 16 * kMsPerHour + 30 * kMsPerMinute;
constexpr int64_t kTrimMs = 30 * kMsPerMinute;
constexpr int64_t kRetainLo = kOpenMs + kTrimMs;
constexpr int64_t kRetainHi = kCloseMs - kTrimMs;

void validate_config(const SynthConfig& c) {
    if (c.n_stocks < 1 || c.n_days < 1)
        throw InputError("synth config: n_stocks and n_days must be >= 1");
    if (c.firms_per_day_min < 1 || c.firms_per_day_max < c.firms_per_day_min)
        throw InputError("synth config: invalid firms_per_day range");
    if (c.trades_per_day_min < 2 || c.trades_per_day_max < c.trades_per_day_min)
        throw InputError("synth config: invalid trades_per_day range");
    if (c.metaorder.start_probability < 0.0 || c.metaorder.start_probability > 1.0)
        throw InputError("synth config: metaorder start probability must lie in [0,1]");
    if (c.metaorder.participation > 1.0)
        throw InputError(
            "synth config: metaorder participation exceeds 100% of day volume (infeasible)");
    if (c.metaorder.participation < 0.0)
        throw InputError("synth config: metaorder participation must be >= 0");
    if (c.metaorder.horizon_days < 1)
        throw InputError("synth config: metaorder horizon must be >= 1 day");
    if (!(c.noise_sigma_bps > 0.0))
        throw InputError("synth config: noise sigma must be > 0");
    if (c.target_r2 && !(*c.target_r2 > 0.0 && *c.target_r2 < 1.0))
        throw InputError("synth config: target_r2 must lie in (0,1)");
    if (!(c.impact.regime_q_low > 0.0) || !(c.impact.regime_q_high < 1.0) ||
        !(c.impact.regime_q_low < c.impact.regime_q_high))
        throw InputError("synth config: regime quantiles must satisfy 0 < low < high < 1");
    if (!parse_date(c.start_date))
        throw InputError("synth config: start_date must be YYYY-MM-DD");
}

/// Trading days: consecutive weekdays from start_date.
std::vector<int64_t> session_days(const SynthConfig& cfg) {
    std::vector<int64_t> days;
    days.reserve(static_cast<size_t>(cfg.n_days));
    int64_t d = *parse_date(cfg.start_date);
    while (days.size() < static_cast<size_t>(cfg.n_days)) {
        const int weekday = static_cast<int>(((d % 7) + 7 + 4) % 7);  // 0 = Sunday
        if (weekday != 0 && weekday != 6) days.push_back(d);
        ++d;
    }
    return days;
}

struct TradeDraw {
    int64_t t_ms = 0;  // intraday, full session span
    int64_t size = 0;
    int buyer = 0;  // firm pool index
    int seller = 0;
    bool buyer_initiated = true;
    bool retained = false;
};

struct MetaState {
    int days_left = 0;
    bool buying = true;
    int firm = -1;
};

struct DayDraw {
    std::vector<TradeDraw> trades;
    std::vector<int> active_firms;
};

int firm_pool_size(const SynthConfig& cfg) { return cfg.firms_per_day_max * 3 / 2 + 2; }

/// Advance the metaorder state for one day. Pure function of
/// (seed, stock, day) and the incoming state, so pass A and pass B replay
/// identical decisions.
void step_metaorder(const SynthConfig& cfg, uint64_t seed, int stock, int day,
                    MetaState& meta) {
    if (meta.days_left > 0) return;
    Rng rng(derive_seed(seed, static_cast<uint64_t>(stock), static_cast<uint64_t>(day),
                        kStreamMeta));
    if (cfg.metaorder.participation > 0.0 &&
        rng.next_bernoulli(cfg.metaorder.start_probability)) {
        meta.days_left = cfg.metaorder.horizon_days;
        meta.buying = rng.next_bernoulli(0.5);
        meta.firm = static_cast<int>(rng.next_int(0, firm_pool_size(cfg) - 1));
    }
}

DayDraw draw_day_flow(const SynthConfig& cfg, uint64_t seed, int stock, int day,
                      const MetaState& meta) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(stock), static_cast<uint64_t>(day),
                        kStreamFlow));
    DayDraw out;
    const int n_firms = static_cast<int>(
        rng.next_int(cfg.firms_per_day_min, cfg.firms_per_day_max));
    const int pool = firm_pool_size(cfg);

    // Partial Fisher-Yates over the firm pool.
    std::vector<int> idx(static_cast<size_t>(pool));
    for (int i = 0; i < pool; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = 0; i < n_firms; ++i) {
        const auto j = static_cast<size_t>(rng.next_int(i, pool - 1));
        std::swap(idx[static_cast<size_t>(i)], idx[j]);
    }
    out.active_firms.assign(idx.begin(), idx.begin() + n_firms);
    const bool meta_active = meta.days_left > 0;
    if (meta_active &&
        std::find(out.active_firms.begin(), out.active_firms.end(), meta.firm) ==
            out.active_firms.end()) {
        out.active_firms.back() = meta.firm;
    }

    const auto n_trades = rng.next_int(cfg.trades_per_day_min, cfg.trades_per_day_max);
    std::vector<int64_t> times(static_cast<size_t>(n_trades));
    for (auto& t : times) t = kOpenMs + rng.next_int(0, kCloseMs - kOpenMs);
    std::sort(times.begin(), times.end());

    // Heavy-tailed per-day participation per firm and side. With uniform
    // selection every active firm would hit both sides of a thousand-trade
    // day and the firm-count imbalance would be identically zero.
    const size_t n_active = out.active_firms.size();
    std::vector<double> buy_cdf(n_active), sell_cdf(n_active);
    double buy_total = 0.0, sell_total = 0.0;
    for (size_t i = 0; i < n_active; ++i) {
        buy_total += rng.next_lognormal(0.0, 1.3);
        sell_total += rng.next_lognormal(0.0, 1.3);
        buy_cdf[i] = buy_total;
        sell_cdf[i] = sell_total;
    }
    const auto pick = [&](const std::vector<double>& cdf, double total) {
        const double u = rng.next_double() * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const size_t idx = std::min(static_cast<size_t>(it - cdf.begin()), n_active - 1);
        return out.active_firms[idx];
    };

    out.trades.resize(static_cast<size_t>(n_trades));
    for (size_t i = 0; i < out.trades.size(); ++i) {
        TradeDraw& tr = out.trades[i];
        tr.t_ms = times[i];
        tr.size = std::max<int64_t>(
            1, std::llround(rng.next_lognormal(cfg.size_log_mu, cfg.size_log_sigma)));
        tr.buyer = pick(buy_cdf, buy_total);
        tr.seller = pick(sell_cdf, sell_total);
        tr.buyer_initiated = rng.next_bernoulli(0.5);
        if (meta_active && rng.next_bernoulli(cfg.metaorder.participation)) {
            if (meta.buying) tr.buyer = meta.firm;
            else tr.seller = meta.firm;
        }
        tr.retained = tr.t_ms >= kRetainLo && tr.t_ms <= kRetainHi;
    }
    return out;
}

struct DayFeatures {
    double e_b = 0.0, e_s = 0.0;
    double dM = 0.0, dV = 0.0, dN = 0.0;
    int n_retained = 0;
};

/// Features over the retained (trim-filtered) trades, mirroring what the
/// ingest pipeline will compute. Volumes here are share-based; intraday
/// price variation perturbs the notional-based pipeline values only at the
/// ppm level.
DayFeatures day_features(const DayDraw& day, int pool) {
    DayFeatures f;
    std::vector<double> buy_vol(static_cast<size_t>(pool), 0.0);
    std::vector<double> sell_vol(static_cast<size_t>(pool), 0.0);
    double m_b = 0, m_s = 0, v_b = 0, v_s = 0;
    for (const TradeDraw& t : day.trades) {
        if (!t.retained) continue;
        ++f.n_retained;
        const auto sz = static_cast<double>(t.size);
        buy_vol[static_cast<size_t>(t.buyer)] += sz;
        sell_vol[static_cast<size_t>(t.seller)] += sz;
        if (t.buyer_initiated) {
            m_b += 1.0;
            v_b += sz;
        } else {
            m_s += 1.0;
            v_s += sz;
        }
    }
    if (f.n_retained == 0) return f;

    const auto entropy_of = [](const std::vector<double>& vol) {
        std::vector<double> w;
        double total = 0.0;
        for (double v : vol) total += v;
        for (double v : vol)
            if (v > 0.0) w.push_back(v / total);
        return std::pair{entropy_concentration(w), w.size()};
    };
    const auto [eb, nb] = entropy_of(buy_vol);
    const auto [es, ns] = entropy_of(sell_vol);
    f.e_b = eb;
    f.e_s = es;
    f.dM = (m_b - m_s) / (m_b + m_s);
    f.dV = (v_b - v_s) / (v_b + v_s);
    f.dN = (static_cast<double>(nb) - static_cast<double>(ns)) /
           (static_cast<double>(nb) + static_cast<double>(ns));
    return f;
}

double regime_offset(const SynthConfig::Impact& impact, RegimeLabel label) {
    switch (label) {
        case RegimeLabel::ConcBuyConcSell: return impact.offset_conc_buy_conc_sell;
        case RegimeLabel::ConcBuyDiluteSell: return impact.offset_conc_buy_dilute_sell;
        case RegimeLabel::DiluteBuyConcSell: return impact.offset_dilute_buy_conc_sell;
        case RegimeLabel::DiluteBuyDiluteSell: return impact.offset_dilute_buy_dilute_sell;
        case RegimeLabel::Unclassified: return 0.0;
    }
    return 0.0;
}

struct PlantedReturns {
    std::vector<std::vector<double>> r_bps;  // [stock][day]
    double noise_sigma = 0.0;
};

/// Standardize features per stock, label regimes from pooled quantiles,
/// calibrate noise if requested and produce every day's planted return.
PlantedReturns plant_returns(const SynthConfig& cfg, uint64_t seed,
                             std::vector<std::vector<DayFeatures>>& features) {
    const int n_stocks = cfg.n_stocks;
    const int n_days = cfg.n_days;

    std::vector<double> pooled;
    pooled.reserve(static_cast<size_t>(n_stocks) * n_days * 2);
    for (const auto& stock : features) {
        for (const auto& f : stock) {
            pooled.push_back(f.e_b);
            pooled.push_back(f.e_s);
        }
    }
    const double q_lo = stats::quantile_type7(pooled, cfg.impact.regime_q_low);
    const double q_hi = stats::quantile_type7(pooled, cfg.impact.regime_q_high);

    PlantedReturns out;
    out.r_bps.assign(static_cast<size_t>(n_stocks), std::vector<double>());
    std::vector<std::vector<double>> signal(static_cast<size_t>(n_stocks));
    std::vector<double> all_signal;
    all_signal.reserve(static_cast<size_t>(n_stocks) * n_days);

    for (int s = 0; s < n_stocks; ++s) {
        const auto& rows = features[static_cast<size_t>(s)];
        std::vector<double> de(rows.size()), dm(rows.size()), dv(rows.size()), dn(rows.size());
        for (size_t d = 0; d < rows.size(); ++d) {
            de[d] = rows[d].e_b - rows[d].e_s;
            dm[d] = rows[d].dM;
            dv[d] = rows[d].dV;
            dn[d] = rows[d].dN;
        }
        const double sd_de = stats::sample_sd(de);
        const double sd_dm = stats::sample_sd(dm);
        const double sd_dv = stats::sample_sd(dv);
        const double sd_dn = stats::sample_sd(dn);
        if (!(sd_de > 0.0 && sd_dm > 0.0 && sd_dv > 0.0 && sd_dn > 0.0))
            throw DomainError("synth: degenerate feature variance for stock " +
                              std::to_string(s) + "; widen the config ranges");
        auto& sig = signal[static_cast<size_t>(s)];
        sig.resize(rows.size());
        for (size_t d = 0; d < rows.size(); ++d) {
            const RegimeLabel label = classify_regime(rows[d].e_b, rows[d].e_s, q_lo, q_hi);
            sig[d] = cfg.impact.a_E * (de[d] / sd_de) + cfg.impact.a_M * (dm[d] / sd_dm) +
                     cfg.impact.a_V * (dv[d] / sd_dv) + cfg.impact.a_N * (dn[d] / sd_dn) +
                     regime_offset(cfg.impact, label);
            all_signal.push_back(sig[d]);
        }
    }

    out.noise_sigma = cfg.noise_sigma_bps;
    if (cfg.target_r2) {
        const double sd_sig = stats::sample_sd(all_signal);
        out.noise_sigma = sd_sig * std::sqrt((1.0 - *cfg.target_r2) / *cfg.target_r2);
    }

    for (int s = 0; s < n_stocks; ++s) {
        auto& dest = out.r_bps[static_cast<size_t>(s)];
        dest.resize(static_cast<size_t>(n_days));
        for (int d = 0; d < n_days; ++d) {
            Rng noise(derive_seed(seed, static_cast<uint64_t>(s), static_cast<uint64_t>(d),
                                  kStreamNoise));
            dest[static_cast<size_t>(d)] =
                signal[static_cast<size_t>(s)][static_cast<size_t>(d)] +
                out.noise_sigma * noise.next_normal();
        }
    }
    return out;
}

std::string stock_symbol(int stock) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "SYN%02d", stock);
    return buf;
}

std::string firm_code(int stock, int pool_index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "M%05d", stock * 1000 + pool_index);
    return buf;
}

// Hot-loop formatting: hand-rolled digits instead of snprintf. The tape for
// a desk-scale run has tens of millions of rows.
inline char* put_uint(char* p, uint64_t v) {
    char tmp[20];
    int n = 0;
    do {
        tmp[n++] = static_cast<char>('0' + v % 10);
        v /= 10;
    } while (v != 0);
    while (n > 0) *p++ = tmp[--n];
    return p;
}

inline char* put_fixed_digits(char* p, int64_t v, int digits) {
    for (int i = digits - 1; i >= 0; --i) {
        p[i] = static_cast<char>('0' + v % 10);
        v /= 10;
    }
    return p + digits;
}

/// "HH:MM:SS.mmmZ" from intraday milliseconds.
inline char* put_time(char* p, int64_t intraday_ms) {
    p = put_fixed_digits(p, intraday_ms / kMsPerHour, 2);
    *p++ = ':';
    p = put_fixed_digits(p, (intraday_ms / kMsPerMinute) % 60, 2);
    *p++ = ':';
    p = put_fixed_digits(p, (intraday_ms / kMsPerSecond) % 60, 2);
    *p++ = '.';
    p = put_fixed_digits(p, intraday_ms % 1000, 3);
    *p++ = 'Z';
    return p;
}

/// Price carried as integer 1e-4 GBP ticks; written as a fixed 4-decimal.
inline char* put_price_e4(char* p, int64_t e4) {
    p = put_uint(p, static_cast<uint64_t>(e4 / 10000));
    *p++ = '.';
    return put_fixed_digits(p, e4 % 10000, 4);
}

}  // namespace

SynthConfig parse_synth_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("synth config: invalid JSON: ") + e.what());
    }
    SynthConfig c;
    try {
        c.n_stocks = j.value("n_stocks", c.n_stocks);
        c.n_days = j.value("n_days", c.n_days);
        c.start_date = j.value("start_date", c.start_date);
        if (j.contains("firms_per_day")) {
            c.firms_per_day_min = j["firms_per_day"].at(0).get<int>();
            c.firms_per_day_max = j["firms_per_day"].at(1).get<int>();
        }
        if (j.contains("trades_per_day")) {
            c.trades_per_day_min = j["trades_per_day"].at(0).get<int>();
            c.trades_per_day_max = j["trades_per_day"].at(1).get<int>();
        }
        if (j.contains("order_size")) {
            c.size_log_mu = j["order_size"].value("log_mu", c.size_log_mu);
            c.size_log_sigma = j["order_size"].value("log_sigma", c.size_log_sigma);
        }
        if (j.contains("metaorder")) {
            const auto& m = j["metaorder"];
            c.metaorder.start_probability =
                m.value("start_probability", c.metaorder.start_probability);
            c.metaorder.participation = m.value("participation", c.metaorder.participation);
            c.metaorder.horizon_days = m.value("horizon_days", c.metaorder.horizon_days);
        }
        if (j.contains("impact")) {
            const auto& im = j["impact"];
            c.impact.a_E = im.value("a_E", c.impact.a_E);
            c.impact.a_M = im.value("a_M", c.impact.a_M);
            c.impact.a_V = im.value("a_V", c.impact.a_V);
            c.impact.a_N = im.value("a_N", c.impact.a_N);
            if (im.contains("regime_offsets")) {
                const auto& ro = im["regime_offsets"];
                c.impact.offset_conc_buy_conc_sell =
                    ro.value("conc_buy_conc_sell", 0.0);
                c.impact.offset_conc_buy_dilute_sell =
                    ro.value("conc_buy_dilute_sell", 0.0);
                c.impact.offset_dilute_buy_conc_sell =
                    ro.value("dilute_buy_conc_sell", 0.0);
                c.impact.offset_dilute_buy_dilute_sell =
                    ro.value("dilute_buy_dilute_sell", 0.0);
            }
            if (im.contains("regime_quantiles")) {
                c.impact.regime_q_low = im["regime_quantiles"].at(0).get<double>();
                c.impact.regime_q_high = im["regime_quantiles"].at(1).get<double>();
            }
        }
        if (j.contains("noise")) {
            c.noise_sigma_bps = j["noise"].value("sigma_bps", c.noise_sigma_bps);
            if (j["noise"].contains("target_r2") && !j["noise"]["target_r2"].is_null())
                c.target_r2 = j["noise"]["target_r2"].get<double>();
        }
        if (j.contains("panel_correlation")) {
            const auto& pc = j["panel_correlation"];
            c.corr_dE_dN = pc.value("dE_dN", c.corr_dE_dN);
            c.corr_dM_dV = pc.value("dM_dV", c.corr_dM_dV);
            c.corr_dV_dN = pc.value("dV_dN", c.corr_dV_dN);
            c.corr_dE_dM = pc.value("dE_dM", c.corr_dE_dM);
            c.corr_dE_dV = pc.value("dE_dV", c.corr_dE_dV);
            c.corr_dM_dN = pc.value("dM_dN", c.corr_dM_dN);
        }
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw InputError(std::string("synth config: ") + e.what());
    }
    validate_config(c);
    return c;
}

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open synth config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_synth_config(text);
}

SynthSummary generate_tape(const SynthConfig& cfg, uint64_t seed, std::ostream& out) {
    validate_config(cfg);
    const std::vector<int64_t> days = session_days(cfg);
    const int pool = firm_pool_size(cfg);

    // Pass A: replay every stock-day's flow and collect features. Stocks are
    // independent streams, so split them across two workers.
    std::vector<std::vector<DayFeatures>> features(static_cast<size_t>(cfg.n_stocks));
    const auto pass_a = [&](int lo, int hi) {
        for (int s = lo; s < hi; ++s) {
            auto& rows = features[static_cast<size_t>(s)];
            rows.resize(static_cast<size_t>(cfg.n_days));
            MetaState meta;
            for (int d = 0; d < cfg.n_days; ++d) {
                step_metaorder(cfg, seed, s, d, meta);
                const DayDraw day = draw_day_flow(cfg, seed, s, d, meta);
                rows[static_cast<size_t>(d)] = day_features(day, pool);
                if (meta.days_left > 0) --meta.days_left;
            }
        }
    };
    if (cfg.n_stocks >= 4) {
        const int mid = cfg.n_stocks / 2;
        auto fut = std::async(std::launch::async, pass_a, 0, mid);
        pass_a(mid, cfg.n_stocks);
        fut.get();
    } else {
        pass_a(0, cfg.n_stocks);
    }

    const PlantedReturns planted = plant_returns(cfg, seed, features);

    // Pass B: replay the same flow, lay prices over it and emit the tape,
    // grouped by symbol and time-ordered within each day.
    out << "timestamp,symbol,price,size,buyer_firm,seller_firm,aggressor\n";
    SynthSummary summary;
    summary.sessions = static_cast<size_t>(cfg.n_stocks) * static_cast<size_t>(cfg.n_days);
    summary.realized_noise_sigma_bps = planted.noise_sigma;

    std::string buffer;
    buffer.reserve(1 << 22);
    char line[160];

    for (int s = 0; s < cfg.n_stocks; ++s) {
        const std::string symbol = stock_symbol(s);
        std::vector<std::string> firm_names(static_cast<size_t>(pool));
        for (int i = 0; i < pool; ++i) firm_names[static_cast<size_t>(i)] = firm_code(s, i);

        Rng stock_rng(derive_seed(seed, static_cast<uint64_t>(s), 0, kStreamStock));
        int64_t open_e4 = std::llround((1.0 + 29.0 * stock_rng.next_double()) * 1e4);

        MetaState meta;
        for (int d = 0; d < cfg.n_days; ++d) {
            step_metaorder(cfg, seed, s, d, meta);
            const DayDraw day = draw_day_flow(cfg, seed, s, d, meta);
            if (meta.days_left > 0) --meta.days_left;

            std::vector<size_t> retained;
            retained.reserve(day.trades.size());
            for (size_t i = 0; i < day.trades.size(); ++i)
                if (day.trades[i].retained) retained.push_back(i);

            const double r_frac =
                planted.r_bps[static_cast<size_t>(s)][static_cast<size_t>(d)] / 1e4;
            int64_t close_e4 =
                std::llround(static_cast<double>(open_e4) * (1.0 + r_frac));
            close_e4 = std::max<int64_t>(close_e4, 100);  // 1 penny floor

            // Head and tail slices sit at flat prices so the measured
            // head/tail VWAP return equals the planted return; the middle
            // ramps linearly between them.
            const size_t n_ret = retained.size();
            const size_t m =
                std::max<size_t>(1, static_cast<size_t>(0.10 * static_cast<double>(n_ret)));
            std::vector<int64_t> price_e4(day.trades.size(),
                                          open_e4);  // trim-zone prices track the path
            if (n_ret >= 2 && n_ret > 2 * m) {
                const double span = static_cast<double>(n_ret - 2 * m + 1);
                for (size_t k = 0; k < n_ret; ++k) {
                    int64_t p;
                    if (k < m) p = open_e4;
                    else if (k >= n_ret - m) p = close_e4;
                    else
                        p = open_e4 +
                            std::llround(static_cast<double>(close_e4 - open_e4) *
                                         (static_cast<double>(k - m + 1) / span));
                    price_e4[retained[k]] = p;
                }
            } else {
                for (size_t k = 0; k < n_ret; ++k)
                    price_e4[retained[k]] = k < n_ret / 2 ? open_e4 : close_e4;
            }
            // Padding trades after the last retained one follow the close.
            const int64_t last_ret_t = n_ret > 0 ? day.trades[retained.back()].t_ms : kCloseMs;
            for (size_t i = 0; i < day.trades.size(); ++i) {
                if (!day.trades[i].retained && day.trades[i].t_ms > last_ret_t)
                    price_e4[i] = close_e4;
            }

            const std::string date_prefix = format_date(days[static_cast<size_t>(d)]) + "T";

            for (size_t i = 0; i < day.trades.size(); ++i) {
                const TradeDraw& t = day.trades[i];
                char* p = line;
                std::memcpy(p, date_prefix.data(), date_prefix.size());
                p += date_prefix.size();
                p = put_time(p, t.t_ms);
                *p++ = ',';
                std::memcpy(p, symbol.data(), symbol.size());
                p += symbol.size();
                *p++ = ',';
                p = put_price_e4(p, price_e4[i]);
                *p++ = ',';
                p = put_uint(p, static_cast<uint64_t>(t.size));
                *p++ = ',';
                const std::string& bf = firm_names[static_cast<size_t>(t.buyer)];
                std::memcpy(p, bf.data(), bf.size());
                p += bf.size();
                *p++ = ',';
                const std::string& sf = firm_names[static_cast<size_t>(t.seller)];
                std::memcpy(p, sf.data(), sf.size());
                p += sf.size();
                *p++ = ',';
                *p++ = t.buyer_initiated ? 'B' : 'S';
                *p++ = '\n';
                buffer.append(line, static_cast<size_t>(p - line));
                ++summary.trades_written;
            }
            if (buffer.size() > (1 << 21)) {
                out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
                buffer.clear();
            }
            open_e4 = close_e4;
        }
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    out.flush();
    return summary;
}

Panel generate_panel(const SynthConfig& cfg, uint64_t seed) {
    validate_config(cfg);

    Eigen::Matrix4d corr;
    // Order: dE, dM, dV, dN.
    corr << 1.0, cfg.corr_dE_dM, cfg.corr_dE_dV, cfg.corr_dE_dN,
        cfg.corr_dE_dM, 1.0, cfg.corr_dM_dV, cfg.corr_dM_dN,
        cfg.corr_dE_dV, cfg.corr_dM_dV, 1.0, cfg.corr_dV_dN,
        cfg.corr_dE_dN, cfg.corr_dM_dN, cfg.corr_dV_dN, 1.0;
    const Eigen::LLT<Eigen::Matrix4d> llt(corr);
    if (llt.info() != Eigen::Success)
        throw InputError("synth config: panel correlation target is not positive definite");
    const Eigen::Matrix4d chol = llt.matrixL();

    const std::vector<int64_t> days = session_days(cfg);
    const size_t n_rows = static_cast<size_t>(cfg.n_stocks) * static_cast<size_t>(cfg.n_days);

    Panel panel;
    panel.standardized = true;
    panel.market_adjustment = "synthetic";
    panel.rows.reserve(n_rows);

    struct Draw {
        double dE, dM, dV, dN, e_b, e_s, g_b, g_s, dG;
    };
    std::vector<Draw> draws;
    draws.reserve(n_rows);
    for (size_t row = 0; row < n_rows; ++row) {
        Rng rng(derive_seed(seed, row, 0, kStreamPanel));
        Eigen::Vector4d z(rng.next_normal(), rng.next_normal(), rng.next_normal(),
                          rng.next_normal());
        const Eigen::Vector4d x = chol * z;
        Draw dr;
        dr.dE = x[0];
        dr.dM = x[1];
        dr.dV = x[2];
        dr.dN = x[3];
        // Concentration levels consistent with the imbalance draw; the
        // common level g moves both sides together.
        const double g = rng.next_normal();
        constexpr double kLevelMu = 0.45, kLevelSd = 0.08;
        dr.e_b = std::clamp(kLevelMu + kLevelSd * (g + 0.5 * dr.dE), 0.001, 0.999);
        dr.e_s = std::clamp(kLevelMu + kLevelSd * (g - 0.5 * dr.dE), 0.001, 0.999);
        dr.g_b = std::clamp(0.55 + 0.85 * (dr.e_b - kLevelMu) + 0.02 * rng.next_normal(),
                            0.001, 0.999);
        dr.g_s = std::clamp(0.55 + 0.85 * (dr.e_s - kLevelMu) + 0.02 * rng.next_normal(),
                            0.001, 0.999);
        dr.dG = 0.9 * dr.dE + 0.436 * rng.next_normal();
        draws.push_back(dr);
    }

    std::vector<double> pooled;
    pooled.reserve(n_rows * 2);
    for (const Draw& d : draws) {
        pooled.push_back(d.e_b);
        pooled.push_back(d.e_s);
    }
    const double q_lo = stats::quantile_type7(pooled, cfg.impact.regime_q_low);
    const double q_hi = stats::quantile_type7(pooled, cfg.impact.regime_q_high);

    std::vector<double> signal(n_rows);
    for (size_t row = 0; row < n_rows; ++row) {
        const Draw& d = draws[row];
        const RegimeLabel label = classify_regime(d.e_b, d.e_s, q_lo, q_hi);
        signal[row] = cfg.impact.a_E * d.dE + cfg.impact.a_M * d.dM + cfg.impact.a_V * d.dV +
                      cfg.impact.a_N * d.dN + regime_offset(cfg.impact, label);
    }
    double noise_sigma = cfg.noise_sigma_bps;
    if (cfg.target_r2) {
        const double sd_sig = stats::sample_sd(signal);
        noise_sigma = sd_sig * std::sqrt((1.0 - *cfg.target_r2) / *cfg.target_r2);
    }

    for (size_t row = 0; row < n_rows; ++row) {
        const int s = static_cast<int>(row / static_cast<size_t>(cfg.n_days));
        const int d = static_cast<int>(row % static_cast<size_t>(cfg.n_days));
        Rng noise(derive_seed(seed, row, 1, kStreamPanel));
        SessionFeatures r;
        r.symbol = stock_symbol(s);
        r.day_index = days[static_cast<size_t>(d)];
        r.session_id = format_date(r.day_index);
        const Draw& dr = draws[row];
        r.dE = dr.dE;
        r.dM = dr.dM;
        r.dV = dr.dV;
        r.dN = dr.dN;
        r.dG = dr.dG;
        r.E_b = dr.e_b;
        r.E_s = dr.e_s;
        r.G_b = dr.g_b;
        r.G_s = dr.g_s;
        r.dP_bps = signal[row] + noise_sigma * noise.next_normal();
        panel.rows.push_back(std::move(r));
        ++panel.exclusions.included;
    }
    return panel;
}

}  // namespace conc
