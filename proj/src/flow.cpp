#include "conc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "conc/errors.hpp"
#include "conc/kernels/kernels.hpp"
#include "conc/stats.hpp"

namespace conc {

std::vector<double> Panel::column(double SessionFeatures::*field) const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.*field);
    return v;
}

double session_return(const SessionTape& session, double head_frac, double tail_frac) {
    const size_t n = session.trades.size();
    if (n < 2)
        throw DomainError("session_return: fewer than 2 trades in session " +
                          session.session_id);
    const auto slice = [n](double frac) {
        return std::max<size_t>(1, static_cast<size_t>(std::floor(frac * static_cast<double>(n))));
    };
    const size_t head_n = slice(head_frac);
    const size_t tail_n = slice(tail_frac);

    // VWAP weighted by notional over a trade slice.
    const auto vwap = [&](size_t begin, size_t count) {
        double pw = 0.0, w = 0.0;
        for (size_t i = begin; i < begin + count; ++i) {
            const TradeRecord& t = session.trades[i];
            pw += t.price * t.notional;
            w += t.notional;
        }
        return pw / w;
    };
    const double head = vwap(0, head_n);
    const double tail = vwap(n - tail_n, tail_n);
    return 100.0 * (tail - head) / head;
}

Imbalances flow_imbalances(const SessionTape& session) {
    if (session.trades.empty())
        throw DomainError("flow_imbalances: empty session " + session.session_id);
    double m_b = 0.0, m_s = 0.0, v_b = 0.0, v_s = 0.0;
    for (const TradeRecord& t : session.trades) {
        if (t.aggressor == Aggressor::BuyerInitiated) {
            m_b += 1.0;
            v_b += t.notional;
        } else {
            m_s += 1.0;
            v_s += t.notional;
        }
    }
    const auto ratio = [](double b, double s, const char* what) {
        const double denom = b + s;
        if (!(denom > 0.0))
            throw DomainError(std::string("imbalance denominator is zero for ") + what);
        return (b - s) / denom;
    };
    Imbalances out;
    out.dM = ratio(m_b, m_s, "aggressive trade counts");
    out.dV = ratio(v_b, v_s, "aggressive notional");
    out.dN = ratio(static_cast<double>(session.n_buyers()),
                   static_cast<double>(session.n_sellers()), "firm counts");
    return out;
}

IndexReturns load_index_returns(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open index-return file: " + path);
    IndexReturns idx;
    std::string line;
    if (!std::getline(in, line)) throw InputError("index returns: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,return_pct")
        throw InputError("index returns: header must be 'date,return_pct'");
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw InputError("index returns: malformed row at line " + std::to_string(line_no));
        const auto day = parse_date(std::string_view(line).substr(0, comma));
        if (!day)
            throw InputError("index returns: bad date at line " + std::to_string(line_no));
        try {
            idx.by_day[*day] = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw InputError("index returns: bad return at line " + std::to_string(line_no));
        }
    }
    return idx;
}

std::vector<double> market_adjust(std::span<const RawReturn> returns,
                                  const IndexReturns* index) {
    std::vector<double> adjusted(returns.size());

    if (index != nullptr) {
        std::set<int64_t> missing;
        for (const RawReturn& r : returns) {
            if (index->by_day.find(r.day_index) == index->by_day.end())
                missing.insert(r.day_index);
        }
        if (!missing.empty()) {
            std::string msg = "market_adjust: index return missing for dates:";
            for (int64_t d : missing) msg += " " + format_date(d);
            throw InputError(msg);
        }
        for (size_t i = 0; i < returns.size(); ++i)
            adjusted[i] = returns[i].return_pct - index->by_day.at(returns[i].day_index);
    } else {
        // Proxy market: equal-weighted cross-stock mean raw return per day.
        std::map<int64_t, std::pair<double, size_t>> day_totals;
        for (const RawReturn& r : returns) {
            auto& [total, count] = day_totals[r.day_index];
            total += r.return_pct;
            ++count;
        }
        for (size_t i = 0; i < returns.size(); ++i) {
            const auto& [total, count] = day_totals.at(returns[i].day_index);
            adjusted[i] = returns[i].return_pct - total / static_cast<double>(count);
        }
    }

    // Per-stock demeaning; the cross-stock variance is left unchanged.
    std::map<std::string, std::pair<double, size_t>> stock_totals;
    for (size_t i = 0; i < returns.size(); ++i) {
        auto& [total, count] = stock_totals[returns[i].symbol];
        total += adjusted[i];
        ++count;
    }
    std::vector<double> out(returns.size());
    for (size_t i = 0; i < returns.size(); ++i) {
        const auto& [total, count] = stock_totals.at(returns[i].symbol);
        const double demeaned = adjusted[i] - total / static_cast<double>(count);
        out[i] = demeaned * 100.0;  // percent -> bps
    }
    return out;
}

void standardize(Panel& panel) {
    if (panel.standardized) {
        panel.warnings.push_back("standardize: panel already standardized, rescaling again");
    }
    struct Field {
        double SessionFeatures::*member;
        const char* name;
    };
    static constexpr Field kFields[] = {
        {&SessionFeatures::dE, "dE"}, {&SessionFeatures::dG, "dG"},
        {&SessionFeatures::dM, "dM"}, {&SessionFeatures::dV, "dV"},
        {&SessionFeatures::dN, "dN"},
    };

    std::map<std::string, std::vector<size_t>> by_stock;
    for (size_t i = 0; i < panel.rows.size(); ++i)
        by_stock[panel.rows[i].symbol].push_back(i);

    std::set<std::string> dropped;
    for (const auto& [symbol, idx] : by_stock) {
        if (idx.size() < 2) {
            panel.warnings.push_back("standardize: stock " + symbol +
                                     " dropped (fewer than 2 sessions)");
            dropped.insert(symbol);
            continue;
        }
        for (const Field& f : kFields) {
            std::vector<double> col;
            col.reserve(idx.size());
            for (size_t i : idx) col.push_back(panel.rows[i].*f.member);
            const double sd = stats::sample_sd(col);
            if (!(sd > 0.0)) {
                panel.warnings.push_back("standardize: stock " + symbol + " dropped (column " +
                                         f.name + " has zero variance)");
                dropped.insert(symbol);
                break;
            }
        }
    }

    for (const auto& [symbol, idx] : by_stock) {
        if (dropped.count(symbol)) continue;
        for (const Field& f : kFields) {
            std::vector<double> col;
            col.reserve(idx.size());
            for (size_t i : idx) col.push_back(panel.rows[i].*f.member);
            const double sd = stats::sample_sd(col);
            for (size_t i : idx) panel.rows[i].*f.member /= sd;
        }
    }

    if (!dropped.empty()) {
        std::vector<SessionFeatures> kept;
        kept.reserve(panel.rows.size());
        for (auto& row : panel.rows) {
            if (dropped.count(row.symbol)) {
                row.excluded = Exclusion::ZeroVariance;
                ++panel.exclusions.zero_variance;
                --panel.exclusions.included;
                panel.excluded_rows.push_back(std::move(row));
            } else {
                kept.push_back(std::move(row));
            }
        }
        panel.rows = std::move(kept);
    }
    panel.standardized = true;
}

ScatterPair binned_pair(std::span<const double> x, std::span<const double> y, int n_bins,
                        const std::string& x_name, const std::string& y_name) {
    ScatterPair pair;
    pair.x_name = x_name;
    pair.y_name = y_name;
    pair.correlation = stats::pearson(x, y);

    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });

    const size_t bins = std::max<size_t>(1, std::min<size_t>(n_bins, n));
    for (size_t b = 0; b < bins; ++b) {
        const size_t lo = b * n / bins;
        const size_t hi = (b + 1) * n / bins;
        if (hi <= lo) continue;
        double sx = 0.0, sy = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            sx += x[order[i]];
            sy += y[order[i]];
        }
        const auto count = static_cast<double>(hi - lo);
        pair.bin_x_mean.push_back(sx / count);
        pair.bin_y_mean.push_back(sy / count);
        pair.bin_count.push_back(hi - lo);
    }
    return pair;
}

namespace {

Histogram make_histogram(const std::string& name, std::span<const double> x, int n_bins) {
    Histogram h;
    h.name = name;
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    double lo = *mn_it, hi = *mx_it;
    if (lo == hi) hi = lo + 1.0;
    const int bins = std::max(1, n_bins);
    h.counts.assign(bins, 0);
    for (int b = 0; b <= bins; ++b)
        h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / bins);
    for (double v : x) {
        auto b = static_cast<size_t>((v - lo) / (hi - lo) * bins);
        if (b >= static_cast<size_t>(bins)) b = bins - 1;
        ++h.counts[b];
    }
    return h;
}

}  // namespace

ScatterMatrix scatter_matrix(const Panel& panel, int n_bins) {
    ScatterMatrix m;
    if (panel.rows.empty()) throw DomainError("scatter_matrix: empty panel");
    int bins = n_bins;
    if (panel.rows.size() < static_cast<size_t>(n_bins)) {
        bins = static_cast<int>(panel.rows.size());
        m.warnings.push_back("scatter_matrix: fewer rows than bins, reduced to " +
                             std::to_string(bins));
    }

    struct Var {
        const char* name;
        double SessionFeatures::*member;
    };
    static constexpr Var kVars[] = {
        {"dP_bps", &SessionFeatures::dP_bps}, {"dE", &SessionFeatures::dE},
        {"dG", &SessionFeatures::dG},         {"dM", &SessionFeatures::dM},
        {"dV", &SessionFeatures::dV},         {"dN", &SessionFeatures::dN},
    };

    std::vector<std::vector<double>> cols;
    for (const Var& v : kVars) {
        m.names.emplace_back(v.name);
        cols.push_back(panel.column(v.member));
    }
    const size_t k = cols.size();
    m.correlation.assign(k, std::vector<double>(k, 1.0));
    for (size_t i = 0; i < k; ++i) {
        m.histograms.push_back(make_histogram(m.names[i], cols[i], bins));
        for (size_t j = i + 1; j < k; ++j) {
            ScatterPair pair = binned_pair(cols[i], cols[j], bins, m.names[i], m.names[j]);
            m.correlation[i][j] = m.correlation[j][i] = pair.correlation;
            m.pairs.push_back(std::move(pair));
        }
    }
    return m;
}

}  // namespace conc
