#include "conc/acf.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "conc/errors.hpp"
#include "conc/kernels/kernels.hpp"
#include "conc/panel_io.hpp"

namespace conc {

SummandSession make_summands(const FirmFractions& f, std::string session_id,
                             int64_t day_index) {
    SummandSession s;
    s.session_id = std::move(session_id);
    s.day_index = day_index;
    const size_t n = f.n();
    if (n == 0) throw DomainError("make_summands: empty fraction vector");
    s.z.reserve(n);
    if (n == 1) {
        // ln N = 0: a lone firm carries a single zero summand, i.e. the raw
        // normalized entropy of a fully concentrated session is 0.
        s.z.emplace_back(f.fractions[0].first, 0.0);
        s.e_raw = 0.0;
        return s;
    }
    const double log_n = std::log(static_cast<double>(n));
    double total = 0.0;
    for (const auto& [firm, w] : f.fractions) {
        const double zi = -w * std::log(w) / log_n;
        s.z.emplace_back(firm, zi);
        total += zi;
    }
    s.e_raw = total;
    return s;
}

PreparedSeries prepare_summands(const SummandSeries& series) {
    PreparedSeries out;
    out.symbol = series.symbol;
    out.side = series.side;
    const size_t t_len = series.sessions.size();
    if (t_len == 0) throw DomainError("prepare_summands: empty series");
    double mean = 0.0;
    for (const auto& s : series.sessions) mean += s.e_raw;
    mean /= static_cast<double>(t_len);
    out.e_mean = mean;

    out.sessions.reserve(t_len);
    for (const auto& s : series.sessions) {
        SummandSession p;
        p.session_id = s.session_id;
        p.day_index = s.day_index;
        p.z.reserve(s.z.size());
        const double shift = mean / static_cast<double>(s.z.size());
        double total = 0.0;
        for (const auto& [firm, zi] : s.z) {
            const double zp = zi - shift;
            p.z.emplace_back(firm, zp);
            total += zp;
        }
        p.e_raw = total;  // sum of z' = demeaned aggregate
        out.sessions.push_back(std::move(p));
    }
    return out;
}

std::vector<double> concentration_acf(std::span<const double> series, int max_lag) {
    const auto t_len = static_cast<int>(series.size());
    if (max_lag < 1) throw DomainError("concentration_acf: max_lag must be >= 1");
    if (t_len <= max_lag + 1)
        throw DomainError("concentration_acf: series of length " + std::to_string(t_len) +
                          " is too short for max_lag " + std::to_string(max_lag) +
                          " (max usable lag is " + std::to_string(t_len - 2) + ")");
    std::vector<double> centered(series.size());
    const double mean = kernels::sum(series) / static_cast<double>(t_len);
    kernels::subtract_scalar(series, mean, centered);
    const double denom = kernels::sumsq(centered) / static_cast<double>(t_len);
    // Constant series center to rounding dust, not exact zeros.
    const double floor_var = 1e-24 * std::max(1.0, mean * mean);
    if (!(denom > floor_var))
        throw DomainError("concentration_acf: series has zero variance");

    std::vector<double> gamma(static_cast<size_t>(max_lag));
    const std::span<const double> c(centered);
    for (int tau = 1; tau <= max_lag; ++tau) {
        const auto pairs = static_cast<size_t>(t_len - tau);
        const double num =
            kernels::dot(c.first(pairs), c.subspan(static_cast<size_t>(tau), pairs)) /
            static_cast<double>(pairs);
        gamma[static_cast<size_t>(tau - 1)] = num / denom;
    }
    return gamma;
}

AcfDecomposition decompose_prepared(const PreparedSeries& prepared, int max_lag,
                                    bool mask_month_boundaries) {
    const auto t_len = static_cast<int>(prepared.sessions.size());
    if (max_lag < 1) throw DomainError("decompose_acf: max_lag must be >= 1");
    if (t_len <= max_lag + 1)
        throw DomainError("decompose_acf: series of length " + std::to_string(t_len) +
                          " is too short for max_lag " + std::to_string(max_lag));

    std::vector<double> aggregate;
    aggregate.reserve(prepared.sessions.size());
    for (const auto& s : prepared.sessions) aggregate.push_back(s.e_raw);

    const double denom =
        kernels::sumsq(aggregate) / static_cast<double>(t_len);
    const double floor_var = 1e-24 * std::max(1.0, prepared.e_mean * prepared.e_mean);
    if (!(denom > floor_var))
        throw DomainError("decompose_acf: series has zero variance");

    AcfDecomposition out;
    out.max_lag = max_lag;
    out.n_sessions = prepared.sessions.size();

    // Plain-route ACF of the aggregate series. The series is already
    // demeaned, so its mean is ~0; the decomposition identity check below
    // compares this route against the summand route.
    std::span<const double> agg(aggregate);
    std::vector<std::unordered_map<FirmId, double>> firm_maps(prepared.sessions.size());
    for (size_t t = 0; t < prepared.sessions.size(); ++t) {
        for (const auto& [firm, zp] : prepared.sessions[t].z) firm_maps[t].emplace(firm, zp);
    }

    for (int tau = 1; tau <= max_lag; ++tau) {
        const auto pairs = static_cast<size_t>(t_len - tau);
        const double plain_num =
            kernels::dot(agg.first(pairs), agg.subspan(static_cast<size_t>(tau), pairs)) /
            static_cast<double>(pairs);

        double same_total = 0.0;
        double full_total = 0.0;
        for (size_t t = 0; t < pairs; ++t) {
            const size_t u = t + static_cast<size_t>(tau);
            full_total += aggregate[t] * aggregate[u];
            if (mask_month_boundaries &&
                month_key(prepared.sessions[t].day_index) !=
                    month_key(prepared.sessions[u].day_index))
                continue;  // identities unusable across the boundary
            const auto& small =
                prepared.sessions[t].z.size() <= prepared.sessions[u].z.size() ? firm_maps[t]
                                                                               : firm_maps[u];
            const auto& large = &small == &firm_maps[t] ? firm_maps[u] : firm_maps[t];
            for (const auto& [firm, zp] : small) {
                const auto it = large.find(firm);
                if (it != large.end()) same_total += zp * it->second;
            }
        }
        const double same_num = same_total / static_cast<double>(pairs);
        const double cross_num = full_total / static_cast<double>(pairs) - same_num;

        out.gamma.push_back(plain_num / denom);
        out.gamma_same.push_back(same_num / denom);
        out.gamma_cross.push_back(-cross_num / denom);  // sign flip: gamma = same - cross
        out.pair_count.push_back(static_cast<int64_t>(pairs));
    }
    return out;
}

AcfDecomposition decompose_acf(const SummandSeries& series, int max_lag,
                               bool mask_month_boundaries) {
    return decompose_prepared(prepare_summands(series), max_lag, mask_month_boundaries);
}

AcfAverage average_decompositions(std::span<const AcfDecomposition> parts) {
    if (parts.empty()) throw DomainError("average_decompositions: no series");
    AcfAverage avg;
    avg.max_lag = parts[0].max_lag;
    for (const auto& p : parts) {
        if (p.max_lag != avg.max_lag)
            throw DomainError("average_decompositions: mixed max_lag values");
    }
    avg.n_series = parts.size();
    const auto lags = static_cast<size_t>(avg.max_lag);
    avg.gamma.assign(lags, 0.0);
    avg.gamma_same.assign(lags, 0.0);
    avg.gamma_cross.assign(lags, 0.0);
    avg.pair_count.assign(lags, 0);
    const double w = 1.0 / static_cast<double>(parts.size());
    for (const auto& p : parts) {
        for (size_t i = 0; i < lags; ++i) {
            avg.gamma[i] += w * p.gamma[i];
            avg.gamma_same[i] += w * p.gamma_same[i];
            avg.gamma_cross[i] += w * p.gamma_cross[i];
            avg.pair_count[i] += p.pair_count[i];
        }
    }
    avg.band.resize(lags);
    for (size_t i = 0; i < lags; ++i)
        avg.band[i] = avg.pair_count[i] > 0
                          ? 2.0 / std::sqrt(static_cast<double>(avg.pair_count[i]))
                          : 0.0;
    return avg;
}

std::string acf_report_csv(const AcfAverage& avg) {
    // The decomposition identity is a hard gate before anything is emitted.
    for (size_t i = 0; i < avg.gamma.size(); ++i) {
        const double diff = avg.gamma[i] - (avg.gamma_same[i] - avg.gamma_cross[i]);
        if (!(std::fabs(diff) <= 1e-9))
            throw DomainError("acf_report: decomposition identity violated at lag " +
                              std::to_string(i + 1) + " (residual " + std::to_string(diff) +
                              ")");
    }
    std::ostringstream out;
    out << "lag,gamma,gamma_same,gamma_cross,band,pairs,log10_lag,log10_gamma\n";
    for (size_t i = 0; i < avg.gamma.size(); ++i) {
        const double lag = static_cast<double>(i + 1);
        out << (i + 1) << ',' << format_double(avg.gamma[i]) << ','
            << format_double(avg.gamma_same[i]) << ',' << format_double(avg.gamma_cross[i])
            << ',' << format_double(avg.band[i]) << ',' << avg.pair_count[i] << ','
            << format_double(std::log10(lag)) << ',';
        if (avg.gamma[i] > 0.0) out << format_double(std::log10(avg.gamma[i]));
        out << '\n';
    }
    return out.str();
}

}  // namespace conc
