#include "conc/concentration.hpp"

#include <algorithm>
#include <cmath>

#include "conc/errors.hpp"
#include "conc/kernels/kernels.hpp"

namespace conc {

std::vector<double> FirmFractions::values() const {
    std::vector<double> v;
    v.reserve(fractions.size());
    for (const auto& [firm, w] : fractions) v.push_back(w);
    return v;
}

double FirmFractions::max_fraction() const {
    double m = 0.0;
    for (const auto& [firm, w] : fractions) m = std::max(m, w);
    return m;
}

FirmFractions volume_fractions(const SessionTape& session, Side side) {
    if (session.trades.empty() && session.firm_buy_volume.empty())
        throw DomainError("volume_fractions: no trades in session " + session.session_id);
    const auto& volumes =
        side == Side::Buy ? session.firm_buy_volume : session.firm_sell_volume;
    double total = 0.0;
    for (const auto& [firm, v] : volumes) total += v;
    if (!(total > 0.0))
        throw DomainError("volume_fractions: zero side volume in session " +
                          session.session_id);
    FirmFractions out;
    out.side = side;
    out.fractions.reserve(volumes.size());
    for (const auto& [firm, v] : volumes) {
        if (v > 0.0) out.fractions.emplace_back(firm, v / total);
    }
    return out;
}

double gini(std::span<const double> fractions) {
    const size_t n = fractions.size();
    if (n == 0) throw DomainError("gini: empty fraction vector");
    if (n == 1) return 0.0;
    std::vector<double> sorted(fractions.begin(), fractions.end());
    std::sort(sorted.begin(), sorted.end());
    const double nn = static_cast<double>(n);
    const double rws = kernels::rank_weighted_sum(sorted);
    const double total = kernels::sum(sorted);
    // sum_i (2i - n - 1) w_(i) / n  for ascending w, 1-based i
    return (2.0 * rws - (nn + 1.0) * total) / nn;
}

double entropy_concentration(std::span<const double> fractions) {
    const size_t n = fractions.size();
    if (n == 0) throw DomainError("entropy_concentration: empty fraction vector");
    if (n == 1) return 1.0;  // ln N = 0; a lone firm is full concentration
    // Exactly uniform fractions are exactly zero concentration; skipping the
    // log evaluation keeps that identity bit-exact.
    const auto [mn, mx] = std::minmax_element(fractions.begin(), fractions.end());
    if (*mn == *mx) return 0.0;
    const double h = kernels::neg_xlogx_sum(fractions);
    return 1.0 - h / std::log(static_cast<double>(n));
}

ConcentrationScores concentration_scores(const FirmFractions& f) {
    const std::vector<double> w = f.values();
    return {gini(w), entropy_concentration(w)};
}

double dominance_frequency(std::span<const DominanceInputs> sessions, double threshold) {
    if (sessions.empty()) throw DomainError("dominance_frequency: empty panel");
    size_t hits = 0;
    for (const auto& s : sessions) {
        if (s.max_buy_fraction > threshold || s.max_sell_fraction > threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sessions.size());
}

}  // namespace conc
