#pragma once

#include <span>
#include <utility>
#include <vector>

#include "conc/tape.hpp"

namespace conc {

enum class Side : uint8_t { Buy, Sell };

/// Per-firm volume fractions on one side of a session. Firms with zero
/// volume on the side are never stored, so N counts active firms only and
/// every stored fraction is > 0.
struct FirmFractions {
    Side side = Side::Buy;
    std::vector<std::pair<FirmId, double>> fractions;  // ascending firm id
    size_t n() const { return fractions.size(); }
    std::vector<double> values() const;
    double max_fraction() const;
};

struct ConcentrationScores {
    double gini = 0.0;
    double entropy = 0.0;
};

/// Side volume divided by total session notional. Throws DomainError on an
/// empty session.
FirmFractions volume_fractions(const SessionTape& session, Side side);

/// Gini index of a positive fraction vector via the sorted rank form;
/// equals the pairwise mean-absolute-difference definition (the O(N^2)
/// test oracle) and ranges over [0, (N-1)/N].
double gini(std::span<const double> fractions);

/// Entropy-based concentration: 1 - H(w)/ln N, natural logs. 0 for uniform
/// fractions, and defined as exactly 1 for a single firm (ln N = 0 there,
/// and one firm is full concentration).
double entropy_concentration(std::span<const double> fractions);

ConcentrationScores concentration_scores(const FirmFractions& f);

/// Largest buy/sell fraction observed in one session.
struct DominanceInputs {
    double max_buy_fraction = 0.0;
    double max_sell_fraction = 0.0;
};

/// Fraction of sessions where some firm took more than `threshold` of the
/// buying or of the selling. Throws DomainError on an empty panel.
double dominance_frequency(std::span<const DominanceInputs> sessions, double threshold = 0.25);

}  // namespace conc
