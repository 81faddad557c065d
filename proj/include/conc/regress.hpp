#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "conc/flow.hpp"

namespace conc {

/// OLS fit with classical homoskedastic errors and two-sided normal
/// p-values. The solve goes through a rank-revealing column-pivoted QR;
/// rank deficiency is fatal and names the dependent column.
struct FitResult {
    std::vector<std::string> names;  // "intercept" first when present
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::VectorXd p;
    double r2 = 0.0;
    int n = 0;
    bool intercept = false;
    Eigen::VectorXd residuals;
    std::map<std::string, double> r2_single;
    std::map<std::string, double> r2_partial;

    double coef_of(const std::string& name) const;
    double se_of(const std::string& name) const;
};

FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  std::vector<std::string> names, bool intercept = true);

/// R_S^2 (single-variable fit) and R_P^2 = (R^2 - R̂^2)/(1 - R̂^2) per
/// regressor, written into fit.r2_single / fit.r2_partial.
void fit_diagnostics(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, FitResult& fit);

struct BootstrapResult {
    int n_reps = 0;
    uint64_t seed = 0;
    std::vector<std::string> names;
    std::vector<double> p_values;    // fraction of |null coef| >= |observed|
    std::vector<double> null_sigma;  // sd of the null coefficient draws
    std::vector<std::string> warnings;
};

/// Shuffle-the-response bootstrap: the response column is permuted per rep
/// (regressors intact), the model refit, and the observed coefficients
/// ranked against the null draws. Per-rep seeds derive from (seed, rep), so
/// results do not depend on thread count.
BootstrapResult bootstrap_null(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const FitResult& observed, int n_reps, uint64_t seed);

struct PartialFit {
    double eta = 0.0;
    double se = 0.0;
    double r2 = 0.0;
    Eigen::VectorXd price_residuals;  // returns with routing effects removed
    Eigen::VectorXd conc_residuals;   // concentration with routing effects removed
};

/// Two-stage partial regression: stage one removes (dV, dN, dM) from both
/// the returns and the concentration imbalance; stage two regresses the
/// residuals on each other. By Frisch-Waugh-Lovell, eta equals the
/// full-model dE coefficient exactly; callers assert that identity.
PartialFit two_stage_partial(const Panel& panel);

enum class RegimeLabel : uint8_t {
    ConcBuyConcSell,
    ConcBuyDiluteSell,
    DiluteBuyConcSell,
    DiluteBuyDiluteSell,
    Unclassified,
};

std::string_view regime_name(RegimeLabel r);

/// Row rule shared by the estimator and the synthetic generator: a side is
/// concentrated strictly above hi_value, dilute strictly below lo_value;
/// any mid-range side leaves the row Unclassified.
RegimeLabel classify_regime(double e_buy, double e_sell, double lo_value, double hi_value);

struct RegimeAssignment {
    std::vector<RegimeLabel> labels;  // aligned with panel rows
    double q_low_value = 0.0;         // threshold at the low quantile
    double q_high_value = 0.0;        // threshold at the high quantile
    size_t counts[5] = {0, 0, 0, 0, 0};
};

/// Classify each row by side concentration against pooled quantiles of the
/// merged E_b/E_s scores. A side is concentrated above the high quantile,
/// dilute below the low one; rows with any mid-range side stay
/// Unclassified and act as the regression baseline.
RegimeAssignment regime_classify(const Panel& panel, double q_low = 0.30,
                                 double q_high = 0.70);

/// Eq-6-style fit with the continuous concentration imbalance replaced by
/// the four regime dummies; no global intercept, so each dummy reads as a
/// conditional mean against the unclassified baseline.
FitResult dummy_regression(const Panel& panel, const RegimeAssignment& regimes,
                           std::vector<std::string>* warnings = nullptr);

/// Design-matrix helper: panel columns in [dE, dM, dV, dN] order.
Eigen::MatrixXd panel_design(const Panel& panel);
Eigen::VectorXd panel_response(const Panel& panel);

FitResult impact_fit(const Panel& panel, bool intercept = true);

}  // namespace conc
