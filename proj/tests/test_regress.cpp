#include <doctest.h>

#include <cmath>

#include "conc/errors.hpp"
#include "conc/regress.hpp"
#include "conc/rng.hpp"
#include "conc/stats.hpp"
#include "conc/synth.hpp"

using namespace conc;

namespace {

Panel random_panel(uint64_t seed, size_t n, double a_E = 25.0, double a_M = -3.0,
                   double a_V = 82.0, double a_N = -61.0, double noise = 150.0) {
    Rng rng(seed);
    Panel p;
    for (size_t i = 0; i < n; ++i) {
        SessionFeatures r;
        r.symbol = "X";
        r.session_id = std::to_string(i);
        r.dE = rng.next_normal();
        r.dG = rng.next_normal();
        r.dM = rng.next_normal();
        r.dV = rng.next_normal();
        r.dN = rng.next_normal();
        r.E_b = 0.45 + 0.08 * rng.next_normal();
        r.E_s = 0.45 + 0.08 * rng.next_normal();
        r.dP_bps = a_E * r.dE + a_M * r.dM + a_V * r.dV + a_N * r.dN +
                   noise * rng.next_normal();
        p.rows.push_back(r);
    }
    p.exclusions.included = n;
    p.standardized = true;
    return p;
}

}  // namespace

TEST_CASE("ols: y = 2x recovered exactly with R2 = 1") {
    Eigen::MatrixXd X(50, 1);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) {
        X(i, 0) = 0.1 * i - 2.0;
        y(i) = 2.0 * X(i, 0);
    }
    const FitResult fit = ols_fit(X, y, {"x"}, true);
    CHECK(fit.coef_of("x") == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::fabs(fit.coef_of("intercept")) < 1e-12);
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ols: residuals are orthogonal to the regressors and mean-zero") {
    Panel p = random_panel(1, 500);
    const FitResult fit = impact_fit(p);
    const Eigen::MatrixXd X = panel_design(p);
    for (int j = 0; j < X.cols(); ++j) {
        const double dot = X.col(j).dot(fit.residuals);
        CHECK(std::fabs(dot) <= 1e-6 * X.col(j).norm() * fit.residuals.norm() + 1e-9);
    }
    CHECK(std::fabs(fit.residuals.mean()) <= 1e-9);
}

TEST_CASE("ols: null coefficients stay within 3 SE in at least 99% of runs") {
    int inside = 0;
    const int runs = 300;
    for (int run = 0; run < runs; ++run) {
        Rng rng(1000 + run);
        Eigen::MatrixXd X(400, 1);
        Eigen::VectorXd y(400);
        for (int i = 0; i < 400; ++i) {
            X(i, 0) = rng.next_normal();
            y(i) = rng.next_normal();  // independent of x
        }
        const FitResult fit = ols_fit(X, y, {"x"}, true);
        if (std::fabs(fit.coef_of("x")) < 3.0 * fit.se_of("x")) ++inside;
    }
    // binomial(300, 0.0027) expects less than one escape
    CHECK(inside >= 294);
}

TEST_CASE("ols: planted panel recovered within 2 SE per coefficient") {
    const Panel p = random_panel(7, 20000);
    const FitResult fit = impact_fit(p);
    const double planted[4] = {25.0, -3.0, 82.0, -61.0};
    const char* names[4] = {"dE", "dM", "dV", "dN"};
    for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(fit.coef_of(names[j]) - planted[j]) < 2.0 * fit.se_of(names[j]));
    }
}

TEST_CASE("ols: rank-deficient design is fatal and names the dependent column") {
    Eigen::MatrixXd X(30, 3);
    Eigen::VectorXd y(30);
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        X(i, 0) = rng.next_normal();
        X(i, 1) = rng.next_normal();
        X(i, 2) = 2.0 * X(i, 0) - X(i, 1);  // dependent
        y(i) = rng.next_normal();
    }
    try {
        (void)ols_fit(X, y, {"a", "b", "c"}, true);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("rank") != std::string::npos);
    }
}

TEST_CASE("ols: too few samples for the parameter count is fatal") {
    Panel p = random_panel(5, 10);
    const RegimeAssignment regimes = regime_classify(p, 0.30, 0.70);
    CHECK_THROWS_AS((void)dummy_regression(p, regimes, nullptr), DomainError);
}

TEST_CASE("diagnostics: single-regressor model has R_S2 = R2 = R_P2") {
    Rng rng(11);
    Eigen::MatrixXd X(300, 1);
    Eigen::VectorXd y(300);
    for (int i = 0; i < 300; ++i) {
        X(i, 0) = rng.next_normal();
        y(i) = 1.5 * X(i, 0) + rng.next_normal();
    }
    FitResult fit = ols_fit(X, y, {"x"}, true);
    fit_diagnostics(X, y, fit);
    CHECK(fit.r2_single.at("x") == doctest::Approx(fit.r2).epsilon(1e-9));
    CHECK(fit.r2_partial.at("x") == doctest::Approx(fit.r2).epsilon(1e-9));
}

TEST_CASE("diagnostics: orthogonal regressors give sum R_S2 = R2") {
    Rng rng(13);
    const int n = 1000;
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) X(i, j) = rng.next_normal();
    for (int j = 0; j < 3; ++j) X.col(j).array() -= X.col(j).mean();
    for (int j = 1; j < 3; ++j)
        for (int k = 0; k < j; ++k)
            X.col(j) -= X.col(k) * (X.col(k).dot(X.col(j)) / X.col(k).squaredNorm());
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
        y(i) = 2.0 * X(i, 0) - 1.0 * X(i, 1) + 0.5 * X(i, 2) + rng.next_normal();
    FitResult fit = ols_fit(X, y, {"a", "b", "c"}, true);
    fit_diagnostics(X, y, fit);
    const double total =
        fit.r2_single.at("a") + fit.r2_single.at("b") + fit.r2_single.at("c");
    CHECK(total == doctest::Approx(fit.r2).epsilon(1e-9));
}

TEST_CASE("diagnostics: R_P2 matches an independent refit computation") {
    Panel p = random_panel(17, 2000);
    const Eigen::MatrixXd X = panel_design(p);
    const Eigen::VectorXd y = panel_response(p);
    FitResult fit = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    fit_diagnostics(X, y, fit);
    const char* names[4] = {"dE", "dM", "dV", "dN"};
    for (int drop = 0; drop < 4; ++drop) {
        Eigen::MatrixXd rest(X.rows(), 3);
        int c = 0;
        std::vector<std::string> rest_names;
        for (int j = 0; j < 4; ++j) {
            if (j == drop) continue;
            rest.col(c++) = X.col(j);
            rest_names.push_back(names[j]);
        }
        const FitResult restricted = ols_fit(rest, y, rest_names, true);
        const double expected = (fit.r2 - restricted.r2) / (1.0 - restricted.r2);
        CHECK(fit.r2_partial.at(names[drop]) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("equivariance: scaling the response scales coefficients and SEs") {
    Panel p = random_panel(19, 800);
    const Eigen::MatrixXd X = panel_design(p);
    const Eigen::VectorXd y = panel_response(p);
    FitResult f1 = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    fit_diagnostics(X, y, f1);
    const double c = -7.25;
    const Eigen::VectorXd cy = c * y;
    FitResult f2 = ols_fit(X, cy, {"dE", "dM", "dV", "dN"}, true);
    fit_diagnostics(X, cy, f2);
    for (int j = 0; j < f1.coef.size(); ++j) {
        CHECK(f2.coef[j] == doctest::Approx(c * f1.coef[j]).epsilon(1e-9));
        CHECK(f2.se[j] == doctest::Approx(std::fabs(c) * f1.se[j]).epsilon(1e-9));
    }
    CHECK(f2.r2 == doctest::Approx(f1.r2).epsilon(1e-9));
    for (const auto& [name, v] : f1.r2_single)
        CHECK(f2.r2_single.at(name) == doctest::Approx(v).epsilon(1e-9));
    for (const auto& [name, v] : f1.r2_partial)
        CHECK(f2.r2_partial.at(name) == doctest::Approx(v).epsilon(1e-9));
}

TEST_CASE("FWL: two-stage eta equals the full-model dE coefficient") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const Panel p = random_panel(seed, 1000);
        const FitResult full = impact_fit(p);
        const PartialFit partial = two_stage_partial(p);
        const double alpha = full.coef_of("dE");
        CHECK(std::fabs(partial.eta - alpha) <= 1e-9 * std::fabs(alpha));
    }
}

TEST_CASE("FWL: concentration orthogonal to routing leaves centered dE") {
    Rng rng(23);
    Panel p;
    const int n = 600;
    Eigen::MatrixXd cols(n, 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) cols(i, j) = rng.next_normal();
    for (int j = 0; j < 4; ++j) cols.col(j).array() -= cols.col(j).mean();
    for (int j = 1; j < 4; ++j)
        for (int k = 0; k < j; ++k)
            cols.col(j) -=
                cols.col(k) * (cols.col(k).dot(cols.col(j)) / cols.col(k).squaredNorm());
    for (int i = 0; i < n; ++i) {
        SessionFeatures r;
        r.symbol = "X";
        r.dE = cols(i, 0);
        r.dV = cols(i, 1);
        r.dN = cols(i, 2);
        r.dM = cols(i, 3);
        r.dP_bps = 10.0 * r.dE + rng.next_normal();
        p.rows.push_back(r);
    }
    const PartialFit partial = two_stage_partial(p);
    for (int i = 0; i < n; ++i)
        CHECK(partial.conc_residuals[i] == doctest::Approx(cols(i, 0)).epsilon(1e-8));
}

TEST_CASE("bootstrap: deterministic given the seed") {
    const Panel p = random_panel(29, 400);
    const Eigen::MatrixXd X = panel_design(p);
    const Eigen::VectorXd y = panel_response(p);
    const FitResult fit = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    const BootstrapResult a = bootstrap_null(X, y, fit, 500, 42);
    const BootstrapResult b = bootstrap_null(X, y, fit, 500, 42);
    CHECK(a.p_values == b.p_values);
    CHECK(a.null_sigma == b.null_sigma);
    const BootstrapResult c = bootstrap_null(X, y, fit, 500, 43);
    CHECK(a.null_sigma != c.null_sigma);
}

TEST_CASE("bootstrap: planted strong effect has p-value 0 at 1000 reps") {
    const Panel p = random_panel(31, 2000);
    const Eigen::MatrixXd X = panel_design(p);
    const Eigen::VectorXd y = panel_response(p);
    const FitResult fit = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    const BootstrapResult boot = bootstrap_null(X, y, fit, 1000, 7);
    for (size_t j = 0; j < boot.names.size(); ++j) {
        if (boot.names[j] == "dM") continue;  // planted at -3, weak by design
        CHECK(boot.p_values[j] == 0.0);
    }
}

TEST_CASE("bootstrap: null sigma tracks the classical standard error within 15%") {
    // The permutation null draws coefficients with variance Var(y)*(X'X)^-1,
    // while the classical SE uses the residual variance; the ratio is
    // 1/sqrt(1-R2). Agreement within 15% therefore holds when the signal is
    // weak (here R2 ~ 0.4%), and on null panels exactly; strongly planted
    // panels inflate the null sigma by construction.
    const Panel p = random_panel(37, 3000, 2.0, -1.0, 6.0, -5.0, 150.0);
    const Eigen::MatrixXd X = panel_design(p);
    const Eigen::VectorXd y = panel_response(p);
    const FitResult fit = ols_fit(X, y, {"dE", "dM", "dV", "dN"}, true);
    const BootstrapResult boot = bootstrap_null(X, y, fit, 1000, 11);
    for (size_t j = 0; j < boot.names.size(); ++j) {
        const double classical = fit.se_of(boot.names[j]);
        CHECK(boot.null_sigma[j] / classical > 0.85);
        CHECK(boot.null_sigma[j] / classical < 1.15);
    }
}

TEST_CASE("regimes: degenerate quantiles are fatal") {
    Panel p = random_panel(41, 100);
    for (auto& r : p.rows) {
        r.E_b = 0.5;
        r.E_s = 0.5;
    }
    CHECK_THROWS_AS((void)regime_classify(p, 0.30, 0.70), DomainError);
}

TEST_CASE("regimes: definition of the four labels") {
    CHECK(classify_regime(0.9, 0.1, 0.3, 0.7) == RegimeLabel::ConcBuyDiluteSell);
    CHECK(classify_regime(0.1, 0.9, 0.3, 0.7) == RegimeLabel::DiluteBuyConcSell);
    CHECK(classify_regime(0.9, 0.9, 0.3, 0.7) == RegimeLabel::ConcBuyConcSell);
    CHECK(classify_regime(0.1, 0.1, 0.3, 0.7) == RegimeLabel::DiluteBuyDiluteSell);
    CHECK(classify_regime(0.5, 0.1, 0.3, 0.7) == RegimeLabel::Unclassified);
    CHECK(classify_regime(0.9, 0.5, 0.3, 0.7) == RegimeLabel::Unclassified);
    // boundaries are strict
    CHECK(classify_regime(0.7, 0.2, 0.3, 0.7) == RegimeLabel::Unclassified);
}

TEST_CASE("regimes: independent uniform sides put ~9% in each pure regime") {
    Rng rng(43);
    Panel p;
    for (int i = 0; i < 20000; ++i) {
        SessionFeatures r;
        r.symbol = "X";
        r.E_b = rng.next_double();
        r.E_s = rng.next_double();
        p.rows.push_back(r);
    }
    const RegimeAssignment a = regime_classify(p, 0.30, 0.70);
    for (int reg = 0; reg < 4; ++reg) {
        const double share =
            static_cast<double>(a.counts[reg]) / static_cast<double>(p.rows.size());
        CHECK(share == doctest::Approx(0.09).epsilon(0.15));
    }
}

TEST_CASE("dummy regression: planted mixed offsets recovered, matched near zero") {
    Rng rng(47);
    Panel p;
    const int n = 20000;
    std::vector<double> pooled;
    for (int i = 0; i < n; ++i) {
        SessionFeatures r;
        r.symbol = "X";
        r.E_b = rng.next_double();
        r.E_s = rng.next_double();
        r.dE = rng.next_normal();
        r.dM = rng.next_normal();
        r.dV = rng.next_normal();
        r.dN = rng.next_normal();
        p.rows.push_back(r);
        pooled.push_back(r.E_b);
        pooled.push_back(r.E_s);
    }
    const double q30 = stats::quantile_type7(pooled, 0.30);
    const double q70 = stats::quantile_type7(pooled, 0.70);
    for (auto& r : p.rows) {
        const RegimeLabel label = classify_regime(r.E_b, r.E_s, q30, q70);
        double offset = 0.0;
        if (label == RegimeLabel::ConcBuyDiluteSell) offset = 35.0;
        if (label == RegimeLabel::DiluteBuyConcSell) offset = -45.0;
        r.dP_bps = -3.0 * r.dM + 82.0 * r.dV - 61.0 * r.dN + offset + 150.0 * rng.next_normal();
    }
    const RegimeAssignment regimes = regime_classify(p, 0.30, 0.70);
    std::vector<std::string> warnings;
    const FitResult fit = dummy_regression(p, regimes, &warnings);
    CHECK(std::fabs(fit.coef_of("conc_buy_dilute_sell") - 35.0) <
          2.0 * fit.se_of("conc_buy_dilute_sell"));
    CHECK(std::fabs(fit.coef_of("dilute_buy_conc_sell") + 45.0) <
          2.0 * fit.se_of("dilute_buy_conc_sell"));
    CHECK(std::fabs(fit.coef_of("conc_buy_conc_sell")) <
          2.0 * fit.se_of("conc_buy_conc_sell"));
    CHECK(std::fabs(fit.coef_of("dilute_buy_dilute_sell")) <
          2.0 * fit.se_of("dilute_buy_dilute_sell"));
    CHECK(warnings.empty());
}

TEST_CASE("dummy regression: mirroring swaps and negates the mixed coefficients") {
    Rng rng(53);
    Panel p;
    const int n = 8000;
    for (int i = 0; i < n; ++i) {
        SessionFeatures r;
        r.symbol = "X";
        r.E_b = rng.next_double();
        r.E_s = rng.next_double();
        r.dM = rng.next_normal();
        r.dV = rng.next_normal();
        r.dN = rng.next_normal();
        r.dE = rng.next_normal();
        r.dP_bps = 50.0 * r.dV + 20.0 * (r.E_b - r.E_s) + 30.0 * rng.next_normal();
        p.rows.push_back(r);
    }
    Panel mirrored = p;
    for (auto& r : mirrored.rows) {
        std::swap(r.E_b, r.E_s);
        r.dE = -r.dE;
        r.dM = -r.dM;
        r.dV = -r.dV;
        r.dN = -r.dN;
        r.dP_bps = -r.dP_bps;
    }
    const RegimeAssignment ra = regime_classify(p, 0.30, 0.70);
    const RegimeAssignment rb = regime_classify(mirrored, 0.30, 0.70);
    const FitResult fa = dummy_regression(p, ra, nullptr);
    const FitResult fb = dummy_regression(mirrored, rb, nullptr);
    CHECK(fb.coef_of("conc_buy_dilute_sell") ==
          doctest::Approx(-fa.coef_of("dilute_buy_conc_sell")).epsilon(1e-9));
    CHECK(fb.coef_of("dilute_buy_conc_sell") ==
          doctest::Approx(-fa.coef_of("conc_buy_dilute_sell")).epsilon(1e-9));
    CHECK(fb.coef_of("dV") == doctest::Approx(fa.coef_of("dV")).epsilon(1e-9));
}

TEST_CASE("dummy regression: warnings for thin regimes") {
    // Quantile thresholds adapt to any score spread, so thin regimes come
    // from small panels: ~9% of 80 rows is below the 10-row floor.
    Panel p = random_panel(59, 80);
    const RegimeAssignment regimes = regime_classify(p, 0.30, 0.70);
    std::vector<std::string> warnings;
    bool fit_ok = true;
    try {
        (void)dummy_regression(p, regimes, &warnings);
    } catch (const DomainError&) {
        fit_ok = false;  // an empty regime column is rank-deficient
    }
    CHECK((!warnings.empty() || !fit_ok));
}
