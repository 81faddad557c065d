#include "conc/regress.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "conc/errors.hpp"
#include "conc/rng.hpp"
#include "conc/stats.hpp"

namespace conc {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd D(X.rows(), X.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(X.cols()) = X;
    return D;
}

double centered_sst(const Eigen::VectorXd& y) {
    const double mean = y.mean();
    return (y.array() - mean).matrix().squaredNorm();
}

struct QrFit {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    Eigen::MatrixXd design;

    Eigen::VectorXd solve(const Eigen::VectorXd& y) const { return qr.solve(y); }
};

QrFit factorize(const Eigen::MatrixXd& D, const std::vector<std::string>& names) {
    QrFit f{Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(D), D};
    const auto p = D.cols();
    if (f.qr.rank() < p) {
        // The pivot order puts dependent columns last.
        const auto& perm = f.qr.colsPermutation().indices();
        const auto bad = static_cast<size_t>(perm[p - 1]);
        throw DomainError("ols_fit: design matrix is rank-deficient; column '" +
                          names.at(bad) + "' is linearly dependent on the others");
    }
    return f;
}

Eigen::MatrixXd xtx_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
    const auto p = qr.matrixQR().cols();
    Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd core = rinv * rinv.transpose();
    return qr.colsPermutation() * core * qr.colsPermutation().transpose();
}

}  // namespace

double FitResult::coef_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return coef[static_cast<Eigen::Index>(i)];
    throw DomainError("no coefficient named " + name);
}

double FitResult::se_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return se[static_cast<Eigen::Index>(i)];
    throw DomainError("no coefficient named " + name);
}

FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  std::vector<std::string> names, bool intercept) {
    const auto n = X.rows();
    const auto k = X.cols();
    if (static_cast<Eigen::Index>(names.size()) != k)
        throw DomainError("ols_fit: name count does not match regressor count");
    const Eigen::Index p = intercept ? k + 1 : k;
    if (n <= p)
        throw DomainError("ols_fit: " + std::to_string(n) + " samples cannot identify " +
                          std::to_string(p) + " parameters");

    FitResult fit;
    fit.intercept = intercept;
    fit.n = static_cast<int>(n);
    if (intercept) {
        fit.names.emplace_back("intercept");
    }
    for (auto& nm : names) fit.names.push_back(std::move(nm));

    const Eigen::MatrixXd D = intercept ? with_intercept(X) : X;
    const QrFit f = factorize(D, fit.names);

    fit.coef = f.solve(y);
    fit.residuals = y - D * fit.coef;
    const double ssr = fit.residuals.squaredNorm();
    const double sst = centered_sst(y);
    fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;

    const double dof = static_cast<double>(n - p);
    const double s2 = ssr / dof;
    const Eigen::MatrixXd cov = xtx_inverse(f.qr) * s2;
    fit.se.resize(p);
    fit.p.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        fit.se[j] = std::sqrt(cov(j, j));
        fit.p[j] = fit.se[j] > 0.0 ? stats::normal_two_sided_p(fit.coef[j] / fit.se[j]) : 0.0;
    }
    return fit;
}

void fit_diagnostics(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, FitResult& fit) {
    const Eigen::Index k = X.cols();
    const size_t name_offset = fit.intercept ? 1 : 0;
    for (Eigen::Index j = 0; j < k; ++j) {
        const std::string& name = fit.names.at(name_offset + static_cast<size_t>(j));

        // R_S^2: the single-variable fit, equal to the squared correlation
        // with the response.
        std::vector<double> xj(X.rows());
        Eigen::VectorXd::Map(xj.data(), X.rows()) = X.col(j);
        std::vector<double> yv(y.data(), y.data() + y.size());
        const double corr = stats::pearson(xj, yv);
        fit.r2_single[name] = corr * corr;

        // R_P^2 = (R^2 - R̂^2) / (1 - R̂^2), R̂^2 from the fit without j.
        Eigen::MatrixXd rest(X.rows(), k - 1);
        std::vector<std::string> rest_names;
        Eigen::Index c = 0;
        for (Eigen::Index m = 0; m < k; ++m) {
            if (m == j) continue;
            rest.col(c++) = X.col(m);
            rest_names.push_back("x" + std::to_string(m));
        }
        double restricted_r2 = 0.0;
        if (k > 1) {
            const FitResult restricted = ols_fit(rest, y, rest_names, fit.intercept);
            restricted_r2 = restricted.r2;
        }
        const double denom = 1.0 - restricted_r2;
        fit.r2_partial[name] = denom > 0.0 ? (fit.r2 - restricted_r2) / denom : 0.0;
    }
}

BootstrapResult bootstrap_null(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const FitResult& observed, int n_reps, uint64_t seed) {
    BootstrapResult result;
    result.n_reps = n_reps;
    result.seed = seed;
    if (n_reps < 100)
        result.warnings.push_back("bootstrap: fewer than 100 reps gives unstable p-values");

    const Eigen::MatrixXd D = observed.intercept ? with_intercept(X) : X;
    const QrFit f = factorize(D, observed.names);
    const auto n = y.size();
    const Eigen::Index k = X.cols();
    const Eigen::Index offset = observed.intercept ? 1 : 0;

    Eigen::MatrixXd null_coefs(n_reps, k);
    const auto run_range = [&](int lo, int hi) {
        std::vector<int> perm(static_cast<size_t>(n));
        Eigen::VectorXd shuffled(n);
        for (int rep = lo; rep < hi; ++rep) {
            // Per-rep derived seed: identical draws no matter how reps are
            // split across threads.
            Rng rng(derive_seed(seed, static_cast<uint64_t>(rep), 0xb007u));
            for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = static_cast<int>(i);
            rng.shuffle(perm);
            for (Eigen::Index i = 0; i < n; ++i) shuffled[i] = y[perm[static_cast<size_t>(i)]];
            const Eigen::VectorXd c = f.solve(shuffled);
            null_coefs.row(rep) = c.segment(offset, k).transpose();
        }
    };

    if (n_reps >= 200 && std::thread::hardware_concurrency() > 1) {
        const int mid = n_reps / 2;
        auto fut = std::async(std::launch::async, run_range, 0, mid);
        run_range(mid, n_reps);
        fut.get();
    } else {
        run_range(0, n_reps);
    }

    for (Eigen::Index j = 0; j < k; ++j) {
        result.names.push_back(observed.names.at(static_cast<size_t>(offset + j)));
        const double obs = std::fabs(observed.coef[offset + j]);
        int hits = 0;
        for (int rep = 0; rep < n_reps; ++rep)
            if (std::fabs(null_coefs(rep, j)) >= obs) ++hits;
        result.p_values.push_back(static_cast<double>(hits) / static_cast<double>(n_reps));
        std::vector<double> draws(null_coefs.col(j).data(), null_coefs.col(j).data() + n_reps);
        result.null_sigma.push_back(stats::sample_sd(draws));
    }
    return result;
}

Eigen::MatrixXd panel_design(const Panel& panel) {
    const auto n = static_cast<Eigen::Index>(panel.rows.size());
    Eigen::MatrixXd X(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SessionFeatures& r = panel.rows[static_cast<size_t>(i)];
        X(i, 0) = r.dE;
        X(i, 1) = r.dM;
        X(i, 2) = r.dV;
        X(i, 3) = r.dN;
    }
    return X;
}

Eigen::VectorXd panel_response(const Panel& panel) {
    const auto n = static_cast<Eigen::Index>(panel.rows.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = panel.rows[static_cast<size_t>(i)].dP_bps;
    return y;
}

FitResult impact_fit(const Panel& panel, bool intercept) {
    return ols_fit(panel_design(panel), panel_response(panel), {"dE", "dM", "dV", "dN"},
                   intercept);
}

PartialFit two_stage_partial(const Panel& panel) {
    const auto n = static_cast<Eigen::Index>(panel.rows.size());
    Eigen::MatrixXd routing(n, 3);
    Eigen::VectorXd y(n), conc(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SessionFeatures& r = panel.rows[static_cast<size_t>(i)];
        routing(i, 0) = r.dV;
        routing(i, 1) = r.dN;
        routing(i, 2) = r.dM;
        y[i] = r.dP_bps;
        conc[i] = r.dE;
    }
    const FitResult stage_p = ols_fit(routing, y, {"dV", "dN", "dM"}, true);
    const FitResult stage_e = ols_fit(routing, conc, {"dV", "dN", "dM"}, true);

    PartialFit fit;
    fit.price_residuals = stage_p.residuals;
    fit.conc_residuals = stage_e.residuals;

    // Stage two through the origin; both residual vectors are already
    // orthogonal to the intercept.
    const double exx = fit.conc_residuals.squaredNorm();
    if (!(exx > 0.0))
        throw DomainError("two_stage_partial: concentration residuals are identically zero");
    fit.eta = fit.conc_residuals.dot(fit.price_residuals) / exx;
    const Eigen::VectorXd resid = fit.price_residuals - fit.eta * fit.conc_residuals;
    const double ssr = resid.squaredNorm();
    const double sst = fit.price_residuals.squaredNorm();
    fit.se = std::sqrt(ssr / static_cast<double>(n - 1) / exx);
    fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    return fit;
}

std::string_view regime_name(RegimeLabel r) {
    switch (r) {
        case RegimeLabel::ConcBuyConcSell: return "conc_buy_conc_sell";
        case RegimeLabel::ConcBuyDiluteSell: return "conc_buy_dilute_sell";
        case RegimeLabel::DiluteBuyConcSell: return "dilute_buy_conc_sell";
        case RegimeLabel::DiluteBuyDiluteSell: return "dilute_buy_dilute_sell";
        case RegimeLabel::Unclassified: return "unclassified";
    }
    return "unclassified";
}

RegimeLabel classify_regime(double e_buy, double e_sell, double lo_value, double hi_value) {
    const int buy = e_buy > hi_value ? 1 : (e_buy < lo_value ? -1 : 0);
    const int sell = e_sell > hi_value ? 1 : (e_sell < lo_value ? -1 : 0);
    if (buy == 1 && sell == 1) return RegimeLabel::ConcBuyConcSell;
    if (buy == 1 && sell == -1) return RegimeLabel::ConcBuyDiluteSell;
    if (buy == -1 && sell == 1) return RegimeLabel::DiluteBuyConcSell;
    if (buy == -1 && sell == -1) return RegimeLabel::DiluteBuyDiluteSell;
    return RegimeLabel::Unclassified;
}

RegimeAssignment regime_classify(const Panel& panel, double q_low, double q_high) {
    if (panel.rows.empty()) throw DomainError("regime_classify: empty panel");
    // Quantiles over the merged buy- and sell-side scores.
    std::vector<double> pooled;
    pooled.reserve(panel.rows.size() * 2);
    for (const auto& r : panel.rows) {
        pooled.push_back(r.E_b);
        pooled.push_back(r.E_s);
    }
    RegimeAssignment out;
    out.q_low_value = stats::quantile_type7(pooled, q_low);
    out.q_high_value = stats::quantile_type7(pooled, q_high);
    if (!(out.q_low_value < out.q_high_value))
        throw DomainError("regime_classify: degenerate quantiles (q_low == q_high == " +
                          std::to_string(out.q_low_value) + ")");

    out.labels.reserve(panel.rows.size());
    for (const auto& r : panel.rows) {
        const RegimeLabel label =
            classify_regime(r.E_b, r.E_s, out.q_low_value, out.q_high_value);
        out.labels.push_back(label);
        ++out.counts[static_cast<size_t>(label)];
    }
    return out;
}

FitResult dummy_regression(const Panel& panel, const RegimeAssignment& regimes,
                           std::vector<std::string>* warnings) {
    const auto n = static_cast<Eigen::Index>(panel.rows.size());
    if (regimes.labels.size() != panel.rows.size())
        throw DomainError("dummy_regression: regime labels do not match panel rows");

    static constexpr RegimeLabel kRegimes[] = {
        RegimeLabel::ConcBuyConcSell,
        RegimeLabel::ConcBuyDiluteSell,
        RegimeLabel::DiluteBuyConcSell,
        RegimeLabel::DiluteBuyDiluteSell,
    };
    if (warnings != nullptr) {
        for (const RegimeLabel reg : kRegimes) {
            const size_t count = regimes.counts[static_cast<size_t>(reg)];
            if (count < 10)
                warnings->push_back("dummy_regression: regime " + std::string(regime_name(reg)) +
                                    " has only " + std::to_string(count) +
                                    " rows; its coefficient is unstable");
        }
    }

    Eigen::MatrixXd X(n, 7);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SessionFeatures& r = panel.rows[static_cast<size_t>(i)];
        X(i, 0) = r.dV;
        X(i, 1) = r.dN;
        X(i, 2) = r.dM;
        const RegimeLabel label = regimes.labels[static_cast<size_t>(i)];
        for (int d = 0; d < 4; ++d)
            X(i, 3 + d) = label == kRegimes[d] ? 1.0 : 0.0;
        y[i] = r.dP_bps;
    }
    std::vector<std::string> names = {"dV", "dN", "dM"};
    for (const RegimeLabel reg : kRegimes) names.emplace_back(regime_name(reg));
    // No global intercept: the four regime coefficients read against the
    // unclassified baseline.
    return ols_fit(X, y, std::move(names), false);
}

}  // namespace conc
