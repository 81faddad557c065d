#include <doctest.h>

#include <cmath>
#include <set>

#include <sstream>

#include "conc/acf.hpp"
#include "conc/panel_io.hpp"
#include "conc/errors.hpp"
#include "conc/rng.hpp"

using namespace conc;

namespace {

std::vector<double> dirichlet(Rng& rng, size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) {
        v = -std::log(rng.next_double_open());
        total += v;
    }
    for (auto& v : w) v /= total;
    return w;
}

FirmFractions fractions_of(const std::vector<std::pair<FirmId, double>>& fw) {
    FirmFractions f;
    f.fractions = fw;
    return f;
}

/// Random series: each day draws a firm subset from a small pool and a
/// Dirichlet fraction vector over it.
SummandSeries random_series(uint64_t seed, size_t days, int pool = 12, int active = 5) {
    Rng rng(seed);
    SummandSeries series;
    series.symbol = "X";
    series.side = Side::Buy;
    for (size_t d = 0; d < days; ++d) {
        std::vector<int> ids(pool);
        for (int i = 0; i < pool; ++i) ids[i] = i;
        rng.shuffle(ids);
        const auto w = dirichlet(rng, static_cast<size_t>(active));
        std::vector<std::pair<FirmId, double>> fw;
        for (int i = 0; i < active; ++i) fw.emplace_back(static_cast<FirmId>(ids[i]), w[i]);
        std::sort(fw.begin(), fw.end());
        series.sessions.push_back(
            make_summands(fractions_of(fw), "d" + std::to_string(d),
                          static_cast<int64_t>(11000 + d)));
    }
    return series;
}

double max_identity_residual(const AcfDecomposition& d) {
    double worst = 0.0;
    for (size_t i = 0; i < d.gamma.size(); ++i)
        worst = std::max(worst, std::fabs(d.gamma[i] - (d.gamma_same[i] - d.gamma_cross[i])));
    return worst;
}

}  // namespace

TEST_CASE("acf: alternating series has gamma(1) = -1") {
    std::vector<double> series;
    for (int i = 0; i < 100; ++i) series.push_back(i % 2 == 0 ? 1.0 : -1.0);
    const auto gamma = concentration_acf(series, 2);
    CHECK(gamma[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(gamma[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("acf: iid noise stays within the 1/sqrt(T) band") {
    Rng rng(1);
    std::vector<double> series(10000);
    for (auto& v : series) v = rng.next_normal();
    const auto gamma = concentration_acf(series, 10);
    for (double g : gamma) CHECK(std::fabs(g) < 0.05);
}

TEST_CASE("acf: AR(1) with phi = 0.5 matches the closed form") {
    Rng rng(2);
    const double phi = 0.5;
    std::vector<double> series(10000);
    double x = 0.0;
    for (auto& v : series) {
        x = phi * x + rng.next_normal();
        v = x;
    }
    const auto gamma = concentration_acf(series, 5);
    const double t_len = static_cast<double>(series.size());
    for (int tau = 1; tau <= 5; ++tau) {
        const double expected = std::pow(phi, tau);
        // Bartlett variance for an AR(1) autocorrelation estimate
        const double p2 = phi * phi;
        double var = 0.0;
        {
            const double rho_tau = std::pow(phi, tau);
            var = (1.0 - std::pow(p2, tau)) * (1.0 + p2) / (1.0 - p2) -
                  2.0 * tau * rho_tau * rho_tau;
            var /= t_len;
        }
        const double se = std::sqrt(var);
        CHECK(std::fabs(gamma[static_cast<size_t>(tau - 1)] - expected) < 3.0 * se);
    }
}

TEST_CASE("acf: zero-variance and too-short inputs are fatal") {
    std::vector<double> flat(50, 0.7);
    CHECK_THROWS_AS((void)concentration_acf(flat, 5), DomainError);
    std::vector<double> shorty = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS((void)concentration_acf(shorty, 5), DomainError);
}

TEST_CASE("summands: z sums to the raw normalized entropy") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto n = static_cast<size_t>(rng.next_int(2, 30));
        const auto w = dirichlet(rng, n);
        std::vector<std::pair<FirmId, double>> fw;
        for (size_t i = 0; i < n; ++i) fw.emplace_back(static_cast<FirmId>(i), w[i]);
        const SummandSession s = make_summands(fractions_of(fw), "d", 0);
        double manual = 0.0;
        for (size_t i = 0; i < n; ++i)
            manual += -w[i] * std::log(w[i]) / std::log(static_cast<double>(n));
        CHECK(s.e_raw == doctest::Approx(manual).epsilon(1e-12));
        // raw normalized entropy = 1 - concentration
        CHECK(s.e_raw ==
              doctest::Approx(1.0 - entropy_concentration(w)).epsilon(1e-9));
    }
}

TEST_CASE("summands: single-firm session carries one zero summand") {
    const SummandSession s =
        make_summands(fractions_of({{42, 1.0}}), "d", 0);
    REQUIRE(s.z.size() == 1);
    CHECK(s.z[0].first == 42);
    CHECK(s.z[0].second == 0.0);
    CHECK(s.e_raw == 0.0);
}

TEST_CASE("prepared summands: z' sums to the demeaned aggregate") {
    const SummandSeries series = random_series(5, 80);
    const PreparedSeries prep = prepare_summands(series);
    double mean = 0.0;
    for (const auto& s : series.sessions) mean += s.e_raw;
    mean /= static_cast<double>(series.sessions.size());
    for (size_t t = 0; t < series.sessions.size(); ++t) {
        double total = 0.0;
        for (const auto& [firm, zp] : prep.sessions[t].z) total += zp;
        CHECK(std::fabs(total - (series.sessions[t].e_raw - mean)) <= 1e-9);
    }
}

TEST_CASE("decomposition identity holds at every lag on random series") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        const SummandSeries series = random_series(seed, 200);
        const AcfDecomposition d = decompose_acf(series, 20);
        CHECK(max_identity_residual(d) <= 1e-9);
    }
}

TEST_CASE("decomposition: plain-route gamma equals the summand aggregate ACF") {
    const SummandSeries series = random_series(11, 150);
    std::vector<double> e_series;
    for (const auto& s : series.sessions) e_series.push_back(s.e_raw);
    const auto gamma = concentration_acf(e_series, 10);
    const AcfDecomposition d = decompose_acf(series, 10);
    for (size_t i = 0; i < gamma.size(); ++i)
        CHECK(d.gamma[i] == doctest::Approx(gamma[i]).epsilon(1e-9));
}

TEST_CASE("decomposition: disjoint firm sets make gamma_same vanish") {
    Rng rng(13);
    SummandSeries series;
    series.symbol = "X";
    series.side = Side::Buy;
    FirmId next_firm = 0;
    for (int d = 0; d < 120; ++d) {
        const auto w = dirichlet(rng, 4);
        std::vector<std::pair<FirmId, double>> fw;
        for (double v : w) fw.emplace_back(next_firm++, v);  // never reused
        series.sessions.push_back(make_summands(fractions_of(fw), "d", d));
    }
    const AcfDecomposition dec = decompose_acf(series, 15);
    for (size_t i = 0; i < dec.gamma.size(); ++i) {
        CHECK(dec.gamma_same[i] == 0.0);
        CHECK(dec.gamma[i] == doctest::Approx(-dec.gamma_cross[i]).epsilon(1e-12));
    }
}

TEST_CASE("decomposition: identical sessions every day have zero variance") {
    SummandSeries series;
    series.symbol = "X";
    series.side = Side::Buy;
    for (int d = 0; d < 50; ++d) {
        series.sessions.push_back(
            make_summands(fractions_of({{1, 0.6}, {2, 0.4}}), "d", d));
    }
    CHECK_THROWS_AS((void)decompose_acf(series, 5), DomainError);
}

TEST_CASE("decomposition: invariant under a global firm relabeling") {
    const SummandSeries series = random_series(17, 100, 10, 4);
    SummandSeries relabeled = series;
    for (auto& s : relabeled.sessions) {
        for (auto& [firm, z] : s.z) firm = 1000 - firm * 7;  // injective map
        std::sort(s.z.begin(), s.z.end());
    }
    const AcfDecomposition a = decompose_acf(series, 12);
    const AcfDecomposition b = decompose_acf(relabeled, 12);
    for (size_t i = 0; i < a.gamma.size(); ++i) {
        CHECK(a.gamma[i] == doctest::Approx(b.gamma[i]).epsilon(1e-12));
        CHECK(a.gamma_same[i] == doctest::Approx(b.gamma_same[i]).epsilon(1e-12));
        CHECK(a.gamma_cross[i] == doctest::Approx(b.gamma_cross[i]).epsilon(1e-12));
    }
}

TEST_CASE("decomposition: persistent dominant firm drives gamma_same") {
    // One firm holds a large share for D = 5 consecutive days at a time,
    // background firms churn randomly: same-firm correlation is positive
    // below the horizon and the identity still holds.
    Rng rng(19);
    SummandSeries series;
    series.symbol = "X";
    series.side = Side::Buy;
    int days_left = 0;
    FirmId meta = 500;
    FirmId churn = 0;
    for (int d = 0; d < 400; ++d) {
        if (days_left == 0 && rng.next_bernoulli(0.18)) days_left = 5;
        std::vector<std::pair<FirmId, double>> fw;
        if (days_left > 0) {
            --days_left;
            fw.emplace_back(meta, 0.55);
            const auto w = dirichlet(rng, 6);
            for (double v : w) fw.emplace_back(churn++, 0.45 * v);
        } else {
            const auto w = dirichlet(rng, 7);
            for (double v : w) fw.emplace_back(churn++, v);
        }
        std::sort(fw.begin(), fw.end());
        series.sessions.push_back(make_summands(fractions_of(fw), "d", d));
    }
    const AcfDecomposition dec = decompose_acf(series, 10);
    CHECK(max_identity_residual(dec) <= 1e-9);
    CHECK(dec.gamma_same[0] > 0.05);
    CHECK(dec.gamma_same[0] > dec.gamma_same[7]);
}

TEST_CASE("decomposition: month masking moves matched mass to the cross term") {
    SummandSeries series = random_series(23, 100);
    // Month boundary halfway: day indices run 11000..11099; remap to two
    // months explicitly.
    for (size_t t = 0; t < series.sessions.size(); ++t)
        series.sessions[t].day_index =
            t < 50 ? 11100 : 11140;  // 2000-05-24 vs 2000-07-03
    const AcfDecomposition masked = decompose_acf(series, 10, true);
    const AcfDecomposition plain = decompose_acf(series, 10, false);
    CHECK(max_identity_residual(masked) <= 1e-9);
    CHECK(max_identity_residual(plain) <= 1e-9);
    for (size_t i = 0; i < masked.gamma.size(); ++i)
        CHECK(masked.gamma[i] == doctest::Approx(plain.gamma[i]).epsilon(1e-12));
}

TEST_CASE("averaging and report") {
    std::vector<AcfDecomposition> parts;
    parts.push_back(decompose_acf(random_series(29, 120), 8));
    parts.push_back(decompose_acf(random_series(31, 120), 8));
    const AcfAverage avg = average_decompositions(parts);
    CHECK(avg.n_series == 2);
    for (size_t i = 0; i < avg.gamma.size(); ++i) {
        CHECK(avg.gamma[i] ==
              doctest::Approx(0.5 * (parts[0].gamma[i] + parts[1].gamma[i])).epsilon(1e-12));
    }

    const std::string csv = acf_report_csv(avg);
    CHECK(csv.find("lag,gamma,gamma_same,gamma_cross,band,pairs") == 0);
    // lag column strictly increasing 1..max
    size_t pos = csv.find('\n') + 1;
    for (int lag = 1; lag <= 8; ++lag) {
        CHECK(csv.compare(pos, std::to_string(lag).size(), std::to_string(lag)) == 0);
        pos = csv.find('\n', pos) + 1;
    }
}

TEST_CASE("report: violated identity is caught before emitting") {
    AcfAverage bad;
    bad.max_lag = 1;
    bad.gamma = {0.5};
    bad.gamma_same = {0.1};
    bad.gamma_cross = {0.1};
    bad.band = {0.1};
    bad.pair_count = {100};
    CHECK_THROWS_AS((void)acf_report_csv(bad), DomainError);
}

TEST_CASE("band shrinks with the square root of the series length") {
    const auto short_avg = average_decompositions(
        std::vector<AcfDecomposition>{decompose_acf(random_series(37, 101), 4)});
    const auto long_avg = average_decompositions(
        std::vector<AcfDecomposition>{decompose_acf(random_series(37, 401), 4)});
    // pairs at lag 0: 100 vs 400 -> band halves
    CHECK(long_avg.band[0] == doctest::Approx(0.5 * short_avg.band[0]).epsilon(1e-12));
}

TEST_CASE("band calibration: iid concentration stays inside the band ~95% of the time") {
    // Pooled over seeds and lags; demanding *every* lag of *every* seed
    // inside a 2-sigma band would fail by multiplicity alone.
    Rng rng(59);
    size_t inside = 0, total = 0;
    for (int seed_round = 0; seed_round < 12; ++seed_round) {
        std::vector<AcfDecomposition> parts;
        for (int series_i = 0; series_i < 4; ++series_i) {
            SummandSeries series;
            series.symbol = "S" + std::to_string(series_i);
            series.side = series_i % 2 == 0 ? Side::Buy : Side::Sell;
            for (int d = 0; d < 150; ++d) {
                const size_t n = static_cast<size_t>(rng.next_int(4, 12));
                std::vector<double> w(n);
                double t = 0.0;
                for (auto& v : w) {
                    v = -std::log(rng.next_double_open());
                    t += v;
                }
                FirmFractions f;
                for (size_t i = 0; i < n; ++i)
                    f.fractions.emplace_back(static_cast<FirmId>(rng.next_int(0, 200)), w[i] / t);
                std::sort(f.fractions.begin(), f.fractions.end());
                f.fractions.erase(
                    std::unique(f.fractions.begin(), f.fractions.end(),
                                [](auto& a, auto& b) { return a.first == b.first; }),
                    f.fractions.end());
                series.sessions.push_back(make_summands(f, "d", d));
            }
            parts.push_back(decompose_acf(series, 12));
        }
        const AcfAverage avg = average_decompositions(parts);
        for (size_t i = 0; i < avg.gamma.size(); ++i) {
            ++total;
            if (std::fabs(avg.gamma[i]) <= avg.band[i]) ++inside;
        }
    }
    CHECK(static_cast<double>(inside) / static_cast<double>(total) >= 0.90);
}

TEST_CASE("summand sidecar: round-trip reproduces the decomposition") {
    const SummandSeries series = random_series(43, 90);
    const PreparedSeries prep = prepare_summands(series);
    StringPool firms;
    for (int i = 0; i < 16; ++i) firms.intern("M" + std::to_string(i));

    std::stringstream buf;
    const std::vector<PreparedSeries> out = {prep};
    write_summands_csv(out, firms, buf);
    StringPool firms2;
    const auto back = read_summands_csv(buf, firms2);
    REQUIRE(back.size() == 1);
    const AcfDecomposition a = decompose_prepared(prep, 10);
    const AcfDecomposition b = decompose_prepared(back[0], 10);
    for (size_t i = 0; i < a.gamma.size(); ++i) {
        CHECK(b.gamma[i] == doctest::Approx(a.gamma[i]).epsilon(1e-8));
        CHECK(b.gamma_same[i] == doctest::Approx(a.gamma_same[i]).epsilon(1e-8));
        CHECK(b.gamma_cross[i] == doctest::Approx(a.gamma_cross[i]).epsilon(1e-8));
    }
}
