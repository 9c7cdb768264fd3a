#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "bmmp/detector.hpp"
#include "bmmp/linalg.hpp"
#include "bmmp/problem.hpp"
#include "bmmp/rng.hpp"

using bmmp::CorrelationKind;
using bmmp::HypothesisStats;
using bmmp::Matrix;
using bmmp::OrthoBasis;
using bmmp::Rng;
using bmmp::SignalPrior;
using bmmp::Vector;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values)
        v[i++] = x;
    return v;
}

// log of integral_lo^hi exp(f(u)) du by composite Simpson in log space.
template <typename F>
double log_integral(F f, double lo, double hi, int intervals) {
    if (intervals % 2 != 0)
        ++intervals;
    const double h = (hi - lo) / intervals;
    std::vector<double> logs(intervals + 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= intervals; ++i) {
        logs[i] = f(lo + i * h);
        peak = std::max(peak, logs[i]);
    }
    double sum = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * std::exp(logs[i] - peak);
    }
    return peak + std::log(sum * h / 3.0);
}

// Independent route to the score: log of the ratio of the two correlation
// densities, with the z-independent normalization constant removed so it is
// comparable to log_likelihood_uniform.
double theta_oracle(double z, const HypothesisStats& stats, double sigma, double a, double b,
                    int intervals) {
    const double st = sigma * stats.tau;
    const double s1 = std::sqrt(stats.var1);
    const double log_i = log_integral(
        [&](double x) {
            const double dz = z - st * x;
            return -dz * dz / (2.0 * stats.var1);
        },
        a, b, intervals);
    // log of the density ratio, minus the z-independent normalization
    // ln(s0 sqrt(2 pi) / (2 st (b - a))) so that it matches the erf form.
    return z * z / (2.0 * stats.var0) + log_i - std::log(s1) -
           0.5 * std::log(2.0 * M_PI) + std::log(2.0 * st);
}

HypothesisStats stats_with(double var0, double var1, double tau, int m, int d) {
    HypothesisStats s;
    s.psi = 0.0;
    s.tau = tau;
    s.var0 = var0;
    s.var1 = var1;
    s.m = m;
    s.d = d;
    return s;
}

}  // namespace

TEST_CASE("residual_sparsity formula and clamp") {
    CHECK(bmmp::residual_sparsity(0.0, 16, 4, 1.0, 1.0, 0.0) == 0.0);

    // sigma_w=0, ||r||^2 = (m-d) * sigma^2 v_x^2 * 5
    const int m = 16, d = 4;
    const double norm = std::sqrt(5.0 * (m - d));
    CHECK(bmmp::residual_sparsity(norm, m, d, 1.0, 1.0, 0.0) == doctest::Approx(5.0));

    // ||r||^2/(m-d) below sigma_w^2 clamps to zero
    CHECK(bmmp::residual_sparsity(1.0, 16, 4, 1.0, 1.0, 10.0) == 0.0);

    CHECK_THROWS_AS(bmmp::residual_sparsity(1.0, 4, 4, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("chi_mean_tau closed forms and asymptotics") {
    CHECK(bmmp::chi_mean_tau(5, 4) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-10));
    CHECK(bmmp::chi_mean_tau(6, 4) == doctest::Approx(std::sqrt(M_PI / 2.0)).epsilon(1e-10));

    const double tau = bmmp::chi_mean_tau(10001, 1);
    CHECK(tau / std::sqrt(10000.0) > 0.99997);
    CHECK(tau / std::sqrt(10000.0) < 1.0);

    // no overflow at huge degrees of freedom
    CHECK(std::isfinite(bmmp::chi_mean_tau(1000001, 1)));

    // monotone growth in m-d, and tau^2 <= m-d
    double prev = 0.0;
    for (int nu = 1; nu <= 50; ++nu) {
        const double t = bmmp::chi_mean_tau(nu + 3, 3);
        CHECK(t > prev);
        CHECK(t * t <= nu);
        prev = t;
    }

    CHECK_THROWS_AS(bmmp::chi_mean_tau(4, 4), std::invalid_argument);
}

TEST_CASE("hypothesis_stats variances") {
    const int m = 16, d = 4;
    // psi = 5 with sigma^2 v_x^2 = 1, sigma_w = 0
    auto s = bmmp::hypothesis_stats(std::sqrt(5.0 * (m - d)), m, d, 1.0, 1.0, 0.0);
    CHECK(s.psi == doctest::Approx(5.0));
    CHECK(s.var0 == doctest::Approx(5.0));
    CHECK(s.var1 == doctest::Approx(4.0));
    CHECK(s.tau == doctest::Approx(bmmp::chi_mean_tau(m, d)));

    // psi = 0, sigma_w = 0: both variances sit at the positivity floor
    auto zero = bmmp::hypothesis_stats(0.0, m, d, 1.0, 1.0, 0.0);
    CHECK(zero.var0 == doctest::Approx(1e-12));
    CHECK(zero.var1 == doctest::Approx(1e-12));

    // psi = 1, sigma_w = 0.1: var1 = 0.01
    auto one = bmmp::hypothesis_stats(std::sqrt(1.0 * (m - d) + (m - d) * 0.01), m, d, 1.0,
                                      1.0, 0.1);
    CHECK(one.psi == doctest::Approx(1.0));
    CHECK(one.var1 == doctest::Approx(0.01));
}

TEST_CASE("log_erfc matches direct evaluation and the tail expansion") {
    for (double x : {-3.0, -1.0, 0.0, 0.5, 2.0, 5.0, 10.0, 20.0}) {
        CHECK(bmmp::log_erfc(x) ==
              doctest::Approx(std::log(std::erfc(x))).epsilon(1e-10));
    }
    // tail: ln erfc(x) ~ -x^2 - ln(x sqrt(pi)), relative correction O(x^-2)
    for (double x : {50.0, 100.0, 1e4, 1e8}) {
        const double approx = -x * x - std::log(x * std::sqrt(M_PI));
        const double got = bmmp::log_erfc(x);
        CHECK(std::isfinite(got));
        CHECK(got == doctest::Approx(approx).epsilon(1e-3));
    }
}

TEST_CASE("log_erf_diff matches a quadrature oracle") {
    auto oracle = [](double lo, double hi) {
        return log_integral(
                   [](double u) { return -u * u; }, lo, hi, 40000) +
               std::log(2.0 / std::sqrt(M_PI));
    };
    struct Pair {
        double lo, hi;
    };
    for (const auto& p : {Pair{-1.0, 1.0}, Pair{0.0, 2.0}, Pair{-3.0, -0.5}, Pair{4.0, 6.0},
                          Pair{10.0, 11.0}, Pair{20.0, 21.0}, Pair{-21.0, -20.0}}) {
        CHECK(bmmp::log_erf_diff(p.lo, p.hi) ==
              doctest::Approx(oracle(p.lo, p.hi)).epsilon(1e-8));
    }
    // symmetry erf(-x) = -erf(x)
    CHECK(bmmp::log_erf_diff(-7.0, -6.5) ==
          doctest::Approx(bmmp::log_erf_diff(6.5, 7.0)).epsilon(1e-12));
    // extreme arguments stay finite and ordered
    const double far = bmmp::log_erf_diff(1000.0, 1001.0);
    const double farther = bmmp::log_erf_diff(2000.0, 2001.0);
    CHECK(std::isfinite(far));
    CHECK(farther < far);
}

TEST_CASE("log_likelihood_uniform against the likelihood-ratio quadrature") {
    const double sigma = 1.0;
    for (double s1 : {0.1, 0.5, 1.0, 3.0, 10.0}) {
        for (double z : {-8.0, -2.0, 0.0, 0.4, 2.0, 8.0}) {
            auto stats = stats_with(1.0, s1 * s1, 1.0, 64, 0);
            const double got = bmmp::log_likelihood_uniform(z, stats, sigma, 0.0, 1.0);
            const double want = theta_oracle(z, stats, sigma, 0.0, 1.0, 120000);
            CHECK(std::abs(got - want) < 1e-6);
        }
    }
}

TEST_CASE("log_likelihood_uniform symmetric closed form at the half point") {
    // a = 0: theta(s*tau*b/2) - z^2/(2 var0) = ln(2 erf(s*tau*b/(2 s1 sqrt(2))))
    const double sigma = 2.0, tau = 1.5, b = 1.0, s1 = 0.7;
    auto stats = stats_with(2.0, s1 * s1, tau, 64, 0);
    const double z = sigma * tau * b / 2.0;
    const double got = bmmp::log_likelihood_uniform(z, stats, sigma, 0.0, b);
    const double want = z * z / (2.0 * stats.var0) +
                        std::log(2.0 * std::erf(sigma * tau * b / (2.0 * s1 * std::sqrt(2.0))));
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("log_likelihood_uniform dominance and extreme arguments") {
    const double sigma = 1.0;
    auto stats = stats_with(1.0, 1e-4, 1.0, 64, 0);
    const double mid = bmmp::log_likelihood_uniform(0.5, stats, sigma, 0.0, 1.0);
    const double far = bmmp::log_likelihood_uniform(8.0, stats, sigma, 0.0, 1.0);
    // strip the shared quadratic term; the erf factor must collapse far outside [0, s*tau]
    CHECK(mid - 0.25 / 2.0 > far - 64.0 / 2.0 + 100.0);

    auto unit = stats_with(1.0, 1.0, 1.0, 64, 0);
    CHECK(std::isfinite(bmmp::log_likelihood_uniform(1e8, unit, sigma, 0.0, 1.0)));
    CHECK(std::isfinite(bmmp::log_likelihood_uniform(-1e8, unit, sigma, 0.0, 1.0)));
}

TEST_CASE("correlation kinds") {
    OrthoBasis empty(3);
    const Vector phi_col = vec({0.0, 3.0, 4.0});
    const Vector r = vec({1.0, 1.0, 0.0});
    const auto g = bmmp::correlation(empty, phi_col, r, CorrelationKind::RaOrmp);
    const auto h = bmmp::correlation(empty, phi_col, r, CorrelationKind::NormalizedOmp);
    REQUIRE(g.has_value());
    REQUIRE(h.has_value());
    CHECK(*g == doctest::Approx(*h));
    CHECK(*g == doctest::Approx(3.0 / 5.0));

    OrthoBasis basis(3);
    basis.extend(0, vec({1.0, 0.0, 0.0}));
    CHECK_FALSE(
        bmmp::correlation(basis, vec({5.0, 0.0, 0.0}), r, CorrelationKind::RaOrmp).has_value());
    const auto in_span_h =
        bmmp::correlation(basis, vec({5.0, 0.0, 0.0}), r, CorrelationKind::NormalizedOmp);
    REQUIRE(in_span_h.has_value());

    const auto ra =
        bmmp::correlation(basis, vec({1.0, 1.0, 0.0}), vec({0.0, 2.0, 0.0}),
                          CorrelationKind::RaOrmp);
    REQUIRE(ra.has_value());
    CHECK(*ra == doctest::Approx(2.0));
}

TEST_CASE("score_indices shape, degenerate flags, and kind coincidence on empty basis") {
    const SignalPrior prior{0.0, 1.0};
    const auto inst = bmmp::make_instance(8, 16, 3, prior, std::nullopt, 21);
    OrthoBasis basis(8);
    basis.extend(0, inst.phi.col(0));
    basis.extend(5, inst.phi.col(5));
    const auto [r, norm] = basis.residual(inst.y);
    const auto stats =
        bmmp::hypothesis_stats(norm, 8, 2, inst.model.sigma, inst.prior.vx(), 0.0);

    const auto scores = bmmp::score_indices(inst.phi, basis, r, CorrelationKind::RaOrmp, prior,
                                            stats, inst.model.sigma);
    REQUIRE(scores.size() == 14);
    for (std::size_t i = 0; i + 1 < scores.size(); ++i)
        CHECK(scores[i].index < scores[i + 1].index);
    for (const auto& s : scores) {
        CHECK(s.index != 0);
        CHECK(s.index != 5);
        if (!s.degenerate)
            CHECK(std::isfinite(s.theta));
        else
            CHECK(s.theta == -std::numeric_limits<double>::infinity());
    }

    // empty basis: both correlation kinds give identical score lists
    OrthoBasis none(8);
    const auto stats0 =
        bmmp::hypothesis_stats(inst.y.norm(), 8, 0, inst.model.sigma, inst.prior.vx(), 0.0);
    const auto sg = bmmp::score_indices(inst.phi, none, inst.y, CorrelationKind::RaOrmp, prior,
                                        stats0, inst.model.sigma);
    const auto sh = bmmp::score_indices(inst.phi, none, inst.y, CorrelationKind::NormalizedOmp,
                                        prior, stats0, inst.model.sigma);
    REQUIRE(sg.size() == sh.size());
    for (std::size_t i = 0; i < sg.size(); ++i) {
        CHECK(sg[i].index == sh[i].index);
        CHECK(sg[i].z == doctest::Approx(sh[i].z).epsilon(1e-12));
        CHECK(sg[i].theta == doctest::Approx(sh[i].theta).epsilon(1e-10));
    }

    // duplicated column is degenerate under RA-ORMP once its twin is in the basis
    Matrix phi = inst.phi;
    phi.col(3) = phi.col(0);
    const auto dup = bmmp::score_indices(phi, basis, r, CorrelationKind::RaOrmp, prior, stats,
                                         inst.model.sigma);
    bool found = false;
    for (const auto& s : dup)
        if (s.index == 3) {
            CHECK(s.degenerate);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("one-sparse noiseless scoring finds the true index") {
    int hits = 0;
    const int trials = 500;
    for (int trial = 0; trial < trials; ++trial) {
        const auto inst =
            bmmp::make_instance(32, 64, 1, SignalPrior{0.0, 1.0}, std::nullopt, 7000 + trial);
        OrthoBasis basis(32);
        const auto stats = bmmp::hypothesis_stats(inst.y.norm(), 32, 0, inst.model.sigma,
                                                  inst.prior.vx(), 0.0);
        const auto scores = bmmp::score_indices(inst.phi, basis, inst.y,
                                                CorrelationKind::RaOrmp, inst.prior, stats,
                                                inst.model.sigma);
        const auto top = bmmp::select_top(scores, 1);
        REQUIRE(top.size() == 1);
        if (top[0] == inst.support_true[0])
            ++hits;
    }
    CHECK(hits >= static_cast<int>(0.95 * trials));
}

TEST_CASE("residual sparsity estimate is consistent in noiseless Monte Carlo") {
    const int m = 128, n = 256, k = 20, held_out = 10;
    double psi_sum = 0.0;
    const int trials = 500;
    for (int trial = 0; trial < trials; ++trial) {
        const auto inst =
            bmmp::make_instance(m, n, k, SignalPrior{0.0, 1.0}, std::nullopt, 9000 + trial);
        OrthoBasis basis(m);
        for (int i = 0; i < k - held_out; ++i)
            basis.extend(inst.support_true[i], inst.phi.col(inst.support_true[i]));
        const double norm = basis.residual(inst.y).second;
        psi_sum += bmmp::residual_sparsity(norm, m, static_cast<int>(basis.size()),
                                           inst.model.sigma, inst.prior.vx(), 0.0);
    }
    const double mean_psi = psi_sum / trials;
    CHECK(mean_psi >= 0.8 * held_out);
    CHECK(mean_psi <= 1.2 * held_out);
}

TEST_CASE("select_top ordering and ties") {
    CHECK(bmmp::select_top({}, 3).empty());

    std::vector<bmmp::IndexScore> scores;
    for (int i = 0; i < 4; ++i)
        scores.push_back({i, 0.0, 1.0, false});
    CHECK(bmmp::select_top(scores, 0).empty());
    CHECK(bmmp::select_top(scores, 2) == std::vector<int>{0, 1});

    std::vector<bmmp::IndexScore> mixed{{0, 0.0, 0.5, false},
                                        {1, 0.0, 0.9, false},
                                        {2, 0.0, 0.7, false}};
    CHECK(bmmp::select_top(mixed, 2) == std::vector<int>{1, 2});

    mixed[1].degenerate = true;
    mixed[1].theta = -std::numeric_limits<double>::infinity();
    CHECK(bmmp::select_top(mixed, 3) == std::vector<int>{0, 2});
}
