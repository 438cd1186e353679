#include "bsdelab/estimates_lab.hpp"
#include "oracles.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace bsdelab;

namespace {

// Integrate over [lo, hi] after splitting at the given breakpoints; tanh-sinh copes with the
// integrable endpoint singularity of |y|^{p-2} at 0.
template <typename F>
double piecewise_quad(F f, double lo, double hi, std::vector<double> breaks) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = std::max(lo, breaks[i]), b = std::min(hi, breaks[i + 1]);
        if (b > a) total += integrator.integrate(f, a, b);
    }
    return total;
}

BsdeSolution solve(const Problem& p, double T, int steps, std::size_t paths, std::uint64_t seed,
                   std::vector<PathBundle>* keep = nullptr) {
    auto scenarios = sample_scenarios(p.measure, TimeGrid::uniform(T, steps), p.k, seed, paths);
    auto sol = solve_backward(p.f, p.xi, p.measure, scenarios);
    if (keep) *keep = std::move(scenarios);
    return sol;
}

}  // namespace

TEST_CASE("batch means estimator") {
    std::vector<double> v(60);
    for (int i = 0; i < 60; ++i) v[static_cast<std::size_t>(i)] = i;
    const auto e = batch_estimate(v, 30);
    CHECK(e.mean == doctest::Approx(29.5));
    // Batch means 0.5, 2.5, ..., 58.5: sample sd 2 sqrt(77.5), divided by sqrt(30).
    CHECK(e.se == doctest::Approx(2.0 * std::sqrt(77.5) / std::sqrt(30.0)).epsilon(1e-12));
    CHECK(batch_estimate(std::vector<double>(40, 3.0)).se == 0.0);
    CHECK_THROWS_AS(batch_estimate(std::vector<double>(10, 1.0)), InvalidInput);
    CHECK_THROWS_AS(batch_estimate(v, 1), InvalidInput);
}

TEST_CASE("gap segments agree with tanh-sinh quadrature") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> y_d(-3.0, 3.0), p_d(1.05, 1.95);
    for (int i = 0; i < 200; ++i) {
        const double a = y_d(gen), b = y_d(gen), p = p_d(gen);
        const double lo = std::min(a, b), hi = std::max(a, b);
        auto f2 = [p](double y) { return y == 0.0 ? 0.0 : std::pow(std::abs(y), p - 2.0); };
        auto f1 = [p](double y) { return std::pow(std::max(y * y, (y + 1.0) * (y + 1.0)), p / 2.0 - 1.0); };
        CAPTURE(a);
        CAPTURE(b);
        CAPTURE(p);
        CHECK(gap_segment_i2(a, b, p) == doctest::Approx(piecewise_quad(f2, lo, hi, {0.0})).epsilon(1e-9));
        CHECK(gap_segment_i1(a, b, p) == doctest::Approx(piecewise_quad(f1, lo, hi, {-0.5})).epsilon(1e-9));
        CHECK(gap_segment_i2(a, b, p) >= gap_segment_i1(a, b, p));
    }
}

TEST_CASE("gap segment closed forms") {
    for (double p : {1.1, 1.5, 1.99}) {
        for (double T : {0.5, 1.0, 3.0}) {
            CHECK(gap_segment_i2(-T, 0.0, p) == doctest::Approx(std::pow(T, p - 1.0) / (p - 1.0)).epsilon(1e-13));
            CHECK(gap_segment_i2(0.0, T, p) == gap_segment_i2(T, 0.0, p));
        }
    }
    // As p -> 2 both integrands tend to 1.
    CHECK(gap_segment_i2(-0.7, 0.6, 1.99) == doctest::Approx(1.3).epsilon(0.02));
    CHECK(gap_segment_i1(-0.7, 0.6, 1.99) == doctest::Approx(1.3).epsilon(0.02));
    CHECK(gap_segment_i1(-0.8, 0.3, 1.5) == doctest::Approx(gap_segment_i1(-0.8, -0.5, 1.5) + gap_segment_i1(-0.5, 0.3, 1.5)));
    CHECK_THROWS_AS(gap_segment_i1(0.0, 1.0, 2.0), InvalidInput);
}

TEST_CASE("counterexample gap is positive and thread independent") {
    const auto one = counterexample_gap(1.5, 1.0, 20000, 3, 1);
    const auto three = counterexample_gap(1.5, 1.0, 20000, 3, 3);
    CHECK(one.i1.mean == three.i1.mean);
    CHECK(one.i2.mean == three.i2.mean);
    CHECK(one.combined_se == three.combined_se);
    CHECK(one.significant);
    CHECK(one.paired.mean > 0.0);
    CHECK(one.paired.mean == doctest::Approx(one.i2.mean - one.i1.mean).epsilon(1e-12));
    // The paired estimator is far tighter than the unpaired combined error.
    CHECK(one.paired.se < one.combined_se);
    CHECK_THROWS_AS(counterexample_gap(1.5, -1.0, 100, 1), InvalidInput);
}

TEST_CASE("E^p terms of the counterexample") {
    const auto p = make_problem("counterexample");
    const double T = 1.5;
    const auto sol = solve(p, T, 8, 20000, 9);
    for (double pe : {1.2, 1.5, 2.0}) {
        const auto ep = ep_norms(sol, pe);
        const double exact = oracle::poisson_power_moment(T, pe / 2.0);
        CAPTURE(pe);
        CHECK(std::abs(ep.psi.mean - exact) < 3.5 * ep.psi.se);
        CHECK(ep.z.mean == 0.0);
        CHECK(ep.m.mean == 0.0);
        CHECK(ep.sup_y.mean >= std::pow(T, pe) * 0.5);
        CHECK(ep.total.mean == doctest::Approx(ep.sup_y.mean + ep.psi.mean).epsilon(1e-12));
    }
    const auto self = ep_norms_difference(sol, sol, 1.5);
    CHECK(self.total.mean == 0.0);
}

TEST_CASE("standard error halves when the path count quadruples") {
    const auto delta1 = LevyMeasure::atomic({1.0}, {1.0});
    const auto psi = MarkFunction::scalar_atoms({1.0});
    const auto small = martingale_check(psi, delta1, 1.0, 10000, 4);
    const auto big = martingale_check(psi, delta1, 1.0, 40000, 4);
    CHECK(big.mean.se / small.mean.se == doctest::Approx(0.5).epsilon(0.35));
    CHECK(small.isometry == doctest::Approx(1.0));
    CHECK(big.mean_ok);
    CHECK(big.isometry_ok);
}

TEST_CASE("a priori ratio: trivial and misuse cases") {
    std::vector<PathBundle> scenarios;
    const auto zero = make_problem("zero", {.c = 0.0});
    const auto sol = solve(zero, 1.0, 4, 60, 1, &scenarios);
    const auto rep = apriori_ratio(sol, scenarios, zero.xi, zero.f, zero.measure, {zero.f_t, 0.0, 0.0}, 1.5);
    CHECK(rep.lhs.mean == 0.0);
    CHECK(rep.rhs.mean == 0.0);
    CHECK(rep.ratio == 0.0);
    CHECK(rep.condition_c_ok);

    // f = 1 while the declared f_t is 0: the bound would have to hold with a vanishing right side.
    Problem drift = zero;
    drift.f.f = [](double, const Vector& y, const Matrix&, const MarkFunction&) { return Vector(Vector::Ones(y.size())); };
    const auto dsol = solve(drift, 1.0, 4, 60, 1, &scenarios);
    CHECK_THROWS_AS(apriori_ratio(dsol, scenarios, drift.xi, drift.f, drift.measure, {drift.f_t, 0.0, 0.0}, 1.5),
                    ConditionCMisuse);

    const auto ce = make_problem("counterexample");
    const auto csol = solve(ce, 1.0, 8, 3000, 2, &scenarios);
    const auto crep = apriori_ratio(csol, scenarios, ce.xi, ce.f, ce.measure,
                                    {ce.f_t, ce.condition_c_alpha, ce.condition_c_K}, 1.5);
    CHECK(crep.condition_c_ok);
    CHECK(std::isfinite(crep.ratio));
    CHECK(crep.ratio > 0.0);
}

TEST_CASE("BDG sandwich") {
    const auto delta1 = LevyMeasure::atomic({1.0}, {1.0});
    const auto rep = bdg_sandwich(MarkFunction::scalar_atoms({1.0}), delta1, 1.5, {0.5, 1.0, 2.0}, 20000, 6);
    REQUIRE(rep.rows.size() == 3);
    for (const auto& row : rep.rows) {
        CHECK(row.ratio_defined);
        CHECK(std::abs(row.qv_moment.mean - oracle::poisson_power_moment(row.T, 0.75)) < 3.5 * row.qv_moment.se);
        // N* >= |N_T| and Doob's bound keep the ratio in a fixed band.
        CHECK(row.ratio > 0.1);
        CHECK(row.ratio < 10.0);
    }
    CHECK(rep.ratios_finite);
    CHECK(rep.isometry_ok);
    CHECK(rep.isometry_rhs == doctest::Approx(2.0));

    const auto none = bdg_sandwich(MarkFunction::scalar_atoms({0.0}), delta1, 1.5, {1.0}, 300, 6);
    CHECK_FALSE(none.rows[0].ratio_defined);
    CHECK(none.rows[0].sup_moment.mean == 0.0);
    CHECK(none.isometry_rhs == 0.0);
}

TEST_CASE("Bichteler-Jacod norms under small-jump truncation") {
    const auto stable = LevyMeasure::power_law(1.8);
    const auto psi = MarkFunction::power(Vector::Ones(1));
    const auto rep = bj_norm_check(psi, stable, 1.5, 1.0, 3000, 8, {0.2, 0.1, 0.05});
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.cofinite);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].norm_bound >= rep.rows[i - 1].norm_bound);
    CHECK(rep.rows.back().norm_bound <= rep.limit_norm_bound * (1.0 + 1e-9));
    for (const auto& row : rep.rows) {
        CHECK(std::isfinite(row.ratio));
        CHECK(row.moment_root == doctest::Approx(std::pow(row.qv_moment.mean, 1.0 / 1.5)));
    }

    const auto delta1 = LevyMeasure::atomic({1.0}, {1.0});
    const auto zero = bj_norm_check(MarkFunction::scalar_atoms({0.0}), delta1, 1.5, 1.0, 300, 8);
    CHECK(zero.cofinite);
    REQUIRE(zero.rows.size() == 1);
    CHECK(zero.rows[0].norm_bound == 0.0);
    CHECK(zero.rows[0].qv_moment.mean == 0.0);
}

TEST_CASE("martingale and isometry on a two-atom measure") {
    const auto m = LevyMeasure::atomic({1.0, -2.0}, {0.5, 1.5});
    const auto psi = MarkFunction::scalar_atoms({2.0, -1.0});
    const auto rep = martingale_check(psi, m, 2.0, 40000, 12);
    CHECK(rep.isometry == doctest::Approx(2.0 * (0.5 * 4.0 + 1.5 * 1.0)));
    CHECK(rep.mean_ok);
    CHECK(rep.isometry_ok);
    const auto again = martingale_check(psi, m, 2.0, 40000, 12, 3);
    CHECK(again.second.mean == rep.second.mean);
}

TEST_CASE("truncation study on a small configuration") {
    const auto p = make_problem("counterexample");
    const auto study = truncation_stability(p, {1.0, 2.0, 4.0, 8.0}, 1.5, 1.0, 8, 2000, 5);
    REQUIRE(study.diagnostics.size() == 4);
    REQUIRE(study.successive_differences.size() == 3);
    CHECK(study.decreasing);
    for (std::size_t i = 1; i < study.successive_differences.size(); ++i)
        CHECK(study.successive_differences[i] <= study.successive_differences[i - 1]);
}
