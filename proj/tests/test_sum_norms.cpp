#include "bsdelab/sum_norms.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bsdelab;

namespace {

struct Instance {
    LevyMeasure m;
    MarkFunction phi;
    std::vector<double> weights, magnitudes;
};

Instance random_instance(std::mt19937_64& gen, int max_atoms, int dim = 1) {
    std::uniform_real_distribution<double> w_d(0.05, 6.0), v_d(-4.0, 4.0);
    const int n = 1 + static_cast<int>(gen() % static_cast<unsigned>(max_atoms));
    std::vector<double> marks, weights;
    Matrix values(dim, n);
    for (int j = 0; j < n; ++j) {
        marks.push_back(j + 1.0);
        weights.push_back(w_d(gen));
        for (int r = 0; r < dim; ++r) values(r, j) = v_d(gen);
    }
    std::vector<double> mags;
    for (int j = 0; j < n; ++j) mags.push_back(values.col(j).norm());
    return {LevyMeasure::atomic(marks, weights), MarkFunction::atoms(values), weights, mags};
}

}  // namespace

TEST_CASE("lp_norm examples") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    CHECK(lp_norm(MarkFunction::scalar_atoms({-3.0}), unit, 2.0) == doctest::Approx(3.0));
    CHECK(lp_norm(MarkFunction::scalar_atoms({0.0}), unit, 1.5) == 0.0);
    const auto stable = LevyMeasure::power_law(1.5);
    CHECK(lp_norm(MarkFunction::power(Vector::Ones(1), 1.0, kInf), stable, 1.0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::isinf(lp_norm(MarkFunction::power(Vector::Ones(1)), stable, 1.0)));
}

TEST_CASE("threshold_split is pointwise") {
    const auto [low, high] = threshold_split(MarkFunction::scalar_atoms({0.5, 3.0}), 1.0);
    CHECK(low.values()(0, 0) == 0.5);
    CHECK(low.values()(0, 1) == 0.0);
    CHECK(high.values()(0, 0) == 0.0);
    CHECK(high.values()(0, 1) == 3.0);

    const auto [all, none] = threshold_split(MarkFunction::scalar_atoms({0.5, -3.0}), 10.0);
    CHECK(all.values()(0, 1) == -3.0);
    CHECK(none.values().cwiseAbs().maxCoeff() == 0.0);

    const auto [pl_low, pl_high] = threshold_split(MarkFunction::power(Vector::Ones(1)), 1.0);
    CHECK(pl_low.power_form().band_hi == 1.0);
    CHECK(pl_high.power_form().band_lo == 1.0);
    CHECK(pl_low.evaluate(Vector::Constant(1, 0.5), std::nullopt)(0) == 0.5);
    CHECK(pl_low.evaluate(Vector::Constant(1, 2.0), std::nullopt)(0) == 0.0);
    CHECK(pl_high.evaluate(Vector::Constant(1, -2.0), std::nullopt)(0) == -2.0);
}

TEST_CASE("sum_norm examples") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    for (double v : {-2.5, 0.3, 7.0}) {
        const auto r = sum_norm(MarkFunction::scalar_atoms({v}), unit, 1.5);
        CHECK(r.value == doctest::Approx(std::abs(v)).epsilon(1e-14));
        CHECK(r.gap == doctest::Approx(0.0));
    }
    const auto heavy = LevyMeasure::atomic({1.0}, {4.0});
    const auto r = sum_norm(MarkFunction::scalar_atoms({1.5}), heavy, 1.0);
    CHECK(r.value == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.phi_high.values()(0, 0) == 0.0);  // all of it in L^2

    const auto zero = sum_norm(MarkFunction::scalar_atoms({0.0, 0.0}), LevyMeasure::atomic({1.0, 2.0}, {1.0, 3.0}), 1.0);
    CHECK(zero.value == 0.0);
    CHECK(zero.phi_low.values().cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.phi_high.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sum_norm agrees with the grid oracle and sits below every threshold bound") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> q_d(1.05, 1.95);
    for (int i = 0; i < 60; ++i) {
        const auto inst = random_instance(gen, 3, 1 + i % 2);
        const double q = i % 3 == 0 ? 1.0 : q_d(gen);
        const auto r = sum_norm(inst.phi, inst.m, q);
        CHECK(std::abs(r.value - oracle::sum_norm_grid(inst.weights, inst.magnitudes, q)) <= 1e-6);
        CHECK(r.lower_bound <= r.value);
        // Decomposition reconstructs phi and realises the value.
        CHECK((r.phi_low.values() + r.phi_high.values() - inst.phi.values()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(lp_norm(r.phi_high, inst.m, q) + lp_norm(r.phi_low, inst.m, 2.0) ==
              doctest::Approx(r.value).epsilon(1e-9));
        for (double delta : {1e-3, 0.1, 0.5, 1.0, 2.0, 3.0, 10.0})
            CHECK(r.value <= threshold_bound(inst.phi, inst.m, q, delta) * (1.0 + 1e-12));
    }
}

TEST_CASE("sum_norm is a norm on random instances") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> s_d(-5.0, 5.0), v_d(-3.0, 3.0);
    const auto m = LevyMeasure::atomic({1.0, 2.0, 3.0, 4.0}, {0.3, 1.0, 2.5, 0.1});
    for (int i = 0; i < 100; ++i) {
        const double q = i % 2 ? 1.0 : 1.5;
        const auto a = MarkFunction::scalar_atoms({v_d(gen), v_d(gen), v_d(gen), v_d(gen)});
        const auto b = MarkFunction::scalar_atoms({v_d(gen), v_d(gen), v_d(gen), v_d(gen)});
        const double s = s_d(gen);
        const double na = sum_norm(a, m, q).value, nb = sum_norm(b, m, q).value;
        CHECK(sum_norm(a + b, m, q).value <= (na + nb) * (1.0 + 1e-9));
        CHECK(sum_norm(s * a, m, q).value == doctest::Approx(std::abs(s) * na).epsilon(1e-9));
        // Containment: the L^1 + L^2 norm is finite whenever the L^q + L^2 norm is.
        CHECK(std::isfinite(sum_norm(a, m, 1.0).value));
    }
}

TEST_CASE("density functions get the best threshold bound, labelled as such") {
    const auto stable = LevyMeasure::power_law(1.8);
    const auto psi = MarkFunction::power(Vector::Ones(1));
    const auto r = sum_norm(psi, stable, 1.5);
    CHECK(r.method == SumNormMethod::ThresholdUpperBound);
    CHECK(std::isinf(r.gap));
    CHECK(std::isfinite(r.value));
    for (double delta : {0.01, 0.1, 1.0, 10.0}) CHECK(r.value <= threshold_bound(psi, stable, 1.5, delta) * (1 + 1e-12));
    CHECK(std::isfinite(sum_norm(psi, stable, 1.0).value));

    const std::vector<double> deltas{1e-3, 0.1, 1.0, 5.0, 100.0};
    // psi(u) = u has finite split pieces iff alpha lies in (q, 2).
    CHECK(threshold_pieces_finite(psi, stable, 1.5, deltas));
    CHECK_FALSE(threshold_pieces_finite(psi, LevyMeasure::power_law(1.2), 1.5, deltas));
    CHECK(std::isinf(sum_norm(psi, LevyMeasure::power_law(1.2), 1.5).value));
}

TEST_CASE("dual_norm examples") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    const auto d1 = dual_norm(MarkFunction::scalar_atoms({1.0}), unit);
    CHECK(d1.sup_norm == 1.0);
    CHECK(d1.l2_norm == 1.0);
    const auto d2 = dual_norm(MarkFunction::scalar_atoms({1.0, -1.0}), LevyMeasure::atomic({1.0, 2.0}, {1.0, 1.0}));
    CHECK(d2.sup_norm == 1.0);
    CHECK(d2.l2_norm == doctest::Approx(std::sqrt(2.0)));
    CHECK(d2.norm() == doctest::Approx(std::sqrt(2.0)));
    const auto d0 = dual_norm(MarkFunction::scalar_atoms({0.0}), unit);
    CHECK(d0.sup_norm == 0.0);
    CHECK(d0.l2_norm == 0.0);
    CHECK(d0.finite);
}

TEST_CASE("pairing bound on random instances") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    const auto single = pairing_bound_check(dual_norm(MarkFunction::scalar_atoms({1.0}), unit),
                                            MarkFunction::scalar_atoms({2.5}), MarkFunction::scalar_atoms({0.5}), unit);
    CHECK(single.lhs == doctest::Approx(2.0));
    CHECK(single.rhs == doctest::Approx(2.0));
    CHECK(single.ok);
    const auto same = pairing_bound_check(dual_norm(MarkFunction::scalar_atoms({1.0}), unit),
                                          MarkFunction::scalar_atoms({1.0}), MarkFunction::scalar_atoms({1.0}), unit);
    CHECK(same.lhs == 0.0);
    CHECK(same.ok);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> l_d(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const auto inst = random_instance(gen, 3);
        const auto other = MarkFunction::atoms(inst.phi.values() * 0.3 + Matrix::Constant(1, inst.phi.values().cols(), 0.7));
        Matrix ell(1, inst.phi.values().cols());
        for (Eigen::Index j = 0; j < ell.cols(); ++j) ell(0, j) = l_d(gen);
        const auto check = pairing_bound_check(dual_norm(MarkFunction::atoms(ell), inst.m), inst.phi, other, inst.m);
        CHECK(check.ok);
    }
}

TEST_CASE("product measure norm matches the grid oracle") {
    const auto m = LevyMeasure::atomic({1.0, -1.0}, {1.0, 0.5});
    TimeSlicedFunction phi{{0.0, 0.5, 2.0}, {MarkFunction::scalar_atoms({1.0, -3.0}), MarkFunction::scalar_atoms({2.0, 0.25})}};
    const std::vector<double> weights{0.5, 0.25, 1.5, 0.75}, mags{1.0, 3.0, 2.0, 0.25};
    for (double q : {1.0, 1.4}) {
        const auto r = product_sum_norm(phi, m, q);
        CHECK(std::abs(r.value - oracle::sum_norm_grid(weights, mags, q, 11, 40)) <= 1e-6);
    }
    CHECK_THROWS_AS(product_sum_norm({{0.0, 1.0}, {MarkFunction::power(Vector::Ones(1))}}, LevyMeasure::power_law(1.5), 1.0),
                    InvalidInput);
}

TEST_CASE("time-integrated bound") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    const auto zero = time_integrated_bound_check({{0.0, 1.0}, {MarkFunction::scalar_atoms({0.0})}}, unit, 1.0);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);
    CHECK(zero.ok);

    const auto constant = time_integrated_bound_check({{0.0, 1.0}, {MarkFunction::scalar_atoms({2.0})}}, unit, 1.0);
    CHECK(constant.lhs == doctest::Approx(2.0));
    CHECK(constant.rhs == doctest::Approx(2.0));
    CHECK(constant.ok);

    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> v_d(-3.0, 3.0);
    const auto m = LevyMeasure::atomic({1.0, 2.0}, {0.7, 2.0});
    for (int i = 0; i < 20; ++i) {
        TimeSlicedFunction phi{{0.0, 1.0, 2.5, 4.0}, {}};
        for (int s = 0; s < 3; ++s) phi.slices.push_back(MarkFunction::scalar_atoms({v_d(gen), v_d(gen)}));
        const auto check = time_integrated_bound_check(phi, m, 4.0);
        CHECK(check.ok);
        CHECK(check.lhs <= check.rhs);
    }
    CHECK_THROWS_AS(time_integrated_bound_check({{0.0, 1.0}, {MarkFunction::scalar_atoms({1.0})}}, unit, 2.0),
                    InvalidInput);
}

TEST_CASE("invalid exponents") {
    const auto unit = LevyMeasure::atomic({1.0}, {1.0});
    CHECK_THROWS_AS(sum_norm(MarkFunction::scalar_atoms({1.0}), unit, 2.5), InvalidInput);
    CHECK_THROWS_AS(sum_norm(MarkFunction::scalar_atoms({1.0}), unit, 0.5), InvalidInput);
}
