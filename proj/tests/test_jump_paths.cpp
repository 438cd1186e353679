#include "bsdelab/jump_paths.hpp"
#include "bsdelab/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace bsdelab;

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u}) == PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          PhiloxBlock{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          PhiloxBlock{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are pure functions of their address") {
    PhiloxStream a(9, StreamTag::Jumps, 3), b(9, StreamTag::Jumps, 3);
    PhiloxStream other_tag(9, StreamTag::Brownian, 3), other_path(9, StreamTag::Jumps, 4), other_seed(10, StreamTag::Jumps, 3);
    bool tag_differs = false, path_differs = false, seed_differs = false;
    for (int i = 0; i < 64; ++i) {
        const std::uint32_t x = a.next_u32();
        CHECK(x == b.next_u32());
        tag_differs |= x != other_tag.next_u32();
        path_differs |= x != other_path.next_u32();
        seed_differs |= x != other_seed.next_u32();
    }
    CHECK(tag_differs);
    CHECK(path_differs);
    CHECK(seed_differs);

    PhiloxStream u(1, StreamTag::Battery, 0);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = u.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("time grids") {
    const auto g = TimeGrid::uniform(2.0, 4);
    CHECK(g.steps() == 4);
    CHECK(g.horizon() == 2.0);
    CHECK(g.step(1) == doctest::Approx(0.5));
    CHECK(g.interval_of(0.0) == 0);
    CHECK(g.interval_of(0.5) == 0);
    CHECK(g.interval_of(0.5000001) == 1);
    CHECK(g.interval_of(2.0) == 3);
    CHECK_THROWS_AS(TimeGrid::from_times({0.0, 1.0, 1.0}), InvalidInput);
    CHECK_THROWS_AS(TimeGrid::from_times({0.5, 1.0}), InvalidInput);
    CHECK_THROWS_AS(TimeGrid::uniform(1.0, 0), InvalidInput);
}

TEST_CASE("poisson random measure: counts and mark frequencies") {
    const auto m = LevyMeasure::atomic({1.0, -2.0}, {0.5, 1.5});
    const double T = 2.0;
    const int paths = 20000;
    double count = 0.0, count_sq = 0.0, first_atom = 0.0;
    for (int i = 0; i < paths; ++i) {
        const auto ev = sample_poisson_measure(m, T, 21, static_cast<std::uint64_t>(i));
        for (std::size_t e = 0; e < ev.size(); ++e) {
            REQUIRE(ev[e].time > 0.0);
            REQUIRE(ev[e].time <= T);
            REQUIRE(ev[e].atom.has_value());
            if (e > 0) REQUIRE(ev[e].time > ev[e - 1].time);
            if (e > 0) REQUIRE(ev[e].seq > ev[e - 1].seq);
            CHECK(ev[e].mark(0) == (*ev[e].atom == 0 ? 1.0 : -2.0));
            first_atom += *ev[e].atom == 0;
        }
        count += static_cast<double>(ev.size());
        count_sq += static_cast<double>(ev.size() * ev.size());
    }
    const double mean = count / paths, var = count_sq / paths - mean * mean;
    CHECK(std::abs(mean - 4.0) < 4.0 * std::sqrt(4.0 / paths));
    CHECK(var == doctest::Approx(4.0).epsilon(0.05));
    CHECK(first_atom / count == doctest::Approx(0.25).epsilon(0.03));

    CHECK(sample_poisson_measure(LevyMeasure::atomic(std::vector<Atom>{}), 5.0, 1, 0).empty());
    CHECK_THROWS_AS(sample_poisson_measure(LevyMeasure::power_law(1.5), 1.0, 1, 0), InvalidInput);
    CHECK_THROWS_AS(sample_poisson_measure(m, 0.0, 1, 0), InvalidInput);
}

TEST_CASE("brownian increments have the step variance and independent components") {
    const auto g = TimeGrid::from_times({0.0, 0.25, 1.0});
    const int paths = 20000;
    double v0 = 0.0, v1 = 0.0, cross = 0.0;
    for (int i = 0; i < paths; ++i) {
        const Matrix inc = sample_brownian(g, 2, 4, static_cast<std::uint64_t>(i));
        REQUIRE(inc.rows() == 2);
        REQUIRE(inc.cols() == 2);
        v0 += inc(0, 0) * inc(0, 0);
        v1 += inc(0, 1) * inc(0, 1);
        cross += inc(0, 1) * inc(1, 1);
    }
    CHECK(v0 / paths == doctest::Approx(0.25).epsilon(0.05));
    CHECK(v1 / paths == doctest::Approx(0.75).epsilon(0.05));
    CHECK(std::abs(cross / paths) < 4.0 * 0.75 / std::sqrt(paths));

    const auto bundle = sample_path(LevyMeasure::atomic({1.0}, {1.0}), g, 2, 4, 7);
    CHECK(bundle.brownian_increments == sample_brownian(g, 2, 4, 7));
    const Matrix w = bundle.brownian_path();
    CHECK(w.col(0).isZero());
    CHECK(w.col(2).isApprox(bundle.brownian_increments.rowwise().sum()));
    CHECK(sample_brownian(g, 0, 4, 7).size() == 0);
}

TEST_CASE("atom counts follow the jump list") {
    const auto m = LevyMeasure::atomic({1.0, 3.0}, {1.0, 2.0});
    const auto bundle = sample_path(m, TimeGrid::uniform(3.0, 6), 0, 5, 2);
    const Eigen::MatrixXi counts = bundle.atom_counts(2);
    REQUIRE(counts.cols() == 7);
    CHECK(counts.col(0).sum() == 0);
    CHECK(counts.col(6).sum() == static_cast<int>(bundle.jumps.size()));
    for (int i = 1; i <= 6; ++i) CHECK((counts.col(i).array() >= counts.col(i - 1).array()).all());
}

TEST_CASE("stochastic integral on a hand-built path") {
    const auto m = LevyMeasure::atomic({1.0, -2.0}, {1.0, 0.5});
    const auto psi = MarkFunction::scalar_atoms({3.0, 1.0});  // ∫ psi dmu = 3.5
    std::vector<JumpEvent> ev{{0.3, Vector::Constant(1, 1.0), 0, 0}, {0.7, Vector::Constant(1, -2.0), 1, 1}};
    const auto grid = TimeGrid::uniform(1.0, 2);

    const auto raw = stochastic_integral(psi, ev, m, grid, false);
    CHECK_FALSE(raw.compensator_applied);
    CHECK(raw.terminal()(0) == doctest::Approx(4.0));
    CHECK(raw.grid_values(0, 1) == doctest::Approx(3.0));
    CHECK(raw.quadratic_variation == doctest::Approx(10.0));

    const auto comp = stochastic_integral(psi, ev, m, grid, true);
    CHECK(comp.terminal()(0) == doctest::Approx(4.0 - 3.5));
    CHECK(comp.grid_values(0, 1) == doctest::Approx(3.0 - 1.75));
    CHECK(comp.before(0, 0) == doctest::Approx(-0.3 * 3.5));
    CHECK(comp.after(0, 0) == doctest::Approx(3.0 - 0.3 * 3.5));
    CHECK(comp.before(0, 1) == doctest::Approx(3.0 - 0.7 * 3.5));
    CHECK(comp.after(0, 1) == doctest::Approx(4.0 - 0.7 * 3.5));
    CHECK(comp.event_qv == std::vector<double>{9.0, 10.0});
    CHECK(comp.grid_qv.back() == doctest::Approx(10.0));
    CHECK(comp.running_sup() == doctest::Approx(3.0 - 0.3 * 3.5));

    // psi takes the slice of the interval that contains the event time on its right end.
    TimeSlicedFunction sliced{{0.0, 0.5, 1.0}, {psi, MarkFunction::scalar_atoms({0.0, 0.0})}};
    const auto half = stochastic_integral(sliced, ev, m, grid, true);
    CHECK(half.terminal()(0) == doctest::Approx(3.0 - 0.5 * 3.5));
    CHECK(half.quadratic_variation == doctest::Approx(9.0));

    const auto empty = stochastic_integral(psi, {}, m, grid, true);
    CHECK(empty.terminal()(0) == doctest::Approx(-3.5));
    CHECK(empty.event_times.empty());
    CHECK_THROWS_AS(stochastic_integral(TimeSlicedFunction{{0.0, 1.0}, {}}, ev, m, grid, true), InvalidInput);
}

TEST_CASE("truncated stable paths") {
    CHECK(small_jump_variance(1.5, 0.1) == doctest::Approx(2.0 * std::sqrt(0.1) / 0.5));
    CHECK(small_jump_variance(1.5, 0.0) == 0.0);
    CHECK_THROWS_AS(small_jump_variance(2.0, 0.1), InvalidInput);

    // Jump intensity of the truncated measure: 2 eta^{-alpha} / alpha = 42.16 for (1.5, 0.1).
    const double rate = 2.0 * std::pow(0.1, -1.5) / 1.5;
    CHECK(rate == doctest::Approx(42.16).epsilon(1e-3));
    StableOptions o;
    const int paths = 4000;
    double jumps = 0.0, terminal = 0.0, beyond = 0.0;
    for (int i = 0; i < paths; ++i) {
        const auto path = sample_stable_truncated(o, 13, static_cast<std::uint64_t>(i));
        jumps += static_cast<double>(path.event_times.size());
        terminal += path.terminal()(0);
        for (Eigen::Index e = 0; e < path.after.cols(); ++e) {
            const double jump = path.after(0, e) - path.before(0, e);
            beyond += std::abs(jump) > 0.2;
        }
        REQUIRE(path.compensator_applied);
    }
    CHECK(std::abs(jumps / paths - rate) < 4.0 * std::sqrt(rate / paths));
    CHECK(beyond / jumps == doctest::Approx(std::pow(2.0, -1.5)).epsilon(0.03));
    // Symmetric marks: the compensated path is centred.
    CHECK(std::abs(terminal / paths) < 0.5);

    o.gaussian_remainder = true;
    const auto a = sample_stable_truncated(o, 13, 0);
    const auto b = sample_stable_truncated(o, 13, 0);
    o.gaussian_remainder = false;
    const auto c = sample_stable_truncated(o, 13, 0);
    CHECK(a.grid_values == b.grid_values);
    CHECK(a.event_times == c.event_times);
    CHECK(a.quadratic_variation == c.quadratic_variation);
    CHECK(a.grid_values != c.grid_values);

    o.alpha = 0.8;
    CHECK_THROWS_AS(sample_stable_truncated(o, 1, 0), InvalidInput);
}
