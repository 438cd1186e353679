#include "bsdelab/estimates_lab.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace bsdelab {

Estimate batch_estimate(const std::vector<double>& values, int batches) {
    require(batches >= 2, "batch estimate: need at least two batches");
    const std::size_t n = values.size();
    require(n >= static_cast<std::size_t>(batches), "batch estimate: fewer samples than batches");
    const auto B = static_cast<std::size_t>(batches);
    std::vector<double> means(B);
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t lo = n * b / B, hi = n * (b + 1) / B;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += values[i];
        total += s;
        means[b] = s / static_cast<double>(hi - lo);
    }
    const double mean = total / static_cast<double>(n);
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(B - 1);
    return {mean, std::sqrt(var / static_cast<double>(B))};
}

namespace {

struct PathTerms {
    double sup_y, z, psi, m;
};

PathTerms path_terms(const Matrix& Y, const Matrix& before, const Matrix& after, const Matrix& Z, const Matrix& M,
                     const TimeGrid& grid, double p) {
    double sup = 0.0;
    for (Eigen::Index i = 0; i < Y.cols(); ++i) sup = std::max(sup, Y.col(i).norm());
    for (Eigen::Index e = 0; e < after.cols(); ++e) sup = std::max({sup, before.col(e).norm(), after.col(e).norm()});
    double zint = 0.0;
    for (Eigen::Index i = 0; i < Z.cols(); ++i) zint += Z.col(i).squaredNorm() * grid.step(static_cast<int>(i));
    const double qv = (after - before).colwise().squaredNorm().sum();
    double mqv = 0.0;
    for (Eigen::Index i = 1; i < M.cols(); ++i) mqv += (M.col(i) - M.col(i - 1)).squaredNorm();
    return {std::pow(sup, p), std::pow(zint, p / 2.0), std::pow(qv, p / 2.0), std::pow(mqv, p / 2.0)};
}

EpDiagnostics collect(const std::vector<PathTerms>& t, double p, int batches) {
    std::vector<double> a(t.size()), b(t.size()), c(t.size()), d(t.size()), s(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        a[i] = t[i].sup_y;
        b[i] = t[i].z;
        c[i] = t[i].psi;
        d[i] = t[i].m;
        s[i] = a[i] + b[i] + c[i] + d[i];
    }
    EpDiagnostics out;
    out.p = p;
    out.sup_y = batch_estimate(a, batches);
    out.z = batch_estimate(b, batches);
    out.psi = batch_estimate(c, batches);
    out.m = batch_estimate(d, batches);
    out.total = batch_estimate(s, batches);
    return out;
}

void require_p(double p) { require(std::isfinite(p) && p >= 1.0, "p must be >= 1"); }

}  // namespace

EpDiagnostics ep_norms(const BsdeSolution& sol, double p, int batches) {
    require_p(p);
    require(!sol.paths.empty(), "ep_norms: empty solution set");
    std::vector<PathTerms> terms(sol.paths.size());
    for (std::size_t i = 0; i < sol.paths.size(); ++i) {
        const auto& ps = sol.paths[i];
        terms[i] = path_terms(ps.Y, ps.Y_before, ps.Y_after, ps.Z, ps.M, sol.grid, p);
    }
    return collect(terms, p, batches);
}

EpDiagnostics ep_norms_difference(const BsdeSolution& a, const BsdeSolution& b, double p, int batches) {
    require_p(p);
    require(a.paths.size() == b.paths.size() && !a.paths.empty(), "ep_norms_difference: solution sets differ in size");
    require(a.grid.times == b.grid.times, "ep_norms_difference: grids differ");
    std::vector<PathTerms> terms(a.paths.size());
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        const auto &x = a.paths[i], &y = b.paths[i];
        require(x.event_times == y.event_times, "ep_norms_difference: solutions must share scenarios");
        terms[i] = path_terms(x.Y - y.Y, x.Y_before - y.Y_before, x.Y_after - y.Y_after, x.Z - y.Z, x.M - y.M,
                              a.grid, p);
    }
    return collect(terms, p, batches);
}

AprioriReport apriori_ratio(const BsdeSolution& sol, const std::vector<PathBundle>& scenarios, const TerminalSpec& xi,
                            const GeneratorSpec& f, const LevyMeasure& m, const ConditionCSpec& cond, double p,
                            const BatterySpec& spot, int batches) {
    require(scenarios.size() == sol.paths.size(), "apriori: one scenario per solution path");
    require(static_cast<bool>(cond.f_t), "apriori: f_t is required");
    AprioriReport rep;
    rep.terms = ep_norms(sol, p, batches);
    rep.lhs = rep.terms.total;

    const TimeGrid& g = sol.grid;
    double f_int = 0.0;
    for (int i = 0; i < g.steps(); ++i) {
        const double a = cond.f_t(g.times[i]), b = cond.f_t(g.times[i + 1]);
        require(a >= 0.0 && b >= 0.0, "apriori: f_t must be non-negative");
        f_int += 0.5 * (a + b) * g.step(i);
    }
    std::vector<double> rhs(scenarios.size());
    const int n = g.steps();
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const Vector x = xi(scenarios[i].brownian_path().col(n), scenarios[i].atom_counts(sol.atoms).col(n));
        rhs[i] = std::pow(x.norm(), p) + std::pow(f_int, p);
    }
    rep.rhs = batch_estimate(rhs, batches);

    if (rep.rhs.mean == 0.0) {
        if (rep.lhs.mean > 0.0)
            throw ConditionCMisuse("apriori: E[|xi|^p + (∫f_t)^p] = 0 but the solution is non-zero");
        rep.ratio = 0.0;
    } else {
        rep.ratio = rep.lhs.mean / rep.rhs.mean;
    }

    // Condition (C): <y/|y|, f(t,y,z,psi)> <= f_t + alpha|y| + K|z| + K ||psi||_{L^1+L^2}.
    PhiloxStream rng(spot.seed, StreamTag::Battery, 1);
    const int d = sol.d, k = sol.k;
    const auto J = static_cast<Eigen::Index>(sol.atoms);
    auto cube = [&](Eigen::Index r, Eigen::Index c, double rad) {
        Matrix a(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rad * (2.0 * rng.uniform() - 1.0);
        return a;
    };
    rep.condition_c_excess = -kInf;
    for (int s = 0; s < spot.samples; ++s) {
        const double t = g.horizon() * rng.uniform();
        const Vector y = cube(d, 1, spot.y_radius);
        const Matrix z = cube(d, k, spot.z_radius);
        const MarkFunction psi = MarkFunction::atoms(cube(d, J, spot.psi_radius));
        if (y.norm() == 0.0) continue;
        const double lhs = y.normalized().dot(f(t, y, z, psi));
        const double bound = cond.f_t(t) + cond.alpha * y.norm() + cond.K * z.norm() + cond.K * sum_norm(psi, m, 1.0).value;
        rep.condition_c_excess = std::max(rep.condition_c_excess, lhs - bound);
        if (lhs - bound > 1e-9 * (1.0 + std::abs(bound))) rep.condition_c_ok = false;
    }
    return rep;
}

namespace {

double antiderivative_i2(double y, double p) {
    return std::copysign(std::pow(std::abs(y), p - 1.0), y) / (p - 1.0);
}

double antiderivative_i1(double y, double p) {
    if (y <= -0.5) return antiderivative_i2(y, p);
    return (std::pow(y + 1.0, p - 1.0) - 2.0 * std::pow(0.5, p - 1.0)) / (p - 1.0);
}

void require_gap_p(double p) { require(std::isfinite(p) && p > 1.0 && p < 2.0, "p must lie in (1,2)"); }

}  // namespace

double gap_segment_i2(double y0, double y1, double p) {
    require_gap_p(p);
    return antiderivative_i2(std::max(y0, y1), p) - antiderivative_i2(std::min(y0, y1), p);
}

double gap_segment_i1(double y0, double y1, double p) {
    require_gap_p(p);
    return antiderivative_i1(std::max(y0, y1), p) - antiderivative_i1(std::min(y0, y1), p);
}

GapReport counterexample_gap(double p, double T, std::size_t paths, std::uint64_t seed, int threads, int batches) {
    require_gap_p(p);
    require(std::isfinite(T) && T > 0.0, "T must be > 0");
    const LevyMeasure delta1 = LevyMeasure::atomic({1.0}, {1.0});
    std::vector<double> v1(paths), v2(paths), diff(paths);
    parallel_for(paths, threads, [&](std::size_t idx) {
        const auto events = sample_poisson_measure(delta1, T, seed, idx);
        double y = -T, s = 0.0, a = 0.0, b = 0.0;
        auto segment = [&](double until) {
            const double y_end = y + (until - s);
            a += gap_segment_i1(y, y_end, p);
            b += gap_segment_i2(y, y_end, p);
            y = y_end;
            s = until;
        };
        for (const auto& ev : events) {
            segment(ev.time);
            y += 1.0;
        }
        segment(T);
        v1[idx] = a;
        v2[idx] = b;
        diff[idx] = b - a;
    });
    GapReport rep;
    rep.p = p;
    rep.T = T;
    rep.paths = paths;
    rep.i1 = batch_estimate(v1, batches);
    rep.i2 = batch_estimate(v2, batches);
    rep.paired = batch_estimate(diff, batches);
    rep.combined_se = std::hypot(rep.i1.se, rep.i2.se);
    const double gap = rep.i2.mean - rep.i1.mean;
    rep.sigmas = rep.combined_se > 0.0 ? gap / rep.combined_se : (gap > 0.0 ? kInf : 0.0);
    rep.significant = gap > 3.0 * rep.combined_se;
    return rep;
}

namespace {

bool within_3se(double observed, const Estimate& est, double expected) {
    return std::abs(est.mean - expected) <= 3.0 * est.se + 1e-12 * (1.0 + std::abs(expected)) && std::isfinite(observed);
}

}  // namespace

BdgReport bdg_sandwich(const MarkFunction& psi, const LevyMeasure& m, double p, const std::vector<double>& Ts,
                       std::size_t paths, std::uint64_t seed, int threads, int batches) {
    require_p(p);
    require(!Ts.empty(), "bdg: need at least one horizon");
    require(std::isfinite(m.total_mass()), "bdg: the measure must have finite activity");
    psi.check_compatible(m);
    BdgReport rep;
    rep.p = p;
    double lo = kInf, hi = 0.0;
    for (double T : Ts) {
        const TimeGrid grid = TimeGrid::uniform(T, 1);
        std::vector<double> sup(paths), qv(paths), sq(paths);
        parallel_for(paths, threads, [&](std::size_t idx) {
            const auto path = stochastic_integral(psi, sample_poisson_measure(m, T, seed, idx), m, grid, true);
            sup[idx] = std::pow(path.running_sup(), p);
            qv[idx] = std::pow(path.quadratic_variation, p / 2.0);
            sq[idx] = path.terminal().squaredNorm();
        });
        BdgRow row;
        row.T = T;
        row.sup_moment = batch_estimate(sup, batches);
        row.qv_moment = batch_estimate(qv, batches);
        row.ratio_defined = row.qv_moment.mean > 0.0 && row.sup_moment.mean > 0.0;
        if (row.ratio_defined) {
            row.ratio = row.sup_moment.mean / row.qv_moment.mean;
            row.ratio_se = row.ratio * std::hypot(row.sup_moment.se / row.sup_moment.mean, row.qv_moment.se / row.qv_moment.mean);
            rep.ratios_finite = rep.ratios_finite && std::isfinite(row.ratio) && row.ratio > 0.0;
            lo = std::min(lo, row.ratio);
            hi = std::max(hi, row.ratio);
        }
        rep.rows.push_back(row);
        rep.isometry_lhs = batch_estimate(sq, batches);
        const double l2 = lp_norm(psi, m, 2.0);
        rep.isometry_rhs = T * l2 * l2;
        rep.isometry_ok = within_3se(rep.isometry_lhs.mean, rep.isometry_lhs, rep.isometry_rhs);
    }
    rep.ratio_spread = hi > 0.0 ? hi / lo : 1.0;
    return rep;
}

namespace {

// ||psi||_{L^2_nu + L^p_nu} for nu = mu ⊗ Leb[0,T] and time-constant psi. Atomic measures use
// the exact product norm; density measures the best threshold split, found by a log scan and
// golden refinement in delta.
double space_time_norm(const MarkFunction& psi, const LevyMeasure& m, double p, double T) {
    if (m.is_atomic()) return product_sum_norm(TimeSlicedFunction{{0.0, T}, {psi}}, m, p).value;
    const double scale = psi.power_form().coeff.norm();
    if (scale == 0.0) return 0.0;
    auto bound = [&](double log_delta) {
        const auto [low, high] = threshold_split(psi, std::exp(log_delta));
        return std::sqrt(T) * lp_norm(low, m, 2.0) + std::pow(T, 1.0 / p) * lp_norm(high, m, p);
    };
    const double lo = std::log(scale) - 40.0, hi = std::log(scale) + 40.0;
    const int points = 801;
    int best = 0;
    double best_value = kInf;
    for (int i = 0; i < points; ++i) {
        const double v = bound(lo + (hi - lo) * i / (points - 1));
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(best - 1, 0) / (points - 1);
    double b = lo + (hi - lo) * std::min(best + 1, points - 1) / (points - 1);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        (bound(c) < bound(d) ? b : a) = (bound(c) < bound(d) ? d : c);
    }
    return std::min(best_value, bound(0.5 * (a + b)));
}

}  // namespace

BjReport bj_norm_check(const MarkFunction& psi, const LevyMeasure& m, double p, double T, std::size_t paths,
                       std::uint64_t seed, const std::vector<double>& etas, int threads, int batches) {
    require(std::isfinite(p) && p > 1.0 && p < 2.0, "bj: p must lie in (1,2)");
    require(std::isfinite(T) && T > 0.0, "bj: T must be > 0");
    psi.check_compatible(m);
    BjReport rep;
    rep.p = p;
    rep.T = T;
    rep.limit_norm_bound = space_time_norm(psi, m, p, T);

    std::vector<double> levels = m.is_atomic() ? std::vector<double>{0.0} : etas;
    require(!levels.empty(), "bj: a density measure needs at least one truncation level");
    const TimeGrid grid = TimeGrid::uniform(T, 1);
    for (double eta : levels) {
        const LevyMeasure me = m.is_atomic() ? m : m.truncated_below(eta);
        BjRow row;
        row.eta = eta;
        row.norm_bound = space_time_norm(psi, me, p, T);
        std::vector<double> qv(paths);
        parallel_for(paths, threads, [&](std::size_t idx) {
            const auto path = stochastic_integral(psi, sample_poisson_measure(me, T, seed, idx), me, grid, true);
            qv[idx] = std::pow(path.quadratic_variation, p / 2.0);
        });
        row.qv_moment = batch_estimate(qv, batches);
        row.moment_root = std::pow(row.qv_moment.mean, 1.0 / p);
        const double lp = sum_norm(psi, me, p).value, l1 = sum_norm(psi, me, 1.0).value;
        if (row.qv_moment.mean > 0.0) {
            row.ratio = row.norm_bound / row.moment_root;
            row.k_hat = T * std::pow(lp, p) / row.qv_moment.mean;
            row.k_hat_l1 = T * std::pow(l1, p) / row.qv_moment.mean;
        }
        const bool norm_finite = std::isfinite(row.norm_bound), moment_finite = std::isfinite(row.qv_moment.mean);
        const bool norm_zero = row.norm_bound == 0.0, moment_zero = row.qv_moment.mean == 0.0;
        rep.cofinite = rep.cofinite && norm_finite == moment_finite && (norm_zero == moment_zero);
        rep.rows.push_back(row);
    }
    return rep;
}

MartingaleReport martingale_check(const MarkFunction& psi, const LevyMeasure& m, double T, std::size_t paths,
                                  std::uint64_t seed, int threads, int batches) {
    require(psi.codomain_dim() == 1, "martingale check: psi must be scalar");
    const TimeGrid grid = TimeGrid::uniform(T, 1);
    std::vector<double> first(paths), second(paths);
    parallel_for(paths, threads, [&](std::size_t idx) {
        const auto path = stochastic_integral(psi, sample_poisson_measure(m, T, seed, idx), m, grid, true);
        first[idx] = path.terminal()(0);
        second[idx] = first[idx] * first[idx];
    });
    MartingaleReport rep;
    rep.mean = batch_estimate(first, batches);
    rep.second = batch_estimate(second, batches);
    const double l2 = lp_norm(psi, m, 2.0);
    rep.isometry = T * l2 * l2;
    rep.mean_ok = within_3se(rep.mean.mean, rep.mean, 0.0);
    rep.isometry_ok = within_3se(rep.second.mean, rep.second, rep.isometry);
    return rep;
}

TruncationStudy truncation_stability(const Problem& problem, const std::vector<double>& levels, double p, double T,
                                     int steps, std::size_t paths, std::uint64_t seed, int threads) {
    require(levels.size() >= 2, "truncation study: need at least two levels");
    const TimeGrid grid = TimeGrid::uniform(T, steps);
    const auto scenarios = sample_scenarios(problem.measure, grid, problem.k, seed, paths, threads);
    SolverOptions opt;
    opt.method = problem.preferred;
    opt.threads = threads;

    TruncationStudy out;
    out.levels = levels;
    std::vector<BsdeSolution> sols;
    for (double n : levels) {
        const auto tp = build_truncated_problem(problem.xi, problem.f, n, problem.k, problem.measure.atom_count());
        sols.push_back(solve_backward(tp.f, tp.xi, problem.measure, scenarios, opt));
        out.diagnostics.push_back(ep_norms(sols.back(), p));
    }
    for (std::size_t i = 1; i < sols.size(); ++i) {
        out.successive_differences.push_back(ep_norms_difference(sols[i], sols[i - 1], p).total.mean);
        if (i >= 2 && out.successive_differences[i - 1] > out.successive_differences[i - 2]) out.decreasing = false;
    }
    return out;
}

}  // namespace bsdelab
