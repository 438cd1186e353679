#include "bsdelab/sum_norms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace bsdelab {

std::string to_string(SumNormMethod m) {
    switch (m) {
        case SumNormMethod::ExactBruteforce: return "exact-bruteforce";
        case SumNormMethod::ConvexOpt: return "convex-opt";
        case SumNormMethod::ThresholdUpperBound: return "threshold-upper-bound";
    }
    return "unknown";
}

namespace {

void check_exponent(double q) { require(q >= 1.0 && q <= 2.0, "sum-norm exponent must lie in [1,2]"); }

// Magnitude form of the split problem: atom i carries weight w_i and |phi_i| = r_i;
// the L^q piece has magnitude x_i ∈ [0, r_i] along phi_i.
struct SplitProblem {
    Vector w;
    Vector r;
    double q;

    double lq(const Vector& x) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) s += w(i) * std::pow(x(i), q);
        return q == 1.0 ? s : std::pow(s, 1.0 / q);
    }
    double l2(const Vector& x) const { return std::sqrt((w.array() * (r - x).array().square()).sum()); }
    double objective(const Vector& x) const { return lq(x) + l2(x); }

    // Stationarity family: kappa x^{q-1} + x = r_i.
    Vector split_for(double kappa) const {
        Vector x(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) x(i) = solve_coordinate(kappa, r(i));
        return x;
    }

    double solve_coordinate(double kappa, double ri) const {
        if (kappa == 0.0) return ri;
        if (std::isinf(kappa)) return 0.0;
        if (q == 1.0) return std::max(ri - kappa, 0.0);
        if (q == 2.0) return ri / (1.0 + kappa);
        double lo = 0.0, hi = ri;
        double x = ri / (1.0 + kappa * std::pow(ri, q - 2.0));
        for (int it = 0; it < 200; ++it) {
            const double g = kappa * std::pow(x, q - 1.0) + x - ri;
            if (g > 0.0) hi = x; else lo = x;
            const double dg = kappa * (q - 1.0) * std::pow(x, q - 2.0) + 1.0;
            double next = x - g / dg;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) <= 1e-17 * ri || hi - lo <= 1e-16 * ri) {
                x = next;
                break;
            }
            x = next;
        }
        return std::clamp(x, 0.0, ri);
    }

    // Largest dual objective among the natural dual candidates attached to x.
    double lower_bound(const Vector& x) const {
        double best = 0.0;
        auto evaluate = [&](const Vector& lambda) {
            double dual_q;
            if (q == 1.0) {
                dual_q = lambda.size() ? lambda.maxCoeff() : 0.0;
            } else {
                const double qs = q / (q - 1.0);
                dual_q = std::pow((w.array() * lambda.array().pow(qs)).sum(), 1.0 / qs);
            }
            const double dual_2 = std::sqrt((w.array() * lambda.array().square()).sum());
            const double scale = std::max(dual_q, dual_2);
            if (scale > 0.0) best = std::max(best, (w.array() * r.array() * lambda.array()).sum() / scale);
        };
        const double B = l2(x);
        if (B > 0.0) evaluate((r - x) / B);
        const double A = lq(x);
        if (A > 0.0) {
            Vector lambda(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i)
                lambda(i) = q == 1.0 ? 1.0 : std::pow(x(i) / A, q - 1.0);
            evaluate(lambda);
        }
        evaluate(Vector::Ones(r.size()));
        if (q == 1.0 && w.sum() > 1.0) {
            // Exact dual for q = 1: lambda_i = min(1, c r_i) on the weighted unit L^2 sphere.
            auto clipped = [&](double c) { return Vector((c * r).cwiseMin(1.0)); };
            auto norm2 = [&](double c) {
                const Vector l = clipped(c);
                return std::sqrt((w.array() * l.array().square()).sum());
            };
            double lo = 0.0, hi = 1.0 / r.minCoeff();
            for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (norm2(mid) < 1.0 ? lo : hi) = mid;
            }
            evaluate(clipped(lo));
        }
        return best;
    }
};

double golden_minimize(const std::function<double(double)>& f, double a, double b, int iterations, double& argmin) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < iterations && std::abs(b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc <= fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    argmin = fc <= fd ? c : d;
    return std::min(fc, fd);
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, double(k) / double(n - 1));
    return g;
}

MarkFunction scaled_columns(const Matrix& values, const Vector& factors) {
    Matrix out = values;
    for (Eigen::Index j = 0; j < values.cols(); ++j) out.col(j) *= factors(j);
    return MarkFunction::atoms(std::move(out));
}

}  // namespace

double lp_norm(const MarkFunction& phi, const LevyMeasure& m, double q) {
    require(q >= 1.0, "L^q norm needs q >= 1");
    phi.check_compatible(m);
    if (phi.is_atomic()) {
        const auto& atoms = m.atomic_part().atoms;
        double s = 0.0;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            s += atoms[j].weight * std::pow(phi.values().col(static_cast<Eigen::Index>(j)).norm(), q);
        return std::pow(s, 1.0 / q);
    }
    const PowerForm& pf = phi.power_form();
    const double c = pf.coeff.norm();
    if (c == 0.0) return 0.0;
    const double moment = m.band_moment(q, pf.band_lo, pf.band_hi);
    return c * std::pow(moment, 1.0 / q);
}

std::pair<MarkFunction, MarkFunction> threshold_split(const MarkFunction& phi, double delta) {
    require(delta > 0.0, "threshold delta must be > 0");
    if (phi.is_atomic()) {
        Matrix low = phi.values();
        Matrix high = Matrix::Zero(low.rows(), low.cols());
        for (Eigen::Index j = 0; j < low.cols(); ++j) {
            if (low.col(j).norm() > delta) {
                high.col(j) = low.col(j);
                low.col(j).setZero();
            }
        }
        return {MarkFunction::atoms(std::move(low)), MarkFunction::atoms(std::move(high))};
    }
    const PowerForm& pf = phi.power_form();
    const double c = pf.coeff.norm();
    if (c == 0.0) return {phi, MarkFunction::power(pf.coeff, pf.band_lo, pf.band_lo)};
    // |c u| <= delta  <=>  |u| <= delta / |c|
    const double edge = std::clamp(delta / c, pf.band_lo, pf.band_hi);
    return {MarkFunction::power(pf.coeff, pf.band_lo, edge), MarkFunction::power(pf.coeff, edge, pf.band_hi)};
}

double threshold_bound(const MarkFunction& phi, const LevyMeasure& m, double q, double delta) {
    const auto [low, high] = threshold_split(phi, delta);
    return lp_norm(low, m, 2.0) + lp_norm(high, m, q);
}

SumNormResult sum_norm_weighted(const Vector& weights, const Matrix& values, double q, const SumNormOptions& options) {
    check_exponent(q);
    require(weights.size() == values.cols(), "weights and values disagree on atom count");
    require((weights.array() > 0.0).all(), "weights must be > 0");

    SumNormResult result;
    const Eigen::Index n = values.cols();
    Vector magnitude(n);
    for (Eigen::Index j = 0; j < n; ++j) magnitude(j) = values.col(j).norm();

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < n; ++j)
        if (magnitude(j) > 0.0) active.push_back(j);

    SplitProblem problem{Vector(active.size()), Vector(active.size()), q};
    for (std::size_t k = 0; k < active.size(); ++k) {
        problem.w(static_cast<Eigen::Index>(k)) = weights(active[k]);
        problem.r(static_cast<Eigen::Index>(k)) = magnitude(active[k]);
    }

    auto finish = [&](const Vector& x_active, double value, double lower) {
        Vector share = Vector::Zero(n);
        for (std::size_t k = 0; k < active.size(); ++k)
            share(active[k]) = x_active(static_cast<Eigen::Index>(k)) / magnitude(active[k]);
        result.phi_high = scaled_columns(values, share);
        result.phi_low = MarkFunction::atoms(values - result.phi_high.values());
        result.value = value;
        result.lower_bound = std::min(lower, value);
        result.gap = value - result.lower_bound;
    };

    if (active.empty()) {
        result.method = SumNormMethod::ExactBruteforce;
        result.threshold_bound = 0.0;
        finish(Vector(0), 0.0, 0.0);
        return result;
    }

    // Threshold family: every distinct split {|phi| > delta} plus a log grid of deltas.
    std::vector<double> deltas(problem.r.data(), problem.r.data() + problem.r.size());
    const double rmax = problem.r.maxCoeff(), rmin = problem.r.minCoeff();
    for (double d : log_grid(rmin * 1e-3, rmax * 1e3, options.delta_grid_points)) deltas.push_back(d);
    deltas.push_back(0.5 * rmin);
    Vector best_threshold_x;
    result.threshold_bound = kInf;
    for (double d : deltas) {
        Vector x(problem.r.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = problem.r(i) > d ? problem.r(i) : 0.0;
        const double v = problem.objective(x);
        if (v < result.threshold_bound) {
            result.threshold_bound = v;
            result.threshold_delta = d;
            best_threshold_x = x;
        }
    }

    if (active.size() == 1) {
        // F(x) is affine in the single magnitude, so an endpoint is optimal.
        result.method = SumNormMethod::ExactBruteforce;
        const double w = problem.w(0), r = problem.r(0);
        const double high = std::pow(w, 1.0 / q) * r, low = std::sqrt(w) * r;
        Vector x(1);
        x(0) = high <= low ? r : 0.0;
        finish(x, std::min(high, low), std::min(high, low));
        return result;
    }

    // Convex descent along the stationarity family, on log(kappa).
    result.method = SumNormMethod::ConvexOpt;
    const double scale = std::pow(rmax, 2.0 - q);
    auto family_value = [&](double log_kappa) { return problem.objective(problem.split_for(std::exp(log_kappa))); };

    const int scan = 241;
    const double lo = std::log(scale * 1e-12), hi = std::log(scale * 1e12);
    double best_log = lo, best_val = kInf;
    int best_k = 0;
    for (int k = 0; k < scan; ++k) {
        const double lk = lo + (hi - lo) * k / (scan - 1);
        const double v = family_value(lk);
        if (v < best_val) { best_val = v; best_log = lk; best_k = k; }
    }
    const double step = (hi - lo) / (scan - 1);
    double refined_log = best_log;
    const double refined = golden_minimize(family_value, best_log - (best_k > 0 ? step : 0.0),
                                           best_log + (best_k < scan - 1 ? step : 0.0), options.max_iterations,
                                           refined_log);
    Vector x = refined <= best_val ? problem.split_for(std::exp(refined_log)) : problem.split_for(std::exp(best_log));
    double value = problem.objective(x);

    // Stationarity root kappa = B / A^{q-1}; bisection pins x well below the flatness of F.
    auto stationarity = [&](double log_kappa) {
        const double kappa = std::exp(log_kappa);
        const Vector xk = problem.split_for(kappa);
        const double A = problem.lq(xk), B = problem.l2(xk);
        return B - kappa * (q == 1.0 ? 1.0 : std::pow(A, q - 1.0));
    };
    {
        const double center = refined <= best_val ? refined_log : best_log;
        double a = center - step, b = center + step;
        double ga = stationarity(a), gb = stationarity(b);
        for (int widen = 0; widen < 8 && ga * gb > 0.0; ++widen) {
            a -= step;
            b += step;
            ga = stationarity(a);
            gb = stationarity(b);
        }
        if (ga * gb <= 0.0 && std::isfinite(ga) && std::isfinite(gb)) {
            for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
                const double mid = 0.5 * (a + b), gm = stationarity(mid);
                if ((gm <= 0.0) == (ga <= 0.0)) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            const Vector xr = problem.split_for(std::exp(0.5 * (a + b)));
            const double vr = problem.objective(xr);
            if (vr <= value * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) {
                value = std::min(value, vr);
                x = xr;
            }
        }
    }
    result.iterations = scan + options.max_iterations;

    // Endpoints kappa = 0 (all L^q) and kappa = inf (all L^2).
    for (double kappa : {0.0, kInf}) {
        Vector xe = problem.split_for(kappa);
        if (const double v = problem.objective(xe); v < value) { value = v; x = xe; }
    }
    // Fixed-point polish kappa <- B / A^{q-1}, accepted only when it lowers F.
    for (int it = 0; it < 50; ++it) {
        const double A = problem.lq(x), B = problem.l2(x);
        if (!(A > 0.0 && B > 0.0)) break;
        const double kappa = q == 1.0 ? B : B / std::pow(A, q - 1.0);
        Vector xn = problem.split_for(kappa);
        const double vn = problem.objective(xn);
        if (!(vn < value)) break;
        value = vn;
        x = xn;
    }
    if (result.threshold_bound < value) {
        value = result.threshold_bound;
        x = best_threshold_x;
    }

    double lower = problem.lower_bound(x);
    if (value - lower > options.relative_tolerance * (1.0 + value)) {
        // Coordinate-wise golden refinement on x; F is convex so each sweep is monotone.
        for (int sweep = 0; sweep < options.max_iterations && value - lower > options.relative_tolerance * (1.0 + value);
             ++sweep) {
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                auto along = [&](double xi) {
                    Vector y = x;
                    y(i) = xi;
                    return problem.objective(y);
                };
                double arg = x(i);
                const double v = golden_minimize(along, 0.0, problem.r(i), 200, arg);
                if (v < value) { value = v; x(i) = arg; }
            }
            lower = std::max(lower, problem.lower_bound(x));
            ++result.iterations;
        }
        if (value - lower > options.relative_tolerance * (1.0 + value))
            throw ConvergenceError("sum_norm: certified gap " + std::to_string(value - lower) +
                                       " above tolerance after " + std::to_string(result.iterations) + " iterations",
                                   value);
    }
    finish(x, value, lower);
    return result;
}

SumNormResult sum_norm(const MarkFunction& phi, const LevyMeasure& m, double q, const SumNormOptions& options) {
    check_exponent(q);
    phi.check_compatible(m);
    if (phi.is_atomic()) {
        const auto& atoms = m.atomic_part().atoms;
        Vector w(static_cast<Eigen::Index>(atoms.size()));
        for (std::size_t j = 0; j < atoms.size(); ++j) w(static_cast<Eigen::Index>(j)) = atoms[j].weight;
        return sum_norm_weighted(w, phi.values(), q, options);
    }

    // Density case: best threshold bound over log(delta), labelled as an upper bound.
    SumNormResult result;
    result.method = SumNormMethod::ThresholdUpperBound;
    result.gap = kInf;
    const PowerForm& pf = phi.power_form();
    const double c = pf.coeff.norm();
    if (c == 0.0) {
        result.value = 0.0;
        result.threshold_bound = 0.0;
        result.threshold_delta = 1.0;
        result.phi_low = phi;
        result.phi_high = MarkFunction::power(pf.coeff, pf.band_lo, pf.band_lo);
        result.gap = 0.0;
        result.method = SumNormMethod::ExactBruteforce;
        return result;
    }
    auto bound_at = [&](double log_delta) { return threshold_bound(phi, m, q, std::exp(log_delta)); };
    const int n = options.delta_grid_points;
    const double lo = std::log(c * 1e-8), hi = std::log(c * 1e8);
    double best_log = lo, best_val = kInf;
    int best_k = 0;
    for (int k = 0; k < n; ++k) {
        const double lk = lo + (hi - lo) * k / (n - 1);
        const double v = bound_at(lk);
        if (v < best_val) { best_val = v; best_log = lk; best_k = k; }
    }
    if (std::isfinite(best_val)) {
        const double step = (hi - lo) / (n - 1);
        double arg = best_log;
        const double v = golden_minimize(bound_at, best_log - (best_k > 0 ? step : 0.0),
                                         best_log + (best_k < n - 1 ? step : 0.0), options.max_iterations, arg);
        if (v < best_val) { best_val = v; best_log = arg; }
    }
    result.value = best_val;
    result.threshold_bound = best_val;
    result.threshold_delta = std::exp(best_log);
    auto [low, high] = threshold_split(phi, result.threshold_delta);
    result.phi_low = std::move(low);
    result.phi_high = std::move(high);
    result.iterations = n + options.max_iterations;
    return result;
}

DualWeight dual_norm(const MarkFunction& ell, const LevyMeasure& m) {
    require(ell.codomain_dim() == 1, "dual weight must be scalar valued");
    ell.check_compatible(m);
    DualWeight dw{ell, 0.0, 0.0, true};
    if (ell.is_atomic()) {
        dw.sup_norm = ell.values().cols() ? ell.values().cwiseAbs().maxCoeff() : 0.0;
    } else {
        const PowerForm& pf = ell.power_form();
        const double c = pf.coeff.norm();
        if (c > 0.0 && m.band_moment(0.0, pf.band_lo, pf.band_hi) > 0.0) {
            const auto& pl = m.power_law_part();
            dw.sup_norm = c * std::min(pf.band_hi, pl.cutoff);
        }
    }
    dw.l2_norm = lp_norm(ell, m, 2.0);
    dw.finite = std::isfinite(dw.sup_norm) && std::isfinite(dw.l2_norm);
    return dw;
}

BoundCheck pairing_bound_check(const DualWeight& ell, const MarkFunction& psi, const MarkFunction& phi,
                               const LevyMeasure& m) {
    require(ell.ell.is_atomic() && psi.is_atomic() && phi.is_atomic(), "pairing check needs atom-valued functions");
    const MarkFunction diff = psi - phi;
    diff.check_compatible(m);
    const auto& atoms = m.atomic_part().atoms;
    Vector pairing = Vector::Zero(diff.codomain_dim());
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        pairing += atoms[j].weight * ell.ell.values()(0, col) * diff.values().col(col);
    }
    BoundCheck check;
    check.lhs = pairing.norm();
    check.rhs = ell.norm() * sum_norm(diff, m, 1.0).value;
    check.ok = check.lhs <= check.rhs * (1.0 + 1e-9);
    return check;
}

SumNormResult product_sum_norm(const TimeSlicedFunction& phi, const LevyMeasure& m, double q) {
    require(phi.grid.size() == phi.slices.size() + 1, "time grid must have one more node than slices");
    require(m.is_atomic(), "product-measure norms need an atomic mark measure");
    const auto& atoms = m.atomic_part().atoms;
    const auto n_atoms = static_cast<Eigen::Index>(atoms.size());
    const auto n_slices = static_cast<Eigen::Index>(phi.slices.size());
    const int d = phi.slices.empty() ? 1 : phi.slices.front().codomain_dim();
    Vector w(n_atoms * n_slices);
    Matrix values(d, n_atoms * n_slices);
    for (Eigen::Index s = 0; s < n_slices; ++s) {
        const auto& slice = phi.slices[static_cast<std::size_t>(s)];
        slice.check_compatible(m);
        require(slice.codomain_dim() == d, "slices disagree on codomain dimension");
        const double h = phi.grid[static_cast<std::size_t>(s) + 1] - phi.grid[static_cast<std::size_t>(s)];
        require(h > 0.0, "time grid must be strictly increasing");
        for (Eigen::Index j = 0; j < n_atoms; ++j) {
            w(s * n_atoms + j) = atoms[static_cast<std::size_t>(j)].weight * h;
            values.col(s * n_atoms + j) = slice.values().col(j);
        }
    }
    return sum_norm_weighted(w, values, q);
}

BoundCheck time_integrated_bound_check(const TimeSlicedFunction& phi, const LevyMeasure& m, double T) {
    require(!phi.grid.empty() && std::abs(phi.grid.back() - T) <= 1e-12 * std::max(1.0, T) && phi.grid.front() == 0.0,
            "slice grid must cover [0, T]");
    BoundCheck check;
    for (std::size_t s = 0; s < phi.slices.size(); ++s)
        check.lhs += (phi.grid[s + 1] - phi.grid[s]) * sum_norm(phi.slices[s], m, 1.0).value;
    check.rhs = std::max(1.0, std::sqrt(T)) * product_sum_norm(phi, m, 1.0).value;
    check.ok = check.lhs <= check.rhs * (1.0 + 1e-6);
    return check;
}

bool threshold_pieces_finite(const MarkFunction& phi, const LevyMeasure& m, double q, const std::vector<double>& deltas) {
    for (double d : deltas) {
        const auto [low, high] = threshold_split(phi, d);
        if (!std::isfinite(lp_norm(low, m, 2.0)) || !std::isfinite(lp_norm(high, m, q))) return false;
    }
    return true;
}

}  // namespace bsdelab
