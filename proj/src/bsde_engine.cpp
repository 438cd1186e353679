#include "bsdelab/bsde_engine.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace bsdelab {

Vector truncate_q(const Vector& x, double n) {
    require(n > 0.0, "truncate_q: level must be > 0");
    const double r = x.norm();
    if (r <= n) return x;
    return x * (n / r);
}

Vector GeneratorSpec::at_origin(double t, int d, int k, std::size_t atoms) const {
    return f(t, Vector::Zero(d), Matrix::Zero(d, k), MarkFunction::atoms(Matrix::Zero(d, static_cast<Eigen::Index>(atoms))));
}

TruncatedProblem build_truncated_problem(const TerminalSpec& xi, const GeneratorSpec& f, double n, int k,
                                         std::size_t atoms) {
    require(n > 0.0, "truncation level must be > 0");
    TruncatedProblem out{xi, f, n};
    out.xi.g = [g = xi.g, n](const Vector& w, const Eigen::VectorXi& c) { return truncate_q(g(w, c), n); };
    out.xi.name = xi.name + "|q_" + std::to_string(n);
    const int d = xi.dim;
    out.f.f = [base = f, n, d, k, atoms](double t, const Vector& y, const Matrix& z, const MarkFunction& psi) {
        const Vector f0 = base.at_origin(t, d, k, atoms);
        return Vector(base.f(t, y, z, psi) - f0 + truncate_q(f0, n));
    };
    out.f.name = f.name + "|q_" + std::to_string(n);
    return out;
}

std::string to_string(SolveMethod m) { return m == SolveMethod::MarkovExact ? "markov-exact" : "regression"; }

SolveMethod solve_method_from_string(const std::string& s) {
    if (s == "markov-exact") return SolveMethod::MarkovExact;
    if (s == "regression") return SolveMethod::Regression;
    throw InvalidInput("unknown solve method '" + s + "' (expected markov-exact or regression)");
}

Matrix PathSolution::z_at(int i, int d, int k) const {
    return Eigen::Map<const Matrix>(Z.col(i).data(), d, k);
}

MarkFunction PathSolution::psi_at(int i, int d) const {
    const auto atoms = psi.rows() / std::max(d, 1);
    return MarkFunction::atoms(Eigen::Map<const Matrix>(psi.col(i).data(), d, atoms));
}

std::vector<PathBundle> sample_scenarios(const LevyMeasure& m, const TimeGrid& grid, int k, std::uint64_t seed,
                                         std::size_t paths, int threads) {
    std::vector<PathBundle> out(paths);
    parallel_for(paths, threads, [&](std::size_t i) { out[i] = sample_path(m, grid, k, seed, i); });
    return out;
}

namespace {

struct FixedPoint {
    Vector y;
    int iterations = 0;
    double residual = 0.0;
};

// y = base + h f(t, y, z, psi), damped Picard iteration.
FixedPoint solve_step(const GeneratorSpec& f, double t, double h, const Vector& base, const Matrix& z,
                      const MarkFunction& psi, const SolverOptions& opt) {
    if (opt.explicit_step) return {base + h * f(t, base, z, psi), 0, 0.0};
    const double theta = opt.damping / (1.0 + h * std::abs(f.alpha_mono));
    Vector y = base;
    for (int it = 1; it <= opt.fixed_point_max_iter; ++it) {
        const Vector next = (1.0 - theta) * y + theta * (base + h * f(t, y, z, psi));
        const double change = (next - y).norm();
        y = next;
        if (!y.allFinite()) break;
        if (change <= opt.fixed_point_tol * (1.0 + y.norm())) {
            const double res = (y - base - h * f(t, y, z, psi)).norm();
            return {y, it, res};
        }
    }
    throw ConvergenceError("implicit step did not converge at t=" + std::to_string(t), y.norm());
}

// Between grid nodes Y follows the Euler dynamics of the scheme:
// dY = -f ds + psi dπ~ + Z dW, with W interpolated linearly.
void fill_event_values(PathSolution& ps, const PathBundle& sc, const GeneratorSpec& f, const LevyMeasure& m,
                       int d, int k) {
    const auto& g = sc.grid;
    const auto J = static_cast<Eigen::Index>(sc.jumps.size());
    ps.Y_before.resize(d, J);
    ps.Y_after.resize(d, J);
    ps.event_times.clear();
    int current = -1;
    Vector jumps = Vector::Zero(d);
    for (Eigen::Index e = 0; e < J; ++e) {
        const auto& ev = sc.jumps[static_cast<std::size_t>(e)];
        const int i = g.interval_of(ev.time);
        if (i != current) {
            current = i;
            jumps.setZero();
        }
        const double h = g.step(i), ds = ev.time - g.times[i];
        const Matrix z = ps.z_at(i, d, k);
        const MarkFunction psi = ps.psi_at(i, d);
        const Vector drift = f(g.times[i], ps.Y.col(i), z, psi) + integrate(psi, m);
        Vector cont = ps.Y.col(i) - ds * drift;
        if (k > 0) cont += z * (sc.brownian_increments.col(i) * (ds / h));
        ps.Y_before.col(e) = cont + jumps;
        jumps += psi.evaluate(ev.mark, ev.atom);
        ps.Y_after.col(e) = cont + jumps;
        ps.event_times.push_back(ev.time);
    }
}

void check_scenarios(const std::vector<PathBundle>& sc, const LevyMeasure& m) {
    require(!sc.empty(), "solve: no scenarios");
    require(m.is_atomic(), "solve: the jump measure must be atomic");
    for (const auto& s : sc) {
        require(s.grid.times == sc.front().grid.times, "solve: scenarios must share one grid");
        require(s.brownian_increments.rows() == sc.front().brownian_increments.rows(),
                "solve: scenarios must share the Brownian dimension");
    }
}

BsdeSolution solve_markov(const GeneratorSpec& f, const TerminalSpec& xi, const LevyMeasure& m,
                          const std::vector<PathBundle>& sc, const SolverOptions& opt) {
    require(m.atom_count() == 1, "markov-exact needs a single-atom measure");
    require(!f.depends_on_brownian && !xi.depends_on_brownian, "markov-exact needs xi and f independent of W");
    const TimeGrid& grid = sc.front().grid;
    const int n = grid.steps(), d = xi.dim;
    const int k = static_cast<int>(sc.front().brownian_increments.rows());
    const double rate = m.atomic_part().atoms.front().weight;

    BsdeSolution sol;
    sol.grid = grid;
    sol.d = d;
    sol.k = k;
    sol.atoms = 1;
    sol.diagnostics.method = SolveMethod::MarkovExact;

    std::vector<Eigen::VectorXi> counts(sc.size());
    std::vector<int> max_count(n + 1, 0);
    for (std::size_t p = 0; p < sc.size(); ++p) {
        counts[p] = sc[p].atom_counts(1).row(0).transpose();
        for (int i = 0; i <= n; ++i) max_count[i] = std::max(max_count[i], counts[p](i));
    }

    // Truncated, renormalised Poisson(rate h_i) weights.
    std::vector<std::vector<double>> pmf(n);
    for (int i = 0; i < n; ++i) {
        const double mean = rate * grid.step(i);
        double pk = std::exp(-mean), acc = 0.0;
        for (int j = 0; acc < 1.0 - opt.poisson_tail && j < 100000; ++j) {
            pmf[i].push_back(pk);
            acc += pk;
            pk *= mean / (j + 1);
        }
        sol.diagnostics.truncated_tail_mass = std::max(sol.diagnostics.truncated_tail_mass, 1.0 - acc);
        for (double& w : pmf[i]) w /= acc;
    }

    std::vector<int> size(n + 1);
    size[0] = max_count[0] + 1;
    for (int i = 1; i <= n; ++i)
        size[i] = std::max(max_count[i] + 1, size[i - 1] + static_cast<int>(pmf[i - 1].size()) + 1);
    sol.diagnostics.lattice_sizes = size;

    std::vector<Matrix> u(n + 1), psi(n);
    u[n].resize(d, size[n]);
    const Vector w0 = Vector::Zero(k);
    for (int c = 0; c < size[n]; ++c) u[n].col(c) = xi(w0, Eigen::VectorXi::Constant(1, c));

    for (int i = n - 1; i >= 0; --i) {
        const double h = grid.step(i), t = grid.times[i];
        Matrix ebar = Matrix::Zero(d, size[i] + 1);
        for (int c = 0; c <= size[i]; ++c)
            for (std::size_t j = 0; j < pmf[i].size(); ++j) ebar.col(c) += pmf[i][j] * u[i + 1].col(c + static_cast<int>(j));
        psi[i] = ebar.rightCols(size[i]) - ebar.leftCols(size[i]);
        u[i].resize(d, size[i]);
        std::vector<FixedPoint> fp(static_cast<std::size_t>(size[i]));
        const Matrix z = Matrix::Zero(d, k);
        parallel_for(fp.size(), opt.threads, [&](std::size_t c) {
            const auto ci = static_cast<Eigen::Index>(c);
            fp[c] = solve_step(f, t, h, ebar.col(ci), z, MarkFunction::atoms(psi[i].col(ci)), opt);
        });
        for (int c = 0; c < size[i]; ++c) {
            u[i].col(c) = fp[c].y;
            sol.diagnostics.max_fixed_point_iterations = std::max(sol.diagnostics.max_fixed_point_iterations, fp[c].iterations);
            sol.diagnostics.max_fixed_point_residual = std::max(sol.diagnostics.max_fixed_point_residual, fp[c].residual);
        }
    }

    sol.paths.resize(sc.size());
    parallel_for(sc.size(), opt.threads, [&](std::size_t p) {
        PathSolution& ps = sol.paths[p];
        ps.Y.resize(d, n + 1);
        ps.Z = Matrix::Zero(static_cast<Eigen::Index>(d) * k, n);
        ps.psi.resize(d, n);
        ps.M = Matrix::Zero(d, n + 1);
        for (int i = 0; i <= n; ++i) ps.Y.col(i) = u[i].col(counts[p](i));
        // Y_T = xi exactly, independent of the lattice.
        ps.Y.col(n) = xi(sc[p].brownian_path().col(n), Eigen::VectorXi::Constant(1, counts[p](n)));
        for (int i = 0; i < n; ++i) ps.psi.col(i) = psi[i].col(counts[p](i));
        fill_event_values(ps, sc[p], f, m, d, k);
    });
    return sol;
}

// Monomial exponents of total degree <= degree in `vars` variables.
std::vector<std::vector<int>> monomials(int vars, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(vars, 0);
    auto rec = [&](auto&& self, int pos, int left) -> void {
        if (pos == vars) {
            out.push_back(e);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            e[pos] = a;
            self(self, pos + 1, left - a);
        }
        e[pos] = 0;
    };
    rec(rec, 0, degree);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int v : a) sa += v;
        for (int v : b) sb += v;
        return sa < sb;
    });
    return out;
}

Eigen::RowVectorXd features(const Vector& x, const std::vector<std::vector<int>>& mono) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(mono.size()));
    for (std::size_t j = 0; j < mono.size(); ++j) {
        double v = 1.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            for (int a = 0; a < mono[j][i]; ++a) v *= x(i);
        r(static_cast<Eigen::Index>(j)) = v;
    }
    return r;
}

struct Fit {
    Matrix coef;  // features × rhs, zero rows for pruned columns
    StepDiagnostics diag;
};

Fit least_squares(const Matrix& X, const Matrix& B) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const bool constant = X.col(j).maxCoeff() == X.col(j).minCoeff();
        if (j == 0 || !constant) keep.push_back(j);
    }
    Matrix Xk(X.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) Xk.col(static_cast<Eigen::Index>(j)) = X.col(keep[j]);
    Eigen::ColPivHouseholderQR<Matrix> qr(Xk);
    Fit fit;
    fit.diag.features = static_cast<int>(X.cols());
    fit.diag.rank = static_cast<int>(qr.rank());
    if (fit.diag.rank == 0) throw ConvergenceError("regression design has rank 0", 0.0);
    const auto& R = qr.matrixQR();
    fit.diag.condition = std::abs(R(0, 0)) / std::abs(R(fit.diag.rank - 1, fit.diag.rank - 1));
    const Matrix ck = qr.solve(B);
    fit.coef = Matrix::Zero(X.cols(), B.cols());
    for (std::size_t j = 0; j < keep.size(); ++j) fit.coef.row(keep[j]) = ck.row(static_cast<Eigen::Index>(j));
    return fit;
}

BsdeSolution solve_regression(const GeneratorSpec& f, const TerminalSpec& xi, const LevyMeasure& m,
                              const std::vector<PathBundle>& sc, const SolverOptions& opt) {
    const TimeGrid& grid = sc.front().grid;
    const int n = grid.steps(), d = xi.dim;
    const int k = static_cast<int>(sc.front().brownian_increments.rows());
    const auto J = m.atom_count();
    const int Ji = static_cast<int>(J);
    const std::size_t P = sc.size();
    const auto mono = monomials(k + Ji, opt.regression_degree);

    BsdeSolution sol;
    sol.grid = grid;
    sol.d = d;
    sol.k = k;
    sol.atoms = J;
    sol.diagnostics.method = SolveMethod::Regression;
    sol.diagnostics.regression.resize(static_cast<std::size_t>(n));

    // State x_i = (W_{t_i}, counts_{t_i}) per path.
    std::vector<Matrix> state(P);
    parallel_for(P, opt.threads, [&](std::size_t p) {
        state[p].resize(k + Ji, n + 1);
        state[p].topRows(k) = sc[p].brownian_path();
        state[p].bottomRows(Ji) = sc[p].atom_counts(J).cast<double>();
    });
    auto design = [&](int i) {
        Matrix X(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(mono.size()));
        parallel_for(P, opt.threads, [&](std::size_t p) { X.row(static_cast<Eigen::Index>(p)) = features(state[p].col(i), mono); });
        return X;
    };

    sol.paths.resize(P);
    for (std::size_t p = 0; p < P; ++p) {
        PathSolution& ps = sol.paths[p];
        ps.Y.resize(d, n + 1);
        ps.Z.resize(static_cast<Eigen::Index>(d) * k, n);
        ps.psi.resize(static_cast<Eigen::Index>(d) * Ji, n);
        ps.M = Matrix::Zero(d, n + 1);
        ps.Y.col(n) = xi(state[p].col(n).head(k), state[p].col(n).tail(Ji).cast<int>());
    }

    for (int i = n - 1; i >= 0; --i) {
        const double h = grid.step(i), t = grid.times[i];
        Matrix rhs(static_cast<Eigen::Index>(P), d + d * k + d * Ji);
        for (std::size_t p = 0; p < P; ++p) {
            const auto pr = static_cast<Eigen::Index>(p);
            const Vector y1 = sol.paths[p].Y.col(i + 1);
            rhs.row(pr).head(d) = y1.transpose();
            const Vector dw = sc[p].brownian_increments.col(i);
            for (int c = 0; c < k; ++c) rhs.row(pr).segment(d + c * d, d) = (y1 * (dw(c) / h)).transpose();
            // psi_j ≈ E[Y_{i+1} ΔÑ_j | F_i] / (w_j h), ΔÑ_j the compensated jump count of atom j.
            for (int j = 0; j < Ji; ++j) {
                const double wj = m.atomic_part().atoms[static_cast<std::size_t>(j)].weight;
                const double dn = state[p](k + j, i + 1) - state[p](k + j, i) - wj * h;
                rhs.row(pr).segment(d + d * k + j * d, d) = (y1 * (dn / (wj * h))).transpose();
            }
        }
        const Matrix X0 = design(i);
        const Fit fit = least_squares(X0, rhs);
        sol.diagnostics.regression[static_cast<std::size_t>(i)] = fit.diag;
        const Matrix fitted = X0 * fit.coef;

        std::vector<FixedPoint> fp(P);
        parallel_for(P, opt.threads, [&](std::size_t p) {
            const auto pr = static_cast<Eigen::Index>(p);
            PathSolution& ps = sol.paths[p];
            ps.Z.col(i) = fitted.row(pr).segment(d, d * k).transpose();
            ps.psi.col(i) = fitted.row(pr).tail(d * Ji).transpose();
            fp[p] = solve_step(f, t, h, fitted.row(pr).head(d).transpose(), ps.z_at(i, d, k), ps.psi_at(i, d), opt);
            ps.Y.col(i) = fp[p].y;
        });
        for (const auto& r : fp) {
            sol.diagnostics.max_fixed_point_iterations = std::max(sol.diagnostics.max_fixed_point_iterations, r.iterations);
            sol.diagnostics.max_fixed_point_residual = std::max(sol.diagnostics.max_fixed_point_residual, r.residual);
        }
    }
    parallel_for(P, opt.threads, [&](std::size_t p) { fill_event_values(sol.paths[p], sc[p], f, m, d, k); });
    return sol;
}

}  // namespace

BsdeSolution solve_backward(const GeneratorSpec& f, const TerminalSpec& xi, const LevyMeasure& m,
                            const std::vector<PathBundle>& scenarios, const SolverOptions& options) {
    check_scenarios(scenarios, m);
    require(xi.dim >= 1, "terminal condition must have dimension >= 1");
    require(options.fixed_point_tol > 0.0 && options.fixed_point_max_iter >= 1, "invalid fixed-point settings");
    require(options.damping > 0.0 && options.damping <= 1.0, "damping must lie in (0,1]");
    if (options.method == SolveMethod::MarkovExact) return solve_markov(f, xi, m, scenarios, options);
    require(options.regression_degree >= 1, "regression degree must be >= 1");
    return solve_regression(f, xi, m, scenarios, options);
}

ResidualReport residual_check(const BsdeSolution& sol, std::size_t path, const GeneratorSpec& f,
                              const TerminalSpec& xi, const LevyMeasure& m, const PathBundle& scenario) {
    require(path < sol.paths.size(), "residual: path index out of range");
    require(scenario.grid.times == sol.grid.times, "residual: solution and scenario must share a grid");
    const PathSolution& ps = sol.paths[path];
    const int n = sol.grid.steps(), d = sol.d, k = sol.k;

    ResidualReport rep;
    rep.per_step.resize(static_cast<std::size_t>(n));
    std::vector<Vector> jump_sum(static_cast<std::size_t>(n), Vector::Zero(d));
    for (const auto& ev : scenario.jumps) {
        const int i = sol.grid.interval_of(ev.time);
        jump_sum[static_cast<std::size_t>(i)] += ps.psi_at(i, d).evaluate(ev.mark, ev.atom);
    }
    Vector total = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
        const double h = sol.grid.step(i);
        const Matrix z = ps.z_at(i, d, k);
        const MarkFunction psi = ps.psi_at(i, d);
        Vector r = ps.Y.col(i) - ps.Y.col(i + 1) - h * f(sol.grid.times[i], ps.Y.col(i), z, psi) +
                   jump_sum[static_cast<std::size_t>(i)] - h * integrate(psi, m);
        if (k > 0) r += z * scenario.brownian_increments.col(i);
        total += r;
        rep.per_step[static_cast<std::size_t>(i)] = r.norm();
        if (r.norm() > rep.max_abs) {
            rep.max_abs = r.norm();
            rep.worst_step = i;
        }
    }
    rep.summed = total.norm();
    const Matrix w = scenario.brownian_path();
    const Eigen::VectorXi counts = scenario.atom_counts(sol.atoms).col(n);
    rep.terminal_mismatch = (ps.Y.col(n) - xi(w.col(n), counts)).norm();
    return rep;
}

AssumptionReport validate_generator(const GeneratorSpec& f, const LevyMeasure& m, const BatterySpec& b) {
    require(b.samples >= 1 && b.d >= 1 && b.k >= 0, "battery: invalid sizes");
    require(m.is_atomic(), "battery: generator checks need an atomic measure");
    const auto J = static_cast<Eigen::Index>(m.atom_count());
    PhiloxStream rng(b.seed, StreamTag::Battery, 0);
    auto cube = [&](Eigen::Index rows, Eigen::Index cols, double r) {
        Matrix a(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = r * (2.0 * rng.uniform() - 1.0);
        return a;
    };
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : (num > 0.0 ? kInf : 0.0); };

    AssumptionReport rep;
    for (int s = 0; s < b.samples; ++s) {
        const double t = b.T * rng.uniform();
        const Vector y = cube(b.d, 1, b.y_radius), y2 = cube(b.d, 1, b.y_radius);
        const Matrix z = cube(b.d, b.k, b.z_radius), z2 = cube(b.d, b.k, b.z_radius);
        const MarkFunction psi = MarkFunction::atoms(cube(b.d, J, b.psi_radius));
        const MarkFunction psi2 = MarkFunction::atoms(cube(b.d, J, b.psi_radius));

        const Vector fy = f(t, y, z, psi);
        const double dy2 = (y - y2).squaredNorm();
        if (dy2 > 0.0) {
            const double a = (fy - f(t, y2, z, psi)).dot(y - y2) / dy2;
            if (a > rep.observed_alpha) {
                rep.observed_alpha = a;
                rep.h1_witness_y = y;
                rep.h1_witness_y2 = y2;
            }
        }
        const double dz = (z - z2).norm();
        const double dpsi = sum_norm(psi - psi2, m, 1.0).value;
        rep.observed_K_z = std::max(rep.observed_K_z, ratio((fy - f(t, y, z2, psi)).norm(), dz));
        rep.observed_K_psi = std::max(rep.observed_K_psi, ratio((fy - f(t, y, z, psi2)).norm(), dpsi));
        rep.lipschitz_ratio =
            std::max(rep.lipschitz_ratio, ratio((fy - f(t, y, z2, psi2)).norm(), f.K_z * dz + f.K_psi * dpsi));
    }
    rep.h1_ok = rep.observed_alpha <= f.alpha_mono + 1e-9 * (1.0 + std::abs(f.alpha_mono));
    rep.h3_ok = rep.lipschitz_ratio <= 1.0 + 1e-9;

    const Matrix z0 = Matrix::Zero(b.d, b.k);
    const MarkFunction psi0 = MarkFunction::atoms(Matrix::Zero(b.d, J));
    for (double r : b.h2_radii) {
        double sup = 0.0;
        for (int s = 0; s < b.samples; ++s) {
            const double t = b.T * rng.uniform();
            Vector dir(b.d);
            for (int i = 0; i < b.d; ++i) dir(i) = rng.normal();
            const double nrm = dir.norm();
            const Vector y = nrm > 0.0 ? Vector(dir * (r * std::pow(rng.uniform(), 1.0 / b.d) / nrm)) : Vector::Zero(b.d);
            sup = std::max(sup, (f(t, y, z0, psi0) - f(t, Vector::Zero(b.d), z0, psi0)).norm());
        }
        rep.h2_sup.push_back(sup);
        rep.h2_ok = rep.h2_ok && std::isfinite(sup);
    }
    return rep;
}

std::vector<std::string> problem_ids() { return {"counterexample", "zero", "linear-decay", "brownian-terminal"}; }

Problem make_problem(const std::string& id, const ProblemParams& params) {
    const LevyMeasure delta1 = LevyMeasure::atomic({1.0}, {1.0});
    auto count_terminal = [] {
        TerminalSpec xi;
        xi.g = [](const Vector&, const Eigen::VectorXi& c) { return Vector::Constant(1, c(0)); };
        xi.name = "N_T";
        return xi;
    };
    auto constant_terminal = [](double c) {
        TerminalSpec xi;
        xi.g = [c](const Vector&, const Eigen::VectorXi&) { return Vector::Constant(1, c); };
        xi.name = "constant";
        return xi;
    };

    if (id == "counterexample") {
        GeneratorSpec f;
        f.f = [](double, const Vector&, const Matrix&, const MarkFunction& psi) { return Vector(-2.0 * psi.values().col(0)); };
        f.K_psi = 2.0;
        f.name = "-2 psi(1)";
        Problem p{id, delta1, f, count_terminal()};
        p.condition_c_K = 2.0;
        return p;
    }
    if (id == "zero") {
        GeneratorSpec f;
        f.f = [](double, const Vector& y, const Matrix&, const MarkFunction&) { return Vector(Vector::Zero(y.size())); };
        f.name = "0";
        return Problem{id, delta1, f, constant_terminal(params.c)};
    }
    if (id == "linear-decay") {
        require(params.lambda >= 0.0, "linear-decay: lambda must be >= 0");
        GeneratorSpec f;
        const double lambda = params.lambda;
        f.f = [lambda](double, const Vector& y, const Matrix&, const MarkFunction&) { return Vector(-lambda * y); };
        f.alpha_mono = -lambda;
        f.name = "-lambda y";
        Problem p{id, delta1, f, constant_terminal(params.c)};
        p.condition_c_alpha = -lambda;
        return p;
    }
    if (id == "brownian-terminal") {
        const LevyMeasure two = LevyMeasure::atomic({1.0, -1.0}, {1.0, 0.5});
        GeneratorSpec f;
        f.f = [](double, const Vector& y, const Matrix& z, const MarkFunction& psi) {
            return Vector(-0.5 * y + 0.5 * z.col(0) + 0.25 * (psi.values().col(0) + psi.values().col(1)));
        };
        f.alpha_mono = -0.5;
        f.K_z = 0.5;
        f.K_psi = dual_norm(MarkFunction::scalar_atoms({0.25 / 1.0, 0.25 / 0.5}), two).norm();
        f.depends_on_brownian = true;
        f.name = "-y/2 + z/2 + (psi(1)+psi(-1))/4";
        TerminalSpec xi;
        xi.g = [](const Vector& w, const Eigen::VectorXi& c) { return Vector::Constant(1, w(0) + c(0) - c(1)); };
        xi.depends_on_brownian = true;
        xi.name = "W_T + N_T(1) - N_T(-1)";
        Problem p{id, two, f, xi, 1, SolveMethod::Regression};
        p.condition_c_alpha = -0.5;
        p.condition_c_K = std::max(0.5, f.K_psi);
        return p;
    }
    throw InvalidInput("unknown problem '" + id + "'");
}

}  // namespace bsdelab
