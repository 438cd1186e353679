#pragma once

// Backward solver for
//   Y_t = xi + ∫_t^T f(s,Y_s,Z_s,psi_s) ds - ∫_t^T∫ psi_s(u) π~(du,ds) - ∫_t^T Z_s dW_s - ∫_t^T dM_s
// on simulated Brownian–Poisson scenarios with an atomic jump measure.
// In the filtration generated by W and π the orthogonal martingale M vanishes;
// it is carried as an explicit zero path.

#include "bsdelab/jump_paths.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bsdelab {

/// q_n(x) = x n / (|x| ∨ n).
Vector truncate_q(const Vector& x, double n);

struct GeneratorSpec {
    /// f(t, y ∈ R^d, z ∈ R^{d×k}, psi with d × J atom values) -> R^d.
    std::function<Vector(double, const Vector&, const Matrix&, const MarkFunction&)> f;
    double alpha_mono = 0.0;
    double K_z = 0.0;
    double K_psi = 0.0;
    bool depends_on_brownian = false;
    std::string name;

    Vector operator()(double t, const Vector& y, const Matrix& z, const MarkFunction& psi) const {
        return f(t, y, z, psi);
    }
    /// f(t, 0, 0, 0).
    Vector at_origin(double t, int d, int k, std::size_t atoms) const;
};

/// xi = g(W_T, counts_T); counts are per-atom jump counts on (0,T].
struct TerminalSpec {
    std::function<Vector(const Vector&, const Eigen::VectorXi&)> g;
    int dim = 1;
    bool depends_on_brownian = false;
    std::string name;

    Vector operator()(const Vector& w, const Eigen::VectorXi& counts) const { return g(w, counts); }
};

struct TruncatedProblem {
    TerminalSpec xi;
    GeneratorSpec f;
    double level;
};

/// xi_n = q_n(xi), f_n = f - f(t,0,0,0) + q_n(f(t,0,0,0)).
TruncatedProblem build_truncated_problem(const TerminalSpec& xi, const GeneratorSpec& f, double n, int k,
                                         std::size_t atoms);

enum class SolveMethod { MarkovExact, Regression };

std::string to_string(SolveMethod m);
SolveMethod solve_method_from_string(const std::string& s);

struct SolverOptions {
    SolveMethod method = SolveMethod::MarkovExact;
    bool explicit_step = false;      ///< evaluate f at E[Y_{i+1}|F_i] instead of solving for Y_i
    double fixed_point_tol = 1e-12;
    int fixed_point_max_iter = 200;
    double damping = 1.0;            ///< y <- (1-damping) y + damping * T(y); lowered automatically when h|alpha| is large
    double poisson_tail = 1e-12;     ///< markov-exact: dropped Poisson tail mass
    int regression_degree = 2;       ///< total degree of the polynomial features
    int threads = 0;
};

struct StepDiagnostics {
    int rank = 0;
    int features = 0;
    double condition = 1.0;
};

struct SolverDiagnostics {
    SolveMethod method = SolveMethod::MarkovExact;
    int max_fixed_point_iterations = 0;
    double max_fixed_point_residual = 0.0;
    std::vector<int> lattice_sizes;            ///< markov-exact
    double truncated_tail_mass = 0.0;          ///< markov-exact, largest per-step value
    std::vector<StepDiagnostics> regression;   ///< per step, regression only
};

struct PathSolution {
    Matrix Y;          ///< d × (n+1)
    Matrix Z;          ///< (d·k) × n, column i is vec(Z_{t_i}) column-major
    Matrix psi;        ///< (d·J) × n, column i is vec(psi_{t_i}) with atom j in rows [j d, (j+1) d)
    Matrix M;          ///< d × (n+1), identically zero
    std::vector<double> event_times;
    Matrix Y_before;   ///< Y_{s-} at each jump time
    Matrix Y_after;    ///< Y_s at each jump time

    Matrix z_at(int i, int d, int k) const;
    MarkFunction psi_at(int i, int d) const;
};

struct BsdeSolution {
    TimeGrid grid;
    int d = 1;
    int k = 0;
    std::size_t atoms = 0;
    std::vector<PathSolution> paths;
    SolverDiagnostics diagnostics;
};

/// Scenarios are sampled from (measure, grid, k, seed) with path indices 0..paths-1.
std::vector<PathBundle> sample_scenarios(const LevyMeasure& m, const TimeGrid& grid, int k, std::uint64_t seed,
                                         std::size_t paths, int threads = 0);

/// markov-exact requires one atom, and xi and f independent of W; the state is the jump count.
/// Throws InvalidInput for unmet preconditions and ConvergenceError when the y fixed point fails.
BsdeSolution solve_backward(const GeneratorSpec& f, const TerminalSpec& xi, const LevyMeasure& m,
                            const std::vector<PathBundle>& scenarios, const SolverOptions& options = {});

struct ResidualReport {
    std::vector<double> per_step;   ///< |r_i| for each step
    double max_abs = 0.0;
    double summed = 0.0;            ///< |Σ r_i|, the telescoped residual on [0,T]
    double terminal_mismatch = 0.0; ///< |Y_T - xi|
    int worst_step = -1;
};

/// r_i = Y_i - Y_{i+1} - h f(t_i,Y_i,Z_i,psi_i) + Σ_{(t_i,t_{i+1}]} psi_i(u) - h ∫psi_i dmu + Z_i ΔW_i.
ResidualReport residual_check(const BsdeSolution& sol, std::size_t path, const GeneratorSpec& f,
                              const TerminalSpec& xi, const LevyMeasure& m, const PathBundle& scenario);

struct BatterySpec {
    int samples = 2000;
    double y_radius = 10.0;
    double z_radius = 10.0;
    double psi_radius = 10.0;
    std::vector<double> h2_radii{1.0, 10.0, 100.0};
    int d = 1;
    int k = 1;
    double T = 1.0;
    std::uint64_t seed = 1;
};

struct AssumptionReport {
    double observed_alpha = -kInf;      ///< max <f(y)-f(y'),y-y'>/|y-y'|^2 over the battery
    bool h1_ok = true;
    double observed_K_z = 0.0;          ///< max |f(z)-f(z')|/|z-z'| with psi fixed
    double observed_K_psi = 0.0;        ///< max |f(psi)-f(psi')|/||psi-psi'||_{L^1+L^2}
    double lipschitz_ratio = 0.0;       ///< max |Δf| / (K_z|Δz| + K_psi ||Δpsi||)
    bool h3_ok = true;
    std::vector<double> h2_sup;         ///< sup_{|y|<=r} |f(t,y,0,0)-f(t,0,0,0)| per radius
    bool h2_ok = true;
    Vector h1_witness_y, h1_witness_y2;
};

AssumptionReport validate_generator(const GeneratorSpec& f, const LevyMeasure& m, const BatterySpec& battery);

// Built-in problems: counterexample, zero, linear-decay, brownian-terminal.
struct Problem {
    std::string id;
    LevyMeasure measure;
    GeneratorSpec f;
    TerminalSpec xi;
    int k = 0;
    SolveMethod preferred = SolveMethod::MarkovExact;
    double condition_c_K = 0.0;                   ///< K in <y/|y|, f> <= f_t + alpha|y| + K|z| + K||psi||
    double condition_c_alpha = 0.0;
    std::function<double(double)> f_t = [](double) { return 0.0; };
};

struct ProblemParams {
    double c = 1.0;       ///< zero / linear-decay terminal value
    double lambda = 1.0;  ///< linear-decay rate
};

Problem make_problem(const std::string& id, const ProblemParams& params = {});
std::vector<std::string> problem_ids();

}  // namespace bsdelab
