#pragma once

// Monte Carlo checks of the quantitative statements about BSDE solutions:
// E^p norms, the a priori ratio, BDG and Bichteler–Jacod sandwiches,
// the strict integral gap of the counterexample and truncation stability.
// Every estimate carries a batch-means standard error (>= 30 batches).

#include "bsdelab/bsde_engine.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bsdelab {

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

inline constexpr int kMinBatches = 30;

/// Mean of `values` with the standard error of `batches` contiguous batch means.
Estimate batch_estimate(const std::vector<double>& values, int batches = kMinBatches);

struct EpDiagnostics {
    double p = 0.0;
    Estimate sup_y;  ///< E[sup_t |Y_t|^p]
    Estimate z;      ///< E[(∫|Z|^2 dt)^{p/2}]
    Estimate psi;    ///< E[(∫∫|psi|^2 dπ)^{p/2}]
    Estimate m;      ///< E[[M]_T^{p/2}]
    Estimate total;  ///< sum of the four, per path
};

EpDiagnostics ep_norms(const BsdeSolution& sol, double p, int batches = kMinBatches);

/// E^p diagnostics of the difference of two solutions on the same scenarios.
EpDiagnostics ep_norms_difference(const BsdeSolution& a, const BsdeSolution& b, double p,
                                  int batches = kMinBatches);

class ConditionCMisuse : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct ConditionCSpec {
    std::function<double(double)> f_t;  ///< non-negative, deterministic
    double alpha = 0.0;
    double K = 0.0;
};

struct AprioriReport {
    EpDiagnostics terms;
    Estimate lhs;
    Estimate rhs;              ///< E[|xi|^p + (∫ f_r dr)^p]
    double ratio = 0.0;        ///< lhs / rhs, 0 when both vanish
    bool condition_c_ok = true;
    double condition_c_excess = 0.0;  ///< largest sampled violation, <= 0 when ok
};

/// Throws ConditionCMisuse when rhs = 0 but lhs > 0.
AprioriReport apriori_ratio(const BsdeSolution& sol, const std::vector<PathBundle>& scenarios, const TerminalSpec& xi,
                            const GeneratorSpec& f, const LevyMeasure& m, const ConditionCSpec& cond, double p,
                            const BatterySpec& spot = {}, int batches = kMinBatches);

struct GapReport {
    double p = 0.0;
    double T = 0.0;
    std::size_t paths = 0;
    Estimate i1;
    Estimate i2;
    Estimate paired;            ///< per-path I2 - I1
    double combined_se = 0.0;   ///< sqrt(se(I1)^2 + se(I2)^2)
    double sigmas = 0.0;        ///< (I2 - I1) / combined_se
    bool significant = false;   ///< I2 - I1 > 3 combined_se
};

/// ∫ |y|^{p-2} 1_{y != 0} dy over [y0, y1] (either order), exact.
double gap_segment_i2(double y0, double y1, double p);
/// ∫ (|y|^2 ∨ |y+1|^2)^{p/2-1} dy over [y0, y1], exact.
double gap_segment_i1(double y0, double y1, double p);

/// Y_t = N_t - (T - t) for a rate-1 Poisson process.
GapReport counterexample_gap(double p, double T, std::size_t paths, std::uint64_t seed, int threads = 0,
                             int batches = kMinBatches);

struct BdgRow {
    double T = 0.0;
    Estimate sup_moment;  ///< E[(N*_T)^p]
    Estimate qv_moment;   ///< E[[N]_T^{p/2}]
    double ratio = 0.0;
    double ratio_se = 0.0;
    bool ratio_defined = false;
};

struct BdgReport {
    double p = 0.0;
    std::vector<BdgRow> rows;
    bool ratios_finite = true;
    double ratio_spread = 1.0;   ///< max ratio / min ratio across the sweep
    Estimate isometry_lhs;       ///< E[|N_T|^2] at the last T
    double isometry_rhs = 0.0;   ///< T ∫|psi|^2 dmu
    bool isometry_ok = true;     ///< within 3 se
};

BdgReport bdg_sandwich(const MarkFunction& psi, const LevyMeasure& m, double p, const std::vector<double>& Ts,
                       std::size_t paths, std::uint64_t seed, int threads = 0, int batches = kMinBatches);

struct BjRow {
    double eta = 0.0;            ///< small-jump truncation (0 for atomic measures)
    double norm_bound = 0.0;     ///< ||psi||_{L^2_nu + L^p_nu}, nu = mu_eta ⊗ Leb[0,T]
    Estimate qv_moment;          ///< E[[N]_T^{p/2}]
    double moment_root = 0.0;    ///< E[[N]_T^{p/2}]^{1/p}
    double ratio = 0.0;          ///< norm_bound / moment_root
    double k_hat = 0.0;          ///< T ||psi||^p_{L^p+L^2} / E[[N]_T^{p/2}]
    double k_hat_l1 = 0.0;       ///< same with ||psi||_{L^1+L^2}
};

struct BjReport {
    double p = 0.0;
    double T = 0.0;
    std::vector<BjRow> rows;
    double limit_norm_bound = 0.0;  ///< norm against the untruncated measure
    bool cofinite = true;
};

BjReport bj_norm_check(const MarkFunction& psi, const LevyMeasure& m, double p, double T, std::size_t paths,
                       std::uint64_t seed, const std::vector<double>& etas = {}, int threads = 0,
                       int batches = kMinBatches);

struct MartingaleReport {
    Estimate mean;          ///< E[N_T]
    Estimate second;        ///< E[N_T^2]
    double isometry = 0.0;  ///< T ∫|psi|^2 dmu
    bool mean_ok = false;
    bool isometry_ok = false;
};

/// Scalar psi; compensated integral over paths with the given seed.
MartingaleReport martingale_check(const MarkFunction& psi, const LevyMeasure& m, double T, std::size_t paths,
                                  std::uint64_t seed, int threads = 0, int batches = kMinBatches);

struct TruncationStudy {
    std::vector<double> levels;
    std::vector<EpDiagnostics> diagnostics;      ///< per level
    std::vector<double> successive_differences;  ///< E^p total of sol_{k+1} - sol_k
    bool decreasing = true;
};

TruncationStudy truncation_stability(const Problem& problem, const std::vector<double>& levels, double p, double T,
                                     int steps, std::size_t paths, std::uint64_t seed, int threads = 0);

}  // namespace bsdelab
