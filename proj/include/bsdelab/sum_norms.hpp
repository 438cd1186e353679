#pragma once

// Norms on L^q_mu, L^2_mu and the sum spaces L^q_mu + L^2_mu (q = 1 or q in (1,2)),
// together with the dual-norm and time-integration bounds built on them.

#include "bsdelab/levy_measure.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bsdelab {

enum class SumNormMethod { ExactBruteforce, ConvexOpt, ThresholdUpperBound };

std::string to_string(SumNormMethod m);

struct SumNormResult {
    double value = 0.0;
    /// phi_low is the L^2 piece, phi_high the L^q piece; phi_low + phi_high == phi.
    MarkFunction phi_low;
    MarkFunction phi_high;
    SumNormMethod method = SumNormMethod::ConvexOpt;
    /// value minus a certified lower bound; +inf when no lower bound is available.
    double gap = kInf;
    double lower_bound = 0.0;
    double threshold_bound = kInf;  ///< best threshold-split bound found
    double threshold_delta = 0.0;   ///< the delta attaining it
    int iterations = 0;
};

struct SumNormOptions {
    int max_iterations = 400;
    double relative_tolerance = 1e-9;  ///< on the certified gap
    int delta_grid_points = 161;       ///< log grid used for the threshold family
};

struct DualWeight {
    MarkFunction ell;
    double sup_norm = 0.0;
    double l2_norm = 0.0;
    bool finite = true;
    double norm() const { return std::max(sup_norm, l2_norm); }
};

/// (∫|phi|^q dmu)^{1/q}, q >= 1; +inf is representable.
double lp_norm(const MarkFunction& phi, const LevyMeasure& m, double q);

/// (phi 1_{|phi| <= delta}, phi 1_{|phi| > delta}).
std::pair<MarkFunction, MarkFunction> threshold_split(const MarkFunction& phi, double delta);

/// ||phi_low||_{L^2} + ||phi_high||_{L^q} for the threshold split at delta.
double threshold_bound(const MarkFunction& phi, const LevyMeasure& m, double q, double delta);

/// ||phi||_{L^q_mu + L^2_mu}. Throws ConvergenceError (carrying the best bound)
/// when the certified gap does not close within the iteration budget.
SumNormResult sum_norm(const MarkFunction& phi, const LevyMeasure& m, double q, const SumNormOptions& options = {});

/// Same infimum for a weighted point cloud: weights w_i > 0, values phi_i (columns).
/// Used directly for product measures mu ⊗ Leb on a time grid.
SumNormResult sum_norm_weighted(const Vector& weights, const Matrix& values, double q,
                                const SumNormOptions& options = {});

DualWeight dual_norm(const MarkFunction& ell, const LevyMeasure& m);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool ok = false;
};

/// |∫ <psi - phi, ell> dmu| <= ||ell||_{L^inf ∩ L^2} ||psi - phi||_{L^1 + L^2}.
BoundCheck pairing_bound_check(const DualWeight& ell, const MarkFunction& psi, const MarkFunction& phi,
                               const LevyMeasure& m);

/// phi piecewise constant on [grid[j], grid[j+1]); slices[j] is its value there.
struct TimeSlicedFunction {
    std::vector<double> grid;
    std::vector<MarkFunction> slices;
};

/// ∫_0^T ||phi_s||_{L^1_mu + L^2_mu} ds <= (1 ∨ sqrt T) ||phi||_{L^1_nu + L^2_nu}, nu = mu ⊗ Leb.
BoundCheck time_integrated_bound_check(const TimeSlicedFunction& phi, const LevyMeasure& m, double T);

/// ||phi||_{L^q_nu + L^2_nu} for nu = mu ⊗ Leb on the slice grid.
SumNormResult product_sum_norm(const TimeSlicedFunction& phi, const LevyMeasure& m, double q);

/// True when every threshold split in `deltas` has a finite L^2 low part and a finite L^q high part.
bool threshold_pieces_finite(const MarkFunction& phi, const LevyMeasure& m, double q,
                             const std::vector<double>& deltas);

}  // namespace bsdelab
