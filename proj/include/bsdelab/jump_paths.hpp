#pragma once

// Brownian increments, Poisson random measures, compensated stochastic
// integrals N_t = ∫∫ psi dπ~ and truncated symmetric stable paths.

#include "bsdelab/levy_measure.hpp"
#include "bsdelab/sum_norms.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bsdelab {

struct TimeGrid {
    std::vector<double> times;  ///< 0 = t_0 < ... < t_n = T

    static TimeGrid uniform(double T, int steps);
    static TimeGrid from_times(std::vector<double> times);

    int steps() const noexcept { return static_cast<int>(times.size()) - 1; }
    double horizon() const { return times.back(); }
    double step(int i) const { return times[i + 1] - times[i]; }
    /// Index i with times[i] < s <= times[i+1]; s = 0 maps to 0.
    int interval_of(double s) const;
};

struct JumpEvent {
    double time;
    Vector mark;
    std::optional<std::size_t> atom;  ///< set for atomic measures
    std::uint64_t seq;                ///< tie-breaker, increasing along the path
};

struct PathBundle {
    TimeGrid grid;
    Matrix brownian_increments;  ///< k × n
    std::vector<JumpEvent> jumps;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;

    /// Jump counts per atom on (0, times[i]], for every grid index (J × (n+1)).
    Eigen::MatrixXi atom_counts(std::size_t atoms) const;
    /// W at every grid index (k × (n+1)).
    Matrix brownian_path() const;
};

/// Events of a Poisson random measure with intensity mu(du)dt on U × (0,T].
/// Throws InvalidInput when mu has infinite mass.
std::vector<JumpEvent> sample_poisson_measure(const LevyMeasure& m, double T, std::uint64_t seed,
                                              std::uint64_t path_index);

/// k × n matrix of independent N(0, step) increments.
Matrix sample_brownian(const TimeGrid& grid, int k, std::uint64_t seed, std::uint64_t path_index);

PathBundle sample_path(const LevyMeasure& m, const TimeGrid& grid, int k, std::uint64_t seed,
                       std::uint64_t path_index);

struct IntegralPath {
    std::vector<double> grid;
    Matrix grid_values;              ///< d × (n+1)
    std::vector<double> grid_qv;     ///< [N] at grid times
    std::vector<double> event_times;
    Matrix before;                   ///< N_{s-} at each event, d × events
    Matrix after;                    ///< N_s at each event
    std::vector<double> event_qv;    ///< [N]_s after each event
    double quadratic_variation = 0.0;
    bool compensator_applied = false;

    /// sup_t |N_t|; N is affine between events, so grid and event values suffice.
    double running_sup() const;
    Vector terminal() const { return grid_values.col(grid_values.cols() - 1); }
};

/// psi_s = slices[j] for s in (grid[j], grid[j+1]] (predictable convention); the integral is
/// reported on `grid`. The compensator t ↦ ∫_0^t ∫ psi_s dmu ds is subtracted iff `compensate`.
IntegralPath stochastic_integral(const TimeSlicedFunction& psi, const std::vector<JumpEvent>& events,
                                 const LevyMeasure& m, const TimeGrid& grid, bool compensate);

IntegralPath stochastic_integral(const MarkFunction& psi, const std::vector<JumpEvent>& events,
                                 const LevyMeasure& m, const TimeGrid& grid, bool compensate);

struct StableOptions {
    double alpha = 1.5;
    double eta = 0.1;            ///< jumps with |u| < eta are dropped
    double T = 1.0;
    int grid_steps = 64;
    bool gaussian_remainder = false;
};

/// Variance rate 2 eta^{2-alpha}/(2-alpha) of the dropped small jumps.
double small_jump_variance(double alpha, double eta);

/// Compound-Poisson approximation of X_t = ∫∫ u π~(du,ds) for the symmetric
/// alpha-stable measure. With gaussian_remainder the dropped jumps are replaced
/// by a Brownian motion of matching variance (sampled on the grid, linear in between);
/// quadratic_variation counts jumps only.
IntegralPath sample_stable_truncated(const StableOptions& options, std::uint64_t seed, std::uint64_t path_index);

}  // namespace bsdelab
