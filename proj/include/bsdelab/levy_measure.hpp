#pragma once

// Jump-mark measures mu on U ⊂ R^m \ {0} and the functions psi: U -> R^d
// integrated against them.

#include "bsdelab/core.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bsdelab {

struct Atom {
    Vector mark;
    double weight;
};

/// Finite sum of weighted Dirac masses.
struct AtomicMeasure {
    std::vector<Atom> atoms;
};

/// Symmetric density |u|^{-1-alpha} du on {truncation <= |u| <= cutoff} ⊂ R \ {0}.
/// truncation = 0 is the untruncated (possibly infinite-activity) measure.
struct PowerLawMeasure {
    double alpha;
    double cutoff = kInf;
    double truncation = 0.0;
};

enum class Region { Below, Above, All };

class LevyMeasure {
public:
    /// Throws InvalidInput for zero marks, non-positive weights, duplicated
    /// atoms or mixed mark dimensions.
    static LevyMeasure atomic(std::vector<Atom> atoms);
    static LevyMeasure atomic(const std::vector<double>& marks, const std::vector<double>& weights);
    static LevyMeasure power_law(double alpha, double cutoff = kInf, double truncation = 0.0);

    bool is_atomic() const noexcept { return std::holds_alternative<AtomicMeasure>(variant_); }
    const AtomicMeasure& atomic_part() const { return std::get<AtomicMeasure>(variant_); }
    const PowerLawMeasure& power_law_part() const { return std::get<PowerLawMeasure>(variant_); }

    int dimension() const noexcept;
    std::size_t atom_count() const noexcept;

    /// mu(U); +inf for an untruncated power law.
    double total_mass() const;

    /// ∫_{lo < |u| <= hi} |u|^q mu(du), exact; +inf is a value, not an error.
    double band_moment(double q, double lo, double hi) const;

    /// Power law with small jumps |u| < eta removed (atomic measures are returned unchanged).
    LevyMeasure truncated_below(double eta) const;

private:
    explicit LevyMeasure(std::variant<AtomicMeasure, PowerLawMeasure> v) : variant_(std::move(v)) {}
    std::variant<AtomicMeasure, PowerLawMeasure> variant_;
};

struct MeasureValidation {
    bool ok = false;
    double integral = 0.0;  ///< ∫(1 ∧ |u|^2) mu(du), possibly +inf
    std::string reason;     ///< empty when ok
};

MeasureValidation validate_measure(const LevyMeasure& m);

/// ∫_{region(|u|, delta)} |u|^q mu(du). Marks with |u| == delta belong to Below.
double moment_integral(const LevyMeasure& m, double q, Region region, double delta);

/// ∫_a^b u^e du for 0 <= a <= b <= inf, +inf when divergent.
double power_integral(double e, double a, double b);

// ---------------------------------------------------------------------------

/// psi evaluated at each atom; column j is psi(u_j) ∈ R^d.
struct AtomValues {
    Matrix values;
};

/// psi(u) = coeff * u restricted to band_lo < |u| <= band_hi (scalar marks).
struct PowerForm {
    Vector coeff;
    double band_lo = 0.0;
    double band_hi = kInf;
};

class MarkFunction {
public:
    MarkFunction() : variant_(AtomValues{Matrix(1, 0)}) {}
    MarkFunction(AtomValues v) : variant_(std::move(v)) {}
    MarkFunction(PowerForm v) : variant_(std::move(v)) {}

    static MarkFunction atoms(Matrix values) { return AtomValues{std::move(values)}; }
    static MarkFunction scalar_atoms(const std::vector<double>& values);
    static MarkFunction power(Vector coeff, double band_lo = 0.0, double band_hi = kInf);
    static MarkFunction zero_like(const LevyMeasure& m, int codomain_dim);

    bool is_atomic() const noexcept { return std::holds_alternative<AtomValues>(variant_); }
    const AtomValues& atom_values() const { return std::get<AtomValues>(variant_); }
    const PowerForm& power_form() const { return std::get<PowerForm>(variant_); }
    const Matrix& values() const { return atom_values().values; }

    int codomain_dim() const noexcept;

    /// psi at a mark; atom index is used for atomic functions.
    Vector evaluate(const Vector& mark, std::optional<std::size_t> atom) const;

    /// Throws InvalidInput when the function cannot be integrated against m.
    void check_compatible(const LevyMeasure& m) const;

    friend MarkFunction operator+(const MarkFunction& a, const MarkFunction& b);
    friend MarkFunction operator-(const MarkFunction& a, const MarkFunction& b);
    friend MarkFunction operator*(double s, const MarkFunction& a);

private:
    std::variant<AtomValues, PowerForm> variant_;
};

/// ∫ psi dmu ∈ R^d; throws InvalidInput if ∫|psi| dmu = inf.
Vector integrate(const MarkFunction& psi, const LevyMeasure& m);

}  // namespace bsdelab
