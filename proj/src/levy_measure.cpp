#include "bsdelab/levy_measure.hpp"

#include <algorithm>
#include <cmath>

namespace bsdelab {

LevyMeasure LevyMeasure::atomic(std::vector<Atom> atoms) {
    const int m = atoms.empty() ? 1 : static_cast<int>(atoms.front().mark.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const Atom& a = atoms[i];
        require(a.mark.size() == m && m > 0, "atom " + std::to_string(i) + ": mark dimension mismatch");
        require(a.mark.allFinite(), "atom " + std::to_string(i) + ": non-finite mark");
        require(a.mark.norm() > 0.0, "atom " + std::to_string(i) + ": zero mark (U excludes the origin)");
        require(std::isfinite(a.weight) && a.weight > 0.0,
                "atom " + std::to_string(i) + ": weight must be finite and > 0");
        for (std::size_t j = 0; j < i; ++j)
            require(atoms[j].mark != a.mark,
                    "atoms " + std::to_string(j) + " and " + std::to_string(i) + " share a mark");
    }
    return LevyMeasure(AtomicMeasure{std::move(atoms)});
}

LevyMeasure LevyMeasure::atomic(const std::vector<double>& marks, const std::vector<double>& weights) {
    require(marks.size() == weights.size(), "marks and weights differ in length");
    std::vector<Atom> atoms;
    atoms.reserve(marks.size());
    for (std::size_t i = 0; i < marks.size(); ++i) atoms.push_back({Vector::Constant(1, marks[i]), weights[i]});
    return atomic(std::move(atoms));
}

LevyMeasure LevyMeasure::power_law(double alpha, double cutoff, double truncation) {
    require(std::isfinite(alpha), "power law: alpha must be finite");
    require(!std::isnan(cutoff) && cutoff > 0.0, "power law: cutoff must be > 0");
    require(std::isfinite(truncation) && truncation >= 0.0, "power law: truncation must be >= 0");
    return LevyMeasure(PowerLawMeasure{alpha, cutoff, truncation});
}

int LevyMeasure::dimension() const noexcept {
    if (const auto* a = std::get_if<AtomicMeasure>(&variant_); a && !a->atoms.empty())
        return static_cast<int>(a->atoms.front().mark.size());
    return 1;
}

std::size_t LevyMeasure::atom_count() const noexcept {
    if (const auto* a = std::get_if<AtomicMeasure>(&variant_)) return a->atoms.size();
    return 0;
}

double LevyMeasure::total_mass() const { return band_moment(0.0, 0.0, kInf); }

double LevyMeasure::band_moment(double q, double lo, double hi) const {
    if (const auto* a = std::get_if<AtomicMeasure>(&variant_)) {
        double sum = 0.0;
        for (const Atom& atom : a->atoms) {
            const double r = atom.mark.norm();
            if (r > lo && r <= hi) sum += atom.weight * std::pow(r, q);
        }
        return sum;
    }
    const auto& pl = std::get<PowerLawMeasure>(variant_);
    // (lo, hi] and [truncation, cutoff] differ only on null sets for a density.
    const double a = std::max(lo, pl.truncation);
    const double b = std::min(hi, pl.cutoff);
    if (!(a < b)) return 0.0;
    return 2.0 * power_integral(q - 1.0 - pl.alpha, a, b);
}

LevyMeasure LevyMeasure::truncated_below(double eta) const {
    if (is_atomic()) return *this;
    require(std::isfinite(eta) && eta > 0.0, "truncation level must be finite and > 0");
    PowerLawMeasure pl = power_law_part();
    pl.truncation = std::max(pl.truncation, eta);
    return LevyMeasure(pl);
}

double power_integral(double e, double a, double b) {
    if (!(a < b)) return 0.0;
    if (e == -1.0) {
        if (a == 0.0 || std::isinf(b)) return kInf;
        return std::log(b / a);
    }
    const double k = e + 1.0;
    if (k > 0.0) {
        if (std::isinf(b)) return kInf;
        return (std::pow(b, k) - std::pow(a, k)) / k;
    }
    if (a == 0.0) return kInf;
    const double upper = std::isinf(b) ? 0.0 : std::pow(b, k);
    return (std::pow(a, k) - upper) / (-k);
}

MeasureValidation validate_measure(const LevyMeasure& m) {
    if (m.is_atomic()) {
        // Re-run the structural checks so hand-built measures get the same errors.
        (void)LevyMeasure::atomic(m.atomic_part().atoms);
    }
    MeasureValidation report;
    report.integral = m.band_moment(2.0, 0.0, 1.0) + m.band_moment(0.0, 1.0, kInf);
    report.ok = std::isfinite(report.integral);
    if (!report.ok) {
        const double small = m.band_moment(2.0, 0.0, 1.0);
        report.reason = std::isinf(small) ? "small-jump integral ∫_{|u|<=1} |u|^2 mu(du) diverges"
                                          : "large-jump mass mu(|u|>1) is infinite";
    }
    return report;
}

double moment_integral(const LevyMeasure& m, double q, Region region, double delta) {
    require(q >= 0.0, "moment exponent must be >= 0");
    require(delta > 0.0, "threshold delta must be > 0");
    switch (region) {
        case Region::Below: return m.band_moment(q, 0.0, delta);
        case Region::Above: return m.band_moment(q, delta, kInf);
        case Region::All: return m.band_moment(q, 0.0, kInf);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------

MarkFunction MarkFunction::scalar_atoms(const std::vector<double>& values) {
    Matrix v(1, static_cast<Eigen::Index>(values.size()));
    for (std::size_t j = 0; j < values.size(); ++j) v(0, static_cast<Eigen::Index>(j)) = values[j];
    return AtomValues{std::move(v)};
}

MarkFunction MarkFunction::power(Vector coeff, double band_lo, double band_hi) {
    require(band_lo >= 0.0 && band_lo <= band_hi, "power form: band must satisfy 0 <= lo <= hi");
    return PowerForm{std::move(coeff), band_lo, band_hi};
}

MarkFunction MarkFunction::zero_like(const LevyMeasure& m, int codomain_dim) {
    if (m.is_atomic()) return atoms(Matrix::Zero(codomain_dim, static_cast<Eigen::Index>(m.atom_count())));
    return power(Vector::Zero(codomain_dim));
}

int MarkFunction::codomain_dim() const noexcept {
    if (const auto* a = std::get_if<AtomValues>(&variant_)) return static_cast<int>(a->values.rows());
    return static_cast<int>(std::get<PowerForm>(variant_).coeff.size());
}

Vector MarkFunction::evaluate(const Vector& mark, std::optional<std::size_t> atom) const {
    if (const auto* a = std::get_if<AtomValues>(&variant_)) {
        require(atom.has_value() && *atom < static_cast<std::size_t>(a->values.cols()),
                "atomic mark function evaluated without a valid atom index");
        return a->values.col(static_cast<Eigen::Index>(*atom));
    }
    const auto& pf = std::get<PowerForm>(variant_);
    require(mark.size() == 1, "power form needs scalar marks");
    const double r = std::abs(mark(0));
    if (r > pf.band_lo && r <= pf.band_hi) return pf.coeff * mark(0);
    return Vector::Zero(pf.coeff.size());
}

void MarkFunction::check_compatible(const LevyMeasure& m) const {
    if (const auto* a = std::get_if<AtomValues>(&variant_)) {
        require(m.is_atomic(), "atom-valued function paired with a density measure");
        require(static_cast<std::size_t>(a->values.cols()) == m.atom_count(),
                "atom-valued function has " + std::to_string(a->values.cols()) + " columns, measure has " +
                    std::to_string(m.atom_count()) + " atoms");
        return;
    }
    require(m.dimension() == 1, "power form needs a measure on scalar marks");
}

MarkFunction operator+(const MarkFunction& a, const MarkFunction& b) {
    require(a.is_atomic() && b.is_atomic(), "only atom-valued functions can be added");
    require(a.values().rows() == b.values().rows() && a.values().cols() == b.values().cols(),
            "shape mismatch in mark function sum");
    return MarkFunction::atoms(a.values() + b.values());
}

MarkFunction operator-(const MarkFunction& a, const MarkFunction& b) { return a + (-1.0) * b; }

MarkFunction operator*(double s, const MarkFunction& a) {
    if (a.is_atomic()) return MarkFunction::atoms(s * a.values());
    PowerForm pf = a.power_form();
    pf.coeff *= s;
    return pf;
}

Vector integrate(const MarkFunction& psi, const LevyMeasure& m) {
    psi.check_compatible(m);
    if (psi.is_atomic()) {
        Vector sum = Vector::Zero(psi.codomain_dim());
        const auto& atoms = m.atomic_part().atoms;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            sum += atoms[j].weight * psi.values().col(static_cast<Eigen::Index>(j));
        return sum;
    }
    const PowerForm& pf = psi.power_form();
    if (pf.coeff.norm() == 0.0) return Vector::Zero(pf.coeff.size());
    const double abs_moment = m.band_moment(1.0, pf.band_lo, pf.band_hi);
    require(std::isfinite(abs_moment), "psi(u) = c u is not mu-integrable on its band");
    // Odd integrand against a symmetric measure.
    return Vector::Zero(pf.coeff.size());
}

}  // namespace bsdelab
