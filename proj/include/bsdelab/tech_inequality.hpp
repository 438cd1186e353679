#pragma once

// The technical inequality Psi(a,b,p) >= Gamma(a,b,K,eps,p) for p in (1,2):
// closed forms, their reduction to (t, tau^2), a grid verifier and a per-point
// certificate that re-evaluates each inequality used to establish it.
//
// Scalar formulas are templates so they can be re-evaluated in long double
// (or any type with std-compatible pow/sqrt) as a precision cross-check.

#include "bsdelab/core.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace bsdelab {

/// vartheta(eps, p) = sqrt( ((p-1)/(2 eps))^{2/(2-p)} / 2 + 1/2 ) - 1.
template <typename Scalar>
Scalar vartheta(Scalar eps, Scalar p) {
    using std::pow;
    using std::sqrt;
    require(eps > Scalar(0), "vartheta: eps must be > 0");
    require(p > Scalar(1) && p < Scalar(2), "vartheta: p must lie in (1,2)");
    const Scalar x = pow((p - Scalar(1)) / (Scalar(2) * eps), Scalar(2) / (Scalar(2) - p));
    return sqrt(x / Scalar(2) + Scalar(0.5)) - Scalar(1);
}

/// ((p-1)/(2 eps))^{2/(2-p)}; the quantity every first-case bound is phrased in.
template <typename Scalar>
Scalar eps_power(Scalar eps, Scalar p) {
    using std::pow;
    return pow((p - Scalar(1)) / (Scalar(2) * eps), Scalar(2) / (Scalar(2) - p));
}

/// Explicit sufficient constant alpha(K,p) = (4(2K+2)+1)^{1/(p-1)}.
template <typename Scalar>
Scalar alpha_const(Scalar K, Scalar p) {
    using std::pow;
    require(K >= Scalar(0), "alpha_const: K must be >= 0");
    require(p > Scalar(1) && p < Scalar(2), "alpha_const: p must lie in (1,2)");
    return pow(Scalar(4) * (Scalar(2) * K + Scalar(2)) + Scalar(1), Scalar(1) / (p - Scalar(1)));
}

/// (p-1) / (2 (alpha(K,p)+1)^{2-p}), kept strictly below (p-1)/2.
double epsilon_max(double K, double p);

/// h(x) = x^p / 2^{p/2} - 2^{p/2} - 1 - p(2K+1) x.
template <typename Scalar>
Scalar h_fn(Scalar x, Scalar K, Scalar p) {
    using std::pow;
    const Scalar s = pow(Scalar(2), p / Scalar(2));
    return pow(x, p) / s - s - Scalar(1) - p * (Scalar(2) * K + Scalar(1)) * x;
}

/// Largest root of h (h < 0 before it, >= 0 after); h is convex with h(0+) < 0.
double h_root(double K, double p);

/// psi(t, tau^2, p) = ((1+t)^2 + tau^2)^{p/2} - 1 - p t, evaluated with log1p/expm1.
template <typename Scalar>
Scalar psi_reduced(Scalar t, Scalar tau2, Scalar p) {
    using std::expm1;
    using std::log1p;
    const Scalar w = t * (Scalar(2) + t) + tau2;  // (1+t)^2 + tau^2 - 1
    if (w <= Scalar(-1)) return Scalar(-1) - p * t;
    return expm1(p / Scalar(2) * log1p(w)) - p * t;
}

template <typename Scalar>
Scalar gamma_reduced(Scalar t, Scalar tau2, Scalar K, Scalar eps, Scalar p) {
    using std::sqrt;
    const Scalar r2 = t * t + tau2;
    const Scalar theta = vartheta(eps, p);
    if (sqrt(r2) >= theta) return Scalar(2) * K * p * sqrt(r2);
    return p * eps * r2;
}

/// Psi(a,b,p) = |a+b|^p - |a|^p - p |a|^{p-2} <a,b> 1_{a != 0}.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar psi_fn(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                 typename DerivedA::Scalar p) {
    using Scalar = typename DerivedA::Scalar;
    using std::pow;
    const Scalar na = a.norm();
    const Scalar nab = (a + b).norm();
    if (na == Scalar(0)) return pow(nab, p);
    return pow(nab, p) - pow(na, p) - p * pow(na, p - Scalar(2)) * a.dot(b);
}

/// Gamma(a,b,K,eps,p) = 2Kp|a|^{p-1}|b| 1_{|b| >= vartheta|a|} + p eps |a|^{p-2}|b|^2 1_{|b| < vartheta|a|}.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar gamma_fn(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                   typename DerivedA::Scalar K, typename DerivedA::Scalar eps,
                                   typename DerivedA::Scalar p) {
    using Scalar = typename DerivedA::Scalar;
    using std::pow;
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (na == Scalar(0)) return Scalar(0);
    const Scalar theta = vartheta(eps, p);
    if (nb >= theta * na) return Scalar(2) * K * p * pow(na, p - Scalar(1)) * nb;
    return p * eps * pow(na, p - Scalar(2)) * nb * nb;
}

struct ReducedPair {
    double t;
    double tau2;
};

/// b = t a + c with <a,c> = 0, tau^2 = |c|^2/|a|^2. Throws InvalidInput for a = 0.
template <typename DerivedA, typename DerivedB>
ReducedPair reduce(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    const double na2 = a.squaredNorm();
    require(na2 > 0.0, "reduce: a must be nonzero");
    const double t = a.dot(b) / na2;
    const double c2 = (b - t * a).squaredNorm();
    return {t, std::max(0.0, c2 / na2)};
}

// ---------------------------------------------------------------------------

struct TechIneqParams {
    double p;
    double K;
    double eps;
    double vartheta;     ///< vartheta(eps, p)
    double alpha_const;  ///< alpha(K, p)

    /// eps defaults to epsilon_max(K,p). Requires p ∈ (1,2), K >= 0, eps > 0; eps >= (p-1)/2 is accepted
    /// so the verifier can be run on inadmissible values (certificates flag it).
    static TechIneqParams make(double p, double K, std::optional<double> eps = std::nullopt);
};

struct GridSpec {
    double t_min = -50.0;
    double t_max = 50.0;
    double tau_max = 50.0;
    int t_points = 500;
    int tau_points = 250;
    int far_radii = 400;        ///< log-spaced radii beyond the box, up to far_factor * vartheta
    int far_angles = 181;
    double far_factor = 10.0;
    int threads = 0;            ///< 0 = hardware concurrency

    void validate() const;
};

struct SlackPoint {
    double t;
    double tau2;
    double psi;
    double gamma;
    double slack;  ///< psi - gamma
};

struct InequalityReport {
    TechIneqParams params;
    double min_slack = kInf;
    SlackPoint argmin{};
    std::vector<SlackPoint> violations;  ///< capped at max_recorded, count kept separately
    std::size_t violation_count = 0;
    std::size_t points = 0;
    static constexpr std::size_t max_recorded = 64;
};

/// Tolerance used for every "psi - gamma >= 0" decision.
inline double slack_tolerance(double psi) { return -1e-12 * (1.0 + std::abs(psi)); }

/// Sweeps psi_reduced - gamma_reduced over the box grid and the log-spaced far field.
/// The argmin is ordered by (slack, t, tau2), so it does not depend on the thread count.
InequalityReport check_inequality(const TechIneqParams& params, const GridSpec& grid = {});

struct NamedCheck {
    std::string name;
    bool passed;
};

enum class CertificateCase { Inner, Outer };

struct CertificateReport {
    double t = 0.0;
    double tau2 = 0.0;
    TechIneqParams params{};
    CertificateCase which = CertificateCase::Inner;

    // Inner case, (t^2+tau^2)^{1/2} < vartheta: sigma(s) = psi(s,tau^2) - p eps (s^2+tau^2).
    double sigma_at_minus1 = 0.0;
    double sigma_prime_at_minus1 = 0.0;
    double g_at_minus1 = 0.0;         ///< lower bound of sigma'' at -1
    double sigma_prime_at_zero = 0.0; ///< informational; <= 0 whenever tau^2 > 0
    double xi = 0.0;                  ///< root of g on (-inf,-1)
    double upsilon = 0.0;             ///< root of g on (-1,inf)
    double delta_star = 0.0;          ///< stationary point of sigma on (-1, upsilon)
    double interior_minimum = 0.0;    ///< m = sigma(delta*)
    double varpi_at_delta = 0.0;      ///< same minimum through the closed form varpi

    // Outer case.
    double h_at_threshold = 0.0;      ///< h((t^2+tau^2)^{1/2})

    double psi = 0.0;
    double gamma = 0.0;
    std::vector<NamedCheck> checks;

    bool all_passed() const;
};

/// Re-derives the inequality at (t, tau^2) through the chain of intermediate bounds.
/// Throws ConvergenceError if the stationary point of sigma cannot be bracketed.
CertificateReport proof_certificate(double t, double tau2, const TechIneqParams& params);

}  // namespace bsdelab
