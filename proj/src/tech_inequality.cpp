#include "bsdelab/tech_inequality.hpp"
#include "bsdelab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace bsdelab {

double epsilon_max(double K, double p) {
    const double bound = (p - 1.0) / (2.0 * std::pow(alpha_const(K, p) + 1.0, 2.0 - p));
    return std::min(bound, std::nextafter((p - 1.0) / 2.0, 0.0));
}

double h_root(double K, double p) {
    double hi = 2.0;
    while (h_fn(hi, K, p) < 0.0) hi *= 2.0;
    double lo = hi / 2.0;
    if (h_fn(lo, K, p) >= 0.0) lo = 0.0;
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (h_fn(mid, K, p) < 0.0 ? lo : hi) = mid;
    }
    return hi;
}

TechIneqParams TechIneqParams::make(double p, double K, std::optional<double> eps) {
    require(std::isfinite(p) && p > 1.0 && p < 2.0, "p must lie in (1,2)");
    require(std::isfinite(K) && K >= 0.0, "K must be >= 0");
    const double e = eps.value_or(epsilon_max(K, p));
    require(std::isfinite(e) && e > 0.0, "eps must be > 0");
    return {p, K, e, bsdelab::vartheta(e, p), bsdelab::alpha_const(K, p)};
}

void GridSpec::validate() const {
    require(t_min < t_max, "grid: t range must be non-empty");
    require(tau_max > 0.0, "grid: tau range must be non-empty");
    require(t_points >= 2 && tau_points >= 2, "grid: need at least two points per axis");
    require(far_radii >= 0 && far_angles >= 2, "grid: far field needs >= 2 angles");
    require(far_factor >= 1.0, "grid: far_factor must be >= 1");
}

namespace {

struct PointSet {
    double t_min, dt, dtau;
    std::size_t nt, ntau;
    std::vector<double> radii;
    std::size_t nang;

    std::size_t box() const { return nt * ntau; }
    std::size_t size() const { return box() + radii.size() * nang + 2; }

    std::pair<double, double> at(std::size_t k) const {
        if (k < box()) {
            const double t = t_min + dt * static_cast<double>(k / ntau);
            const double tau = dtau * static_cast<double>(k % ntau);
            return {t, tau * tau};
        }
        k -= box();
        if (k < radii.size() * nang) {
            const double r = radii[k / nang];
            const double theta = M_PI * static_cast<double>(k % nang) / static_cast<double>(nang - 1);
            const double tau = r * std::sin(theta);
            return {r * std::cos(theta), tau * tau};
        }
        k -= radii.size() * nang;
        return k == 0 ? std::pair{0.0, 0.0} : std::pair{-1.0, 0.0};
    }
};

bool precedes(const SlackPoint& a, const SlackPoint& b) {
    return std::tie(a.slack, a.t, a.tau2) < std::tie(b.slack, b.t, b.tau2);
}

}  // namespace

InequalityReport check_inequality(const TechIneqParams& params, const GridSpec& grid) {
    grid.validate();
    InequalityReport report;
    report.params = params;

    PointSet pts;
    pts.t_min = grid.t_min;
    pts.nt = static_cast<std::size_t>(grid.t_points);
    pts.ntau = static_cast<std::size_t>(grid.tau_points);
    pts.dt = (grid.t_max - grid.t_min) / (grid.t_points - 1);
    pts.dtau = grid.tau_max / (grid.tau_points - 1);
    pts.nang = static_cast<std::size_t>(grid.far_angles);

    const double theta = params.vartheta;
    const double r0 = std::max({std::abs(grid.t_min), std::abs(grid.t_max), grid.tau_max});
    const double r1 = grid.far_factor * theta;
    if (r1 > r0 && grid.far_radii >= 2) {
        for (int k = 0; k < grid.far_radii; ++k)
            pts.radii.push_back(r0 * std::pow(r1 / r0, double(k) / double(grid.far_radii - 1)));
    }
    // Rings straddling the case boundary |b| = vartheta |a|.
    if (theta > 0.0)
        for (double f : {1.0 - 1e-12, 1.0, 1.0 + 1e-12}) pts.radii.push_back(theta * f);

    const std::size_t n = pts.size();
    const std::size_t chunks = 256;
    struct Partial {
        SlackPoint best{0, 0, 0, 0, kInf};
        std::vector<SlackPoint> violations;
        std::size_t violation_count = 0;
    };
    std::vector<Partial> partial(chunks);

    parallel_chunks(n, chunks, grid.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        Partial& out = partial[c];
        for (std::size_t k = b; k < e; ++k) {
            const auto [t, tau2] = pts.at(k);
            SlackPoint sp;
            sp.t = t;
            sp.tau2 = tau2;
            sp.psi = psi_reduced(t, tau2, params.p);
            sp.gamma = gamma_reduced(t, tau2, params.K, params.eps, params.p);
            sp.slack = sp.psi - sp.gamma;
            if (precedes(sp, out.best)) out.best = sp;
            if (sp.slack < slack_tolerance(sp.psi)) {
                ++out.violation_count;
                if (out.violations.size() < InequalityReport::max_recorded) out.violations.push_back(sp);
            }
        }
    });

    SlackPoint best{0, 0, 0, 0, kInf};
    for (const Partial& part : partial) {
        if (precedes(part.best, best)) best = part.best;
        report.violation_count += part.violation_count;
        for (const auto& v : part.violations)
            if (report.violations.size() < InequalityReport::max_recorded) report.violations.push_back(v);
    }
    report.argmin = best;
    report.min_slack = best.slack;
    report.points = n;
    return report;
}

bool CertificateReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const NamedCheck& c) { return c.passed; });
}

namespace {

// a >= b up to rounding relative to the magnitudes involved.
bool geq(double a, double b, double scale = 0.0) {
    return a - b >= -1e-12 * (1.0 + std::abs(a) + std::abs(b) + scale);
}

}  // namespace

CertificateReport proof_certificate(double t, double tau2, const TechIneqParams& params) {
    require(std::isfinite(t) && std::isfinite(tau2) && tau2 >= 0.0, "certificate: need finite t and tau^2 >= 0");
    const double p = params.p, eps = params.eps, K = params.K;
    const double theta = params.vartheta;

    CertificateReport rep;
    rep.t = t;
    rep.tau2 = tau2;
    rep.params = params;
    rep.psi = psi_reduced(t, tau2, p);
    rep.gamma = gamma_reduced(t, tau2, K, eps, p);
    const double r = std::sqrt(t * t + tau2);
    auto add = [&](std::string name, bool ok) { rep.checks.push_back({std::move(name), ok}); };

    if (r < theta) {
        rep.which = CertificateCase::Inner;
        const double X = eps_power(eps, p);

        auto sigma = [&](double s) { return psi_reduced(s, tau2, p) - p * eps * (s * s + tau2); };
        auto sigma_prime = [&](double s) {
            const double q = (1.0 + s) * (1.0 + s) + tau2;
            return p * std::pow(q, p / 2.0 - 1.0) * (1.0 + s) - p - 2.0 * p * eps * s;
        };

        // Structural bounds compare quantities of size X against margins of size sqrt(X);
        // extended precision keeps them resolvable when X reaches ~1e34.
        using LD = long double;
        const LD Xl = eps_power<LD>(eps, p);
        const LD thl = bsdelab::vartheta<LD>(eps, p);
        const LD sl = std::sqrt(Xl / 2 + LD(0.5));
        const LD t2l = tau2;
        add("inner case: (t^2+tau^2)^{1/2} < vartheta", true);
        add("tau^2 < vartheta^2", t2l < thl * thl);
        add("vartheta^2 < ((p-1)/(2eps))^{2/(2-p)}/2 - 1/2", thl * thl < (Xl - 1) / 2);
        add("tau^2 < ((p-1)/(2eps))^{2/(2-p)} - 1", t2l < Xl - 1);
        add("X - 1 <= (1/(p eps))^{2/(2-p)}", Xl - 1 <= std::pow(1 / (LD(p) * eps), 2 / (2 - LD(p))));
        add("X - 1 <= (1/(2 eps))^{2/(2-p)} - 1", Xl - 1 <= std::pow(1 / (2 * LD(eps)), 2 / (2 - LD(p))) - 1);
        add("eps < (p-1)/2 <= (p-1)/p ∧ 1/2",
            eps < (p - 1.0) / 2.0 && (p - 1.0) / 2.0 <= std::min((p - 1.0) / p, 0.5));

        rep.sigma_at_minus1 = std::pow(tau2, p / 2.0) - 1.0 + p - p * eps * (1.0 + tau2);
        rep.sigma_prime_at_minus1 = -p + 2.0 * p * eps;
        rep.g_at_minus1 = p * (p - 1.0) * std::pow(tau2, p / 2.0 - 1.0) - 2.0 * p * eps;
        rep.sigma_prime_at_zero = p * (std::pow(1.0 + tau2, p / 2.0 - 1.0) - 1.0);
        add("sigma(-1) > 0", rep.sigma_at_minus1 > 0.0);
        add("sigma'(-1) < 0", rep.sigma_prime_at_minus1 < 0.0);
        add("g(-1) > 0", rep.g_at_minus1 > 0.0);

        const double root = std::sqrt(X - tau2);
        rep.xi = -1.0 - root;
        rep.upsilon = root - 1.0;
        const LD xil = -1 - std::sqrt(Xl - t2l);
        add("t > -vartheta > -sqrt(X/2+1/2) - 1 > Xi", t > -theta && -thl > -sl - 1 && -sl - 1 > xil);
        add("Upsilon > 0", rep.upsilon > 0.0);
        add("t < vartheta < Upsilon", t < theta && thl < std::sqrt(Xl - t2l) - 1);

        // sigma' is increasing on (-1, Upsilon); bracket its zero there.
        double lo = -1.0, hi = rep.upsilon;
        if (!(sigma_prime(std::nextafter(-1.0, 0.0)) < 0.0))
            throw ConvergenceError("certificate: sigma' is not negative to the right of -1", rep.sigma_prime_at_minus1);
        if (sigma_prime(hi) < 0.0) {
            rep.delta_star = hi;
        } else {
            for (int it = 0; it < 400 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
                const double mid = 0.5 * (lo + hi);
                (sigma_prime(mid) < 0.0 ? lo : hi) = mid;
            }
            rep.delta_star = 0.5 * (lo + hi);
        }
        const double d = rep.delta_star;
        rep.interior_minimum = sigma(d);
        rep.varpi_at_delta = (2.0 - p) * eps * d * d + (2.0 * eps + 1.0 - p) * d + (2.0 - p) * eps * tau2 +
                             tau2 * (1.0 - 2.0 * eps) / (1.0 + d);
        const double scale = std::abs(psi_reduced(d, tau2, p)) + p * eps * (d * d + tau2);
        add("m = sigma(delta*) >= 0", rep.interior_minimum >= -1e-12 * (1.0 + scale));
        add("varpi(0) = tau^2 (1 - p eps) >= 0", tau2 * (1.0 - p * eps) >= 0.0);
        add("psi(t,tau^2) >= p eps (t^2+tau^2)", rep.psi - rep.gamma >= slack_tolerance(rep.psi));
        return rep;
    }

    rep.which = CertificateCase::Outer;
    const double q = (1.0 + t) * (1.0 + t) + tau2;
    const double qp = std::pow(q, p / 2.0);
    const double two_p2 = std::pow(2.0, p / 2.0);
    rep.h_at_threshold = h_fn(r, K, p);
    const double lhs = rep.psi - 2.0 * K * p * r;

    add("outer case: (t^2+tau^2)^{1/2} >= vartheta", true);
    add("t^2 + tau^2 >= 4", r * r >= 4.0);
    add("(1+t)^2 >= t^2/2 - 2", 0.5 * (t + 2.0) * (t + 2.0) + 1.0 > 0.0 && geq((1.0 + t) * (1.0 + t), t * t / 2.0 - 2.0));
    add("psi - 2Kp r >= ((1+t)^2+tau^2)^{p/2} - 1 - p(2K+1) r",
        geq(lhs, qp - 1.0 - p * (2.0 * K + 1.0) * r, qp));
    add("((1+t)^2+tau^2)^{p/2} >= ((t^2+tau^2)/2)^{p/2} - 2^{p/2}",
        geq(qp, std::pow(r * r / 2.0, p / 2.0) - two_p2));
    add("psi - 2Kp r >= h((t^2+tau^2)^{1/2})", geq(lhs, rep.h_at_threshold, qp));
    add("h((t^2+tau^2)^{1/2}) >= 0", rep.h_at_threshold >= 0.0);
    add("psi(t,tau^2) >= 2Kp (t^2+tau^2)^{1/2}", rep.psi - rep.gamma >= slack_tolerance(rep.psi));
    return rep;
}

}  // namespace bsdelab
