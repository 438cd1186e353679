#include "bsdelab/jump_paths.hpp"
#include "bsdelab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace bsdelab {

TimeGrid TimeGrid::uniform(double T, int steps) {
    require(std::isfinite(T) && T > 0.0, "time grid: T must be > 0");
    require(steps >= 1, "time grid: need at least one step");
    TimeGrid g;
    g.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) g.times[i] = T * i / steps;
    g.times.back() = T;
    return g;
}

TimeGrid TimeGrid::from_times(std::vector<double> times) {
    require(times.size() >= 2 && times.front() == 0.0, "time grid must start at 0 and have a step");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1] && std::isfinite(times[i]), "time grid must be strictly increasing");
    require(times.back() > 0.0, "time grid must end at T > 0");
    return TimeGrid{std::move(times)};
}

int TimeGrid::interval_of(double s) const {
    const auto it = std::lower_bound(times.begin() + 1, times.end(), s);
    if (it == times.end()) return steps() - 1;
    return static_cast<int>(it - times.begin()) - 1;
}

Eigen::MatrixXi PathBundle::atom_counts(std::size_t atoms) const {
    const int n = grid.steps();
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(atoms), n + 1);
    for (const auto& ev : jumps) {
        if (!ev.atom) continue;
        counts(static_cast<Eigen::Index>(*ev.atom), grid.interval_of(ev.time) + 1) += 1;
    }
    for (int i = 1; i <= n; ++i) counts.col(i) += counts.col(i - 1);
    return counts;
}

Matrix PathBundle::brownian_path() const {
    Matrix w = Matrix::Zero(brownian_increments.rows(), brownian_increments.cols() + 1);
    for (Eigen::Index i = 0; i < brownian_increments.cols(); ++i) w.col(i + 1) = w.col(i) + brownian_increments.col(i);
    return w;
}

std::vector<JumpEvent> sample_poisson_measure(const LevyMeasure& m, double T, std::uint64_t seed,
                                              std::uint64_t path_index) {
    require(std::isfinite(T) && T > 0.0, "poisson measure: T must be > 0");
    const double mass = m.total_mass();
    require(std::isfinite(mass), "poisson measure: infinite total mass; truncate small jumps first");
    std::vector<JumpEvent> events;
    if (mass == 0.0) return events;

    PhiloxStream rng(seed, StreamTag::Jumps, path_index);
    std::vector<double> cumulative;
    if (m.is_atomic()) {
        double acc = 0.0;
        for (const auto& a : m.atomic_part().atoms) cumulative.push_back(acc += a.weight);
    }

    double t = 0.0;
    for (std::uint64_t seq = 0;; ++seq) {
        t += rng.exponential(mass);
        if (t > T) break;
        JumpEvent ev{t, Vector(), std::nullopt, seq};
        if (m.is_atomic()) {
            const double u = rng.uniform() * cumulative.back();
            std::size_t j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                     cumulative.begin());
            j = std::min(j, cumulative.size() - 1);
            ev.mark = m.atomic_part().atoms[j].mark;
            ev.atom = j;
        } else {
            const auto& pl = m.power_law_part();
            const double a = std::pow(pl.truncation, -pl.alpha);
            const double b = std::isfinite(pl.cutoff) ? std::pow(pl.cutoff, -pl.alpha) : 0.0;
            const double x = std::pow(a - rng.uniform() * (a - b), -1.0 / pl.alpha);
            ev.mark = Vector::Constant(1, rng.uniform() < 0.5 ? -x : x);
        }
        events.push_back(std::move(ev));
    }
    return events;
}

Matrix sample_brownian(const TimeGrid& grid, int k, std::uint64_t seed, std::uint64_t path_index) {
    require(k >= 0, "brownian: dimension must be >= 0");
    PhiloxStream rng(seed, StreamTag::Brownian, path_index);
    Matrix inc(k, grid.steps());
    for (int i = 0; i < grid.steps(); ++i) {
        const double sd = std::sqrt(grid.step(i));
        for (int r = 0; r < k; ++r) inc(r, i) = sd * rng.normal();
    }
    return inc;
}

PathBundle sample_path(const LevyMeasure& m, const TimeGrid& grid, int k, std::uint64_t seed,
                       std::uint64_t path_index) {
    PathBundle b;
    b.grid = grid;
    b.brownian_increments = sample_brownian(grid, k, seed, path_index);
    b.jumps = sample_poisson_measure(m, grid.horizon(), seed, path_index);
    b.seed = seed;
    b.path_index = path_index;
    return b;
}

double IntegralPath::running_sup() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < grid_values.cols(); ++i) s = std::max(s, grid_values.col(i).norm());
    for (Eigen::Index i = 0; i < after.cols(); ++i) s = std::max({s, before.col(i).norm(), after.col(i).norm()});
    return s;
}

IntegralPath stochastic_integral(const TimeSlicedFunction& psi, const std::vector<JumpEvent>& events,
                                 const LevyMeasure& m, const TimeGrid& grid, bool compensate) {
    require(!psi.slices.empty() && psi.grid.size() == psi.slices.size() + 1,
            "stochastic integral: slice grid must have one more point than slices");
    const TimeGrid slices = TimeGrid::from_times(psi.grid);
    const int d = psi.slices.front().codomain_dim();
    std::vector<Vector> rate;
    for (const auto& s : psi.slices) {
        require(s.codomain_dim() == d, "stochastic integral: slices disagree on dimension");
        s.check_compatible(m);
        rate.push_back(compensate ? integrate(s, m) : Vector::Zero(d));
    }
    // ∫_0^t rate_s ds with the slice convention psi_s = slices[j] on (grid[j], grid[j+1]].
    auto compensator = [&](double t) {
        Vector c = Vector::Zero(d);
        for (int j = 0; j < slices.steps(); ++j) {
            const double lo = slices.times[j], hi = std::min(t, slices.times[j + 1]);
            if (hi <= lo) break;
            c += (hi - lo) * rate[j];
        }
        return c;
    };

    IntegralPath out;
    out.grid = grid.times;
    out.compensator_applied = compensate;
    const auto n = static_cast<Eigen::Index>(grid.times.size());
    out.grid_values.resize(d, n);
    out.grid_qv.resize(grid.times.size());
    out.before.resize(d, static_cast<Eigen::Index>(events.size()));
    out.after.resize(d, static_cast<Eigen::Index>(events.size()));

    Vector jump_sum = Vector::Zero(d);
    double qv = 0.0;
    std::size_t e = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = grid.times[i];
        for (; e < events.size() && events[e].time <= t; ++e) {
            const auto& ev = events[e];
            const Vector jump = psi.slices[slices.interval_of(ev.time)].evaluate(ev.mark, ev.atom);
            const Vector comp = compensator(ev.time);
            out.before.col(static_cast<Eigen::Index>(e)) = jump_sum - comp;
            jump_sum += jump;
            qv += jump.squaredNorm();
            out.after.col(static_cast<Eigen::Index>(e)) = jump_sum - comp;
            out.event_times.push_back(ev.time);
            out.event_qv.push_back(qv);
        }
        out.grid_values.col(i) = jump_sum - compensator(t);
        out.grid_qv[i] = qv;
    }
    out.quadratic_variation = qv;
    return out;
}

IntegralPath stochastic_integral(const MarkFunction& psi, const std::vector<JumpEvent>& events,
                                 const LevyMeasure& m, const TimeGrid& grid, bool compensate) {
    return stochastic_integral(TimeSlicedFunction{{0.0, grid.horizon()}, {psi}}, events, m, grid, compensate);
}

double small_jump_variance(double alpha, double eta) {
    require(alpha > 0.0 && alpha < 2.0, "small jump variance: alpha must lie in (0,2)");
    require(eta >= 0.0, "small jump variance: eta must be >= 0");
    return 2.0 * std::pow(eta, 2.0 - alpha) / (2.0 - alpha);
}

IntegralPath sample_stable_truncated(const StableOptions& o, std::uint64_t seed, std::uint64_t path_index) {
    require(o.alpha > 1.0 && o.alpha < 2.0, "stable: alpha must lie in (1,2)");
    require(std::isfinite(o.eta) && o.eta > 0.0, "stable: truncation eta must be > 0");
    const LevyMeasure m = LevyMeasure::power_law(o.alpha, kInf, o.eta);
    const TimeGrid grid = TimeGrid::uniform(o.T, o.grid_steps);
    const auto events = sample_poisson_measure(m, o.T, seed, path_index);
    IntegralPath path = stochastic_integral(MarkFunction::power(Vector::Ones(1)), events, m, grid, true);
    if (!o.gaussian_remainder) return path;

    const double sd = std::sqrt(small_jump_variance(o.alpha, o.eta));
    PhiloxStream rng(seed, StreamTag::Gaussian, path_index);
    std::vector<double> b(grid.times.size(), 0.0);
    for (int i = 0; i < grid.steps(); ++i) b[i + 1] = b[i] + sd * std::sqrt(grid.step(i)) * rng.normal();
    for (std::size_t i = 0; i < b.size(); ++i) path.grid_values(0, static_cast<Eigen::Index>(i)) += b[i];
    for (std::size_t e = 0; e < path.event_times.size(); ++e) {
        const double s = path.event_times[e];
        const int i = grid.interval_of(s);
        const double w = (s - grid.times[i]) / grid.step(i);
        const double g = (1.0 - w) * b[i] + w * b[i + 1];
        path.before(0, static_cast<Eigen::Index>(e)) += g;
        path.after(0, static_cast<Eigen::Index>(e)) += g;
    }
    return path;
}

}  // namespace bsdelab
