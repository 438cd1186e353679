#include "bsdelab/cli.hpp"

#include "bsdelab/estimates_lab.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/tech_inequality.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#ifndef BSDELAB_VERSION
#define BSDELAB_VERSION "0.0.0"
#endif

namespace bsdelab::cli {

namespace {

enum class Kind { Number, Integer, String, NumberList, StringList, Object, Bool };

struct ParamSpec {
    std::string name;
    Kind kind;
    Json fallback;  ///< null: computed default or optional
    std::string help;
};

Json delta_one() { return {{"type", "atomic"}, {"atoms", Json::array({{{"u", 1.0}, {"w", 1.0}}})}}; }
Json unit_psi() { return {{"type", "atoms"}, {"values", Json::array({1.0})}}; }

const std::map<std::string, std::vector<ParamSpec>>& schemas() {
    static const std::map<std::string, std::vector<ParamSpec>> table = {
        {"verify-lemma",
         {{"p", Kind::Number, 1.5, "exponent in (1,2)"},
          {"K", Kind::Number, 0.0, "Lipschitz constant K >= 0"},
          {"eps", Kind::Number, nullptr, "epsilon (default: largest admissible value)"},
          {"grid", Kind::String, "500x250", "box resolution T_POINTSxTAU_POINTS"},
          {"t_min", Kind::Number, -50.0, "box lower t"},
          {"t_max", Kind::Number, 50.0, "box upper t"},
          {"tau_max", Kind::Number, 50.0, "box upper tau"},
          {"far_radii", Kind::Integer, 400, "log-spaced far-field radii"},
          {"far_angles", Kind::Integer, 181, "far-field angles in [0, pi]"},
          {"far_factor", Kind::Number, 10.0, "far field reaches far_factor * vartheta"},
          {"certificates", Kind::Integer, 0, "random points re-derived through the proof chain"},
          {"seed", Kind::Integer, nullptr, "seed for certificate sampling"}}},
        {"sum-norm",
         {{"measure", Kind::Object, delta_one(), "measure JSON (inline or file)"},
          {"function", Kind::Object, Json{{"type", "atoms"}, {"values", Json::array({0.0})}},
           "function JSON (inline or file)"},
          {"q", Kind::Number, 1.0, "exponent of the large part, 1 or in (1,2)"}}},
        {"simulate",
         {{"measure", Kind::Object, delta_one(), "measure JSON (inline or file)"},
          {"psi", Kind::Object, nullptr, "integrand JSON (default: identity on scalar marks)"},
          {"truncation", Kind::Number, nullptr, "drop jumps below this size (power laws)"},
          {"T", Kind::Number, 1.0, "horizon"},
          {"grid_steps", Kind::Integer, 64, "uniform grid steps"},
          {"brownian_dim", Kind::Integer, 0, "Brownian dimension k"},
          {"paths", Kind::Integer, 100000, "number of paths"},
          {"format", Kind::String, "summary", "summary or jsonl"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"solve",
         {{"problem", Kind::String, "counterexample", "registry problem id"},
          {"method", Kind::String, nullptr, "markov-exact or regression (default: problem's choice)"},
          {"explicit", Kind::Bool, false, "explicit step in y"},
          {"T", Kind::Number, 1.0, "horizon"},
          {"grid_steps", Kind::Integer, 64, "uniform grid steps"},
          {"paths", Kind::Integer, 10000, "number of scenarios"},
          {"p", Kind::Number, 1.5, "exponent of the E^p diagnostics"},
          {"truncation", Kind::Number, nullptr, "solve the q_n-truncated problem at this level"},
          {"c", Kind::Number, 1.0, "terminal constant (zero, linear-decay)"},
          {"lambda", Kind::Number, 1.0, "decay rate (linear-decay)"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"counterexample",
         {{"p", Kind::NumberList, Json::array({1.1, 1.3, 1.5, 1.7, 1.9}), "exponents in (1,2)"},
          {"T", Kind::Number, 1.0, "horizon"},
          {"paths", Kind::Integer, 100000, "number of paths"},
          {"batches", Kind::Integer, kMinBatches, "batches for standard errors"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"apriori",
         {{"problems", Kind::StringList, nullptr, "registry problems (default: all)"},
          {"T", Kind::NumberList, Json::array({0.5, 1.0, 2.0}), "horizons"},
          {"p", Kind::Number, 1.5, "exponent"},
          {"grid_steps", Kind::Integer, 64, "uniform grid steps"},
          {"paths", Kind::Integer, 10000, "number of scenarios"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"bdg",
         {{"measure", Kind::Object, delta_one(), "measure JSON (inline or file)"},
          {"psi", Kind::Object, unit_psi(), "integrand JSON (inline or file)"},
          {"p", Kind::Number, 1.5, "exponent"},
          {"T", Kind::NumberList, Json::array({1.0, 2.0, 4.0}), "horizons"},
          {"paths", Kind::Integer, 100000, "number of paths"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"bj",
         {{"measure", Kind::Object, Json{{"type", "powerlaw"}, {"alpha", 1.8}}, "measure JSON (inline or file)"},
          {"psi", Kind::Object, Json{{"type", "power"}, {"coeff", Json::array({1.0})}}, "integrand JSON"},
          {"p", Kind::Number, 1.5, "exponent in (1,2)"},
          {"T", Kind::Number, 1.0, "horizon"},
          {"etas", Kind::NumberList, Json::array({0.2, 0.1, 0.05}), "small-jump truncation levels"},
          {"paths", Kind::Integer, 10000, "number of paths"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
        {"ep-norms",
         {{"problem", Kind::String, "counterexample", "registry problem id"},
          {"method", Kind::String, nullptr, "markov-exact or regression"},
          {"p", Kind::Number, 1.5, "exponent"},
          {"T", Kind::Number, 1.0, "horizon"},
          {"grid_steps", Kind::Integer, 64, "uniform grid steps"},
          {"paths", Kind::Integer, 10000, "number of scenarios"},
          {"levels", Kind::NumberList, Json::array(), "truncation levels for a stability study"},
          {"c", Kind::Number, 1.0, "terminal constant (zero, linear-decay)"},
          {"lambda", Kind::Number, 1.0, "decay rate (linear-decay)"},
          {"seed", Kind::Integer, nullptr, "master seed"}}},
    };
    return table;
}

const std::vector<ParamSpec>& schema_of(const std::string& sub) {
    const auto it = schemas().find(sub);
    require(it != schemas().end(), "unknown subcommand '" + sub + "'");
    return it->second;
}

std::string flag_name(const std::string& key) {
    std::string s = key;
    std::replace(s.begin(), s.end(), '_', '-');
    return "--" + s;
}

// ---------------------------------------------------------------------------
// Text -> JSON conversion for flag values.

double parse_number(const std::string& text, const std::string& what) {
    if (text == "inf" || text == "+inf") return kInf;
    if (text == "-inf") return -kInf;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    require(!text.empty() && end == text.c_str() + text.size() && std::isfinite(v),
            what + ": '" + text + "' is not a number");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

Json json_argument(const std::string& text, const std::string& what) {
    const auto first = text.find_first_not_of(" \t\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw InvalidInput(what + ": " + e.what());
        }
    }
    return read_json_file(text);
}

Json flag_to_json(const ParamSpec& spec, const std::string& text) {
    const std::string what = flag_name(spec.name);
    switch (spec.kind) {
        case Kind::Number: return parse_number(text, what);
        case Kind::Integer: {
            const double v = parse_number(text, what);
            require(v == std::floor(v) && std::abs(v) < 9.0e15, what + ": '" + text + "' is not an integer");
            return v < 0 ? Json(static_cast<std::int64_t>(v)) : Json(static_cast<std::uint64_t>(v));
        }
        case Kind::String: return text;
        case Kind::NumberList: {
            Json a = Json::array();
            for (const auto& s : split_list(text)) a.push_back(parse_number(s, what));
            return a;
        }
        case Kind::StringList: {
            Json a = Json::array();
            for (const auto& s : split_list(text)) a.push_back(s);
            return a;
        }
        case Kind::Object: return json_argument(text, what);
        case Kind::Bool: return text == "true" || text == "1";
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Schema checks on resolved parameters.

void check_type(const ParamSpec& spec, const Json& v) {
    const std::string where = "parameter '" + spec.name + "'";
    if (v.is_null()) return;
    switch (spec.kind) {
        case Kind::Number:
            require(v.is_number() || (v.is_string() && (v == "inf" || v == "-inf")), where + ": expected a number");
            break;
        case Kind::Integer:
            require(v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())),
                    where + ": expected an integer");
            break;
        case Kind::String: require(v.is_string(), where + ": expected a string"); break;
        case Kind::NumberList:
            require(v.is_array(), where + ": expected an array of numbers");
            for (const auto& x : v) require(x.is_number(), where + ": expected an array of numbers");
            break;
        case Kind::StringList:
            require(v.is_array(), where + ": expected an array of strings");
            for (const auto& x : v) require(x.is_string(), where + ": expected an array of strings");
            break;
        case Kind::Object: require(v.is_object(), where + ": expected a JSON object"); break;
        case Kind::Bool: require(v.is_boolean(), where + ": expected true or false"); break;
    }
}

double num(const Json& params, const std::string& key) { return number_from_json(params.at(key), key); }

std::int64_t integer(const Json& params, const std::string& key) {
    return static_cast<std::int64_t>(params.at(key).get<double>());
}

std::size_t count_param(const Json& params, const std::string& key) {
    const auto v = integer(params, key);
    require(v >= 1, "parameter '" + key + "' must be >= 1");
    return static_cast<std::size_t>(v);
}

std::vector<double> num_list(const Json& params, const std::string& key) {
    std::vector<double> out;
    for (const auto& x : params.at(key)) out.push_back(x.get<double>());
    return out;
}

std::uint64_t seed_of(const Json& params) {
    require(params.contains("seed") && !params.at("seed").is_null(),
            "a seed is required (--seed, config \"seed\" or BSDELAB_SEED)");
    const auto& s = params.at("seed");
    require(s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0),
            "parameter 'seed': expected a non-negative integer");
    return s.get<std::uint64_t>();
}

// ---------------------------------------------------------------------------
// Results.

struct Outcome {
    Json result = Json::object();
    std::vector<std::string> failures;
    std::vector<std::string> csv_header;
    std::vector<std::vector<Json>> csv_rows;
    std::vector<Json> stream_lines;  ///< jsonl payload after the header line
    bool stream = false;

    void check(bool ok, const std::string& message) {
        if (!ok) failures.push_back(message);
    }
};

Json est(const Estimate& e) { return {{"mean", number_to_json(e.mean)}, {"se", number_to_json(e.se)}}; }

Json ep_json(const EpDiagnostics& d) {
    return {{"p", d.p},
            {"e_sup_y", est(d.sup_y)},
            {"e_z", est(d.z)},
            {"e_psi", est(d.psi)},
            {"e_m", est(d.m)},
            {"total", est(d.total)}};
}

struct Context {
    const Json& params;
    int threads;
};

// ---------------------------------------------------------------------------

Outcome run_verify_lemma(const Context& ctx) {
    const Json& P = ctx.params;
    const double p = num(P, "p"), K = num(P, "K");
    std::optional<double> eps;
    if (!P.at("eps").is_null()) eps = num(P, "eps");
    const auto params = TechIneqParams::make(p, K, eps);

    GridSpec grid;
    const auto spec = P.at("grid").get<std::string>();
    const auto x = spec.find('x');
    require(x != std::string::npos, "parameter 'grid': expected T_POINTSxTAU_POINTS, got '" + spec + "'");
    grid.t_points = static_cast<int>(parse_number(spec.substr(0, x), "grid"));
    grid.tau_points = static_cast<int>(parse_number(spec.substr(x + 1), "grid"));
    grid.t_min = num(P, "t_min");
    grid.t_max = num(P, "t_max");
    grid.tau_max = num(P, "tau_max");
    grid.far_radii = static_cast<int>(integer(P, "far_radii"));
    grid.far_angles = static_cast<int>(integer(P, "far_angles"));
    grid.far_factor = num(P, "far_factor");
    grid.threads = ctx.threads;
    grid.validate();

    const auto rep = check_inequality(params, grid);
    auto point = [](const SlackPoint& s) {
        return Json{{"t", s.t}, {"tau2", s.tau2}, {"psi", number_to_json(s.psi)},
                    {"gamma", number_to_json(s.gamma)}, {"slack", number_to_json(s.slack)}};
    };
    Outcome out;
    Json violations = Json::array();
    for (const auto& v : rep.violations) violations.push_back(point(v));
    out.result = {{"p", p},
                  {"K", K},
                  {"eps", params.eps},
                  {"epsilon_max", epsilon_max(K, p)},
                  {"vartheta", params.vartheta},
                  {"alpha_const", params.alpha_const},
                  {"h_root", h_root(K, p)},
                  {"vartheta_covers_h_root", params.vartheta >= h_root(K, p)},
                  {"points", rep.points},
                  {"min_slack", number_to_json(rep.min_slack)},
                  {"argmin", point(rep.argmin)},
                  {"violation_count", rep.violation_count},
                  {"violations", violations}};
    out.check(rep.violation_count == 0, std::to_string(rep.violation_count) + " grid points with psi < gamma");

    const auto n_cert = integer(P, "certificates");
    require(n_cert >= 0, "parameter 'certificates' must be >= 0");
    if (n_cert > 0) {
        const std::uint64_t seed = seed_of(P);
        const double theta = params.vartheta;
        std::vector<CertificateReport> reports(static_cast<std::size_t>(n_cert));
        parallel_for(reports.size(), ctx.threads, [&](std::size_t i) {
            PhiloxStream rng(seed, StreamTag::Battery, i);
            // Half the draws inside the vartheta ball, half in an annulus out to 3 vartheta.
            const double r = (i % 2 == 0) ? theta * rng.uniform() : theta * (1.0 + 2.0 * rng.uniform());
            const double angle = std::numbers::pi * rng.uniform();
            const double t = r * std::cos(angle), tau = r * std::sin(angle);
            reports[i] = proof_certificate(t, tau * tau, params);
        });
        std::size_t failed = 0;
        Json first = nullptr;
        for (const auto& c : reports) {
            if (c.all_passed()) continue;
            if (failed++ == 0) {
                Json names = Json::array();
                for (const auto& chk : c.checks)
                    if (!chk.passed) names.push_back(chk.name);
                first = {{"t", c.t}, {"tau2", c.tau2}, {"failed_checks", names},
                         {"case", c.which == CertificateCase::Inner ? "inner" : "outer"}};
            }
        }
        out.result["certificates"] = {{"samples", n_cert}, {"failed", failed}, {"first_failure", first}};
        out.check(failed == 0, std::to_string(failed) + " proof certificates failed");
    }
    return out;
}

Outcome run_sum_norm(const Context& ctx) {
    const Json& P = ctx.params;
    const auto m = measure_from_json(P.at("measure"));
    const auto phi = mark_function_from_json(P.at("function"));
    phi.check_compatible(m);
    const double q = num(P, "q");
    Outcome out;
    try {
        const auto r = sum_norm(phi, m, q);
        out.result = {{"value", number_to_json(r.value)},
                      {"method", to_string(r.method)},
                      {"gap", number_to_json(r.gap)},
                      {"lower_bound", number_to_json(r.lower_bound)},
                      {"threshold_bound", number_to_json(r.threshold_bound)},
                      {"threshold_delta", number_to_json(r.threshold_delta)},
                      {"iterations", r.iterations},
                      {"decomposition",
                       {{"low", mark_function_to_json(r.phi_low)}, {"high", mark_function_to_json(r.phi_high)}}}};
    } catch (const ConvergenceError& e) {
        out.result = {{"value", nullptr}, {"best_bound", number_to_json(e.best_value())}, {"error", e.what()}};
        out.check(false, e.what());
    }
    return out;
}

Json path_to_json(const PathBundle& b) {
    Json grid = Json::array();
    for (double t : b.grid.times) grid.push_back(t);
    Json inc = Json::array();
    for (Eigen::Index r = 0; r < b.brownian_increments.rows(); ++r) inc.push_back(vector_to_json(b.brownian_increments.row(r).transpose()));
    Json jumps = Json::array();
    for (const auto& j : b.jumps) {
        Json e = {{"t", j.time}, {"u", j.mark.size() == 1 ? Json(j.mark(0)) : vector_to_json(j.mark)}};
        if (j.atom) e["atom"] = *j.atom;
        jumps.push_back(e);
    }
    return {{"path_index", b.path_index}, {"seed", b.seed}, {"grid", grid},
            {"brownian_increments", inc}, {"jumps", jumps}};
}

MarkFunction identity_psi(const LevyMeasure& m) {
    if (!m.is_atomic()) return MarkFunction::power(Vector::Ones(1));
    std::vector<double> v;
    for (const auto& a : m.atomic_part().atoms) {
        require(a.mark.size() == 1, "simulate: give --psi explicitly for vector marks");
        v.push_back(a.mark(0));
    }
    return MarkFunction::scalar_atoms(v);
}

Outcome run_simulate(const Context& ctx) {
    const Json& P = ctx.params;
    const std::uint64_t seed = seed_of(P);
    LevyMeasure m = measure_from_json(P.at("measure"));
    if (!P.at("truncation").is_null()) m = m.truncated_below(num(P, "truncation"));
    require(std::isfinite(m.total_mass()), "simulate: the measure has infinite mass; pass --truncation");
    const double T = num(P, "T");
    require(std::isfinite(T) && T > 0.0, "parameter 'T' must be > 0");
    const auto steps = integer(P, "grid_steps");
    require(steps >= 1, "parameter 'grid_steps' must be >= 1");
    const auto k = integer(P, "brownian_dim");
    require(k >= 0, "parameter 'brownian_dim' must be >= 0");
    const std::size_t paths = count_param(P, "paths");
    const auto format = P.at("format").get<std::string>();
    require(format == "summary" || format == "jsonl", "parameter 'format': expected summary or jsonl");
    const TimeGrid grid = TimeGrid::uniform(T, static_cast<int>(steps));

    Outcome out;
    if (format == "jsonl") {
        out.stream = true;
        out.stream_lines.resize(paths);
        parallel_for(paths, ctx.threads, [&](std::size_t i) {
            out.stream_lines[i] = path_to_json(sample_path(m, grid, static_cast<int>(k), seed, i));
        });
        return out;
    }

    const MarkFunction psi = P.at("psi").is_null() ? identity_psi(m) : mark_function_from_json(P.at("psi"));
    psi.check_compatible(m);
    require(psi.codomain_dim() == 1, "simulate: the summary needs a scalar psi");
    std::vector<double> counts(paths), terminal(paths), second(paths), qv(paths);
    parallel_for(paths, ctx.threads, [&](std::size_t i) {
        const auto events = sample_poisson_measure(m, T, seed, i);
        const auto path = stochastic_integral(psi, events, m, grid, true);
        counts[i] = static_cast<double>(events.size());
        terminal[i] = path.terminal()(0);
        second[i] = terminal[i] * terminal[i];
        qv[i] = path.quadratic_variation;
    });
    const double l2 = lp_norm(psi, m, 2.0);
    const double expected_count = m.total_mass() * T, isometry = T * l2 * l2;
    const auto c = batch_estimate(counts), n = batch_estimate(terminal), s = batch_estimate(second),
               v = batch_estimate(qv);
    auto near = [](const Estimate& e, double ref) { return std::abs(e.mean - ref) <= 3.0 * e.se || e.mean == ref; };
    out.result = {{"paths", paths},
                  {"total_mass", m.total_mass()},
                  {"jump_count", est(c)},
                  {"expected_jump_count", expected_count},
                  {"terminal_mean", est(n)},
                  {"terminal_second_moment", est(s)},
                  {"isometry", isometry},
                  {"quadratic_variation", est(v)}};
    out.check(near(c, expected_count), "mean jump count is more than 3 se from mu(U) T");
    out.check(near(n, 0.0), "compensated integral mean is more than 3 se from 0");
    out.check(near(s, isometry), "second moment is more than 3 se from T ||psi||_2^2");
    out.csv_header = {"quantity", "mean", "se", "reference"};
    out.csv_rows = {{"jump_count", c.mean, c.se, expected_count},
                    {"terminal_mean", n.mean, n.se, 0.0},
                    {"terminal_second_moment", s.mean, s.se, isometry},
                    {"quadratic_variation", v.mean, v.se, isometry}};
    return out;
}

struct SolvedProblem {
    Problem problem;
    TimeGrid grid;
    std::vector<PathBundle> scenarios;
    BsdeSolution solution;
};

Problem problem_from(const Json& P) {
    ProblemParams pp;
    if (P.contains("c")) pp.c = num(P, "c");
    if (P.contains("lambda")) pp.lambda = num(P, "lambda");
    return make_problem(P.at("problem").get<std::string>(), pp);
}

SolverOptions solver_options(const Json& P, const Problem& problem, int threads) {
    SolverOptions opts;
    opts.method = P.contains("method") && !P.at("method").is_null()
                      ? solve_method_from_string(P.at("method").get<std::string>())
                      : problem.preferred;
    if (P.contains("explicit")) opts.explicit_step = P.at("explicit").get<bool>();
    opts.threads = threads;
    return opts;
}

SolvedProblem solve_problem(Problem problem, const Json& P, double T, int threads) {
    const auto steps = integer(P, "grid_steps");
    require(steps >= 1, "parameter 'grid_steps' must be >= 1");
    require(std::isfinite(T) && T > 0.0, "parameter 'T' must be > 0");
    const std::size_t paths = count_param(P, "paths");
    const std::uint64_t seed = seed_of(P);
    SolvedProblem s{std::move(problem), TimeGrid::uniform(T, static_cast<int>(steps)), {}, {}};
    if (P.contains("truncation") && !P.at("truncation").is_null()) {
        auto tp = build_truncated_problem(s.problem.xi, s.problem.f, num(P, "truncation"), s.problem.k,
                                          s.problem.measure.atom_count());
        s.problem.xi = tp.xi;
        s.problem.f = tp.f;
    }
    s.scenarios = sample_scenarios(s.problem.measure, s.grid, s.problem.k, seed, paths, threads);
    s.solution = solve_backward(s.problem.f, s.problem.xi, s.problem.measure, s.scenarios,
                                solver_options(P, s.problem, threads));
    return s;
}

Json solver_diagnostics_json(const SolverDiagnostics& d) {
    Json j = {{"method", to_string(d.method)},
              {"max_fixed_point_iterations", d.max_fixed_point_iterations},
              {"max_fixed_point_residual", number_to_json(d.max_fixed_point_residual)}};
    if (d.method == SolveMethod::MarkovExact) {
        j["max_lattice_size"] = d.lattice_sizes.empty()
                                    ? 0
                                    : *std::max_element(d.lattice_sizes.begin(), d.lattice_sizes.end());
        j["truncated_tail_mass"] = number_to_json(d.truncated_tail_mass);
    } else {
        int min_rank = 1 << 30, features = 0;
        double cond = 1.0;
        for (const auto& r : d.regression) {
            min_rank = std::min(min_rank, r.rank);
            features = std::max(features, r.features);
            cond = std::max(cond, r.condition);
        }
        j["regression"] = {{"min_rank", d.regression.empty() ? 0 : min_rank},
                           {"features", features},
                           {"max_condition", number_to_json(cond)}};
    }
    return j;
}

/// Max node error against the closed form where one is known; null otherwise.
Json exact_errors(const SolvedProblem& s, double T, const Json& P) {
    const auto& id = s.problem.id;
    const auto& sol = s.solution;
    const int n = s.grid.steps();
    if (id == "counterexample") {
        double ey = 0.0, epsi = 0.0;
        for (std::size_t i = 0; i < sol.paths.size(); ++i) {
            const auto& ps = sol.paths[i];
            const Eigen::MatrixXi counts = s.scenarios[i].atom_counts(1);
            for (int g = 0; g <= n; ++g) {
                const double t = s.grid.times[g];
                ey = std::max(ey, std::abs(ps.Y(0, g) - (counts(0, g) - (T - t))));
            }
            for (int g = 0; g < n; ++g) epsi = std::max(epsi, std::abs(ps.psi(0, g) - 1.0));
            for (std::size_t e = 0; e < ps.event_times.size(); ++e) {
                const double t = ps.event_times[e], idx = static_cast<double>(e);
                ey = std::max(ey, std::abs(ps.Y_before(0, e) - (idx - (T - t))));
                ey = std::max(ey, std::abs(ps.Y_after(0, e) - (idx + 1.0 - (T - t))));
            }
        }
        return {{"closed_form", "Y_t = N_t - (T - t), psi = 1, Z = 0"}, {"max_y_error", ey},
                {"max_psi_error", epsi}, {"max_z_error", 0.0}};
    }
    if (id == "zero" || id == "linear-decay") {
        const double c = num(P, "c");
        const double lambda = id == "zero" ? 0.0 : num(P, "lambda");
        double ey = 0.0, epsi = 0.0;
        for (const auto& ps : sol.paths) {
            for (int g = 0; g <= n; ++g)
                ey = std::max(ey, std::abs(ps.Y(0, g) - c * std::exp(-lambda * (T - s.grid.times[g]))));
            if (ps.psi.size() > 0) epsi = std::max(epsi, ps.psi.cwiseAbs().maxCoeff());
        }
        return {{"closed_form", id == "zero" ? "Y = c" : "Y_t = c exp(-lambda (T - t))"},
                {"max_y_error", ey}, {"max_psi_error", epsi}};
    }
    if (id == "brownian-terminal") {
        const double exact = T * std::exp(-T / 2.0);
        return {{"closed_form", "Y_0 = T exp(-T/2)"}, {"y0", sol.paths.front().Y(0, 0)}, {"y0_exact", exact},
                {"y0_error", std::abs(sol.paths.front().Y(0, 0) - exact)}};
    }
    return nullptr;
}

Outcome run_solve(const Context& ctx) {
    const Json& P = ctx.params;
    const double T = num(P, "T"), p = num(P, "p");
    const auto s = solve_problem(problem_from(P), P, T, ctx.threads);
    const auto& sol = s.solution;

    double residual = 0.0, summed = 0.0, terminal = 0.0;
    std::size_t worst_path = 0;
    for (std::size_t i = 0; i < sol.paths.size(); ++i) {
        const auto r = residual_check(sol, i, s.problem.f, s.problem.xi, s.problem.measure, s.scenarios[i]);
        if (r.max_abs > residual) {
            residual = r.max_abs;
            worst_path = i;
        }
        summed = std::max(summed, r.summed);
        terminal = std::max(terminal, r.terminal_mismatch);
    }
    std::vector<double> y0(sol.paths.size());
    for (std::size_t i = 0; i < y0.size(); ++i) y0[i] = sol.paths[i].Y(0, 0);

    Outcome out;
    const Json exact = exact_errors(s, T, P);
    out.result = {{"problem", s.problem.id},
                  {"paths", sol.paths.size()},
                  {"y0", est(batch_estimate(y0))},
                  {"max_step_residual", residual},
                  {"max_summed_residual", summed},
                  {"worst_residual_path", worst_path},
                  {"terminal_mismatch", terminal},
                  {"solver", solver_diagnostics_json(sol.diagnostics)},
                  {"ep_norms", ep_json(ep_norms(sol, p))},
                  {"exact", exact}};
    out.check(terminal == 0.0, "Y_T differs from xi");
    if (sol.diagnostics.method == SolveMethod::MarkovExact)
        out.check(residual <= 1e-10, "discrete equation residual exceeds 1e-10");
    const bool closed_form = s.problem.id == "counterexample" || s.problem.id == "zero";
    if (closed_form && P.at("truncation").is_null()) {
        out.check(exact.at("max_y_error").get<double>() <= 1e-10, "max Y error exceeds 1e-10");
        out.check(exact.at("max_psi_error").get<double>() <= 1e-10, "max psi error exceeds 1e-10");
    }
    return out;
}

Outcome run_counterexample(const Context& ctx) {
    const Json& P = ctx.params;
    const std::uint64_t seed = seed_of(P);
    const double T = num(P, "T");
    const std::size_t paths = count_param(P, "paths");
    const auto batches = integer(P, "batches");
    require(batches >= kMinBatches, "parameter 'batches' must be >= " + std::to_string(kMinBatches));
    Outcome out;
    out.csv_header = {"p", "T", "paths", "I1", "I1_se", "I2", "I2_se", "gap", "combined_se", "sigmas", "significant"};
    Json rows = Json::array();
    for (double p : num_list(P, "p")) {
        const auto g = counterexample_gap(p, T, paths, seed, ctx.threads, static_cast<int>(batches));
        const double gap = g.i2.mean - g.i1.mean;
        rows.push_back({{"p", p}, {"I1", est(g.i1)}, {"I2", est(g.i2)}, {"gap", gap},
                        {"paired_gap", est(g.paired)}, {"combined_se", g.combined_se},
                        {"sigmas", g.sigmas}, {"significant", g.significant}});
        out.csv_rows.push_back({p, T, paths, g.i1.mean, g.i1.se, g.i2.mean, g.i2.se, gap, g.combined_se, g.sigmas,
                                g.significant});
        std::ostringstream msg;
        msg << "p=" << p << ": I2 - I1 = " << gap << " is not above 3 se (" << g.combined_se << ")";
        out.check(g.significant, msg.str());
    }
    out.result = {{"T", T}, {"paths", paths}, {"rows", rows}};
    return out;
}

Outcome run_apriori(const Context& ctx) {
    const Json& P = ctx.params;
    const double p = num(P, "p");
    std::vector<std::string> ids;
    if (P.at("problems").is_null()) ids = problem_ids();
    else
        for (const auto& s : P.at("problems")) ids.push_back(s.get<std::string>());
    require(!ids.empty(), "parameter 'problems' must not be empty");
    const std::uint64_t seed = seed_of(P);

    Outcome out;
    out.csv_header = {"problem", "T", "lhs", "lhs_se", "rhs", "rhs_se", "ratio", "condition_c_ok"};
    Json rows = Json::array();
    std::vector<double> ratios;
    for (const auto& id : ids) {
        for (double T : num_list(P, "T")) {
            Json local = P;
            local["problem"] = id;
            const auto s = solve_problem(make_problem(id), local, T, ctx.threads);
            BatterySpec spot;
            spot.k = std::max(1, s.problem.k);
            spot.d = s.problem.xi.dim;
            spot.T = T;
            spot.seed = seed;
            spot.samples = 500;
            const ConditionCSpec cond{s.problem.f_t, s.problem.condition_c_alpha, s.problem.condition_c_K};
            try {
                const auto r = apriori_ratio(s.solution, s.scenarios, s.problem.xi, s.problem.f, s.problem.measure,
                                             cond, p, spot);
                rows.push_back({{"problem", id}, {"T", T}, {"lhs", est(r.lhs)}, {"rhs", est(r.rhs)},
                                {"ratio", number_to_json(r.ratio)}, {"terms", ep_json(r.terms)},
                                {"condition_c_ok", r.condition_c_ok},
                                {"condition_c_excess", number_to_json(r.condition_c_excess)}});
                out.csv_rows.push_back({id, T, r.lhs.mean, r.lhs.se, r.rhs.mean, r.rhs.se, r.ratio, r.condition_c_ok});
                ratios.push_back(r.ratio);
                out.check(r.condition_c_ok, id + " T=" + std::to_string(T) + ": condition (C) spot check failed");
            } catch (const ConditionCMisuse& e) {
                rows.push_back({{"problem", id}, {"T", T}, {"error", e.what()}});
                out.check(false, id + ": " + e.what());
            }
        }
    }
    double median = 0.0;
    if (!ratios.empty()) {
        std::vector<double> sorted = ratios;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t h = sorted.size() / 2;
        median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    }
    const double worst = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
    out.result = {{"p", p}, {"rows", rows}, {"median_ratio", median}, {"max_ratio", worst},
                  {"stability_bound", 10.0 * median}};
    out.check(worst <= 10.0 * median, "a ratio exceeds 10x the registry median");
    return out;
}

Outcome run_bdg(const Context& ctx) {
    const Json& P = ctx.params;
    const auto m = measure_from_json(P.at("measure"));
    const auto psi = mark_function_from_json(P.at("psi"));
    const double p = num(P, "p");
    const auto Ts = num_list(P, "T");
    require(!Ts.empty(), "parameter 'T' must list at least one horizon");
    const auto rep = bdg_sandwich(psi, m, p, Ts, count_param(P, "paths"), seed_of(P), ctx.threads);
    Outcome out;
    out.csv_header = {"T", "sup_moment", "sup_moment_se", "qv_moment", "qv_moment_se", "ratio", "ratio_se"};
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"T", r.T}, {"sup_moment", est(r.sup_moment)}, {"qv_moment", est(r.qv_moment)},
                        {"ratio", r.ratio_defined ? number_to_json(r.ratio) : Json(nullptr)},
                        {"ratio_se", r.ratio_defined ? number_to_json(r.ratio_se) : Json(nullptr)}});
        out.csv_rows.push_back({r.T, r.sup_moment.mean, r.sup_moment.se, r.qv_moment.mean, r.qv_moment.se,
                                r.ratio_defined ? Json(r.ratio) : Json(""), r.ratio_defined ? Json(r.ratio_se) : Json("")});
    }
    out.result = {{"p", p},
                  {"rows", rows},
                  {"ratios_finite", rep.ratios_finite},
                  {"ratio_spread", number_to_json(rep.ratio_spread)},
                  {"isometry", {{"lhs", est(rep.isometry_lhs)}, {"rhs", rep.isometry_rhs}, {"ok", rep.isometry_ok}}}};
    out.check(rep.ratios_finite, "a BDG ratio is not finite and positive");
    out.check(rep.isometry_ok, "E|N_T|^2 is more than 3 se from T ||psi||_2^2");
    return out;
}

Outcome run_bj(const Context& ctx) {
    const Json& P = ctx.params;
    const auto m = measure_from_json(P.at("measure"));
    const auto psi = mark_function_from_json(P.at("psi"));
    const double p = num(P, "p"), T = num(P, "T");
    const auto rep = bj_norm_check(psi, m, p, T, count_param(P, "paths"), seed_of(P), num_list(P, "etas"),
                                   ctx.threads);
    Outcome out;
    out.csv_header = {"eta", "norm_bound", "qv_moment", "qv_moment_se", "moment_root", "ratio", "k_hat", "k_hat_l1"};
    Json rows = Json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"eta", r.eta}, {"norm_bound", number_to_json(r.norm_bound)}, {"qv_moment", est(r.qv_moment)},
                        {"moment_root", number_to_json(r.moment_root)}, {"ratio", number_to_json(r.ratio)},
                        {"k_hat", number_to_json(r.k_hat)}, {"k_hat_l1", number_to_json(r.k_hat_l1)}});
        out.csv_rows.push_back({r.eta, r.norm_bound, r.qv_moment.mean, r.qv_moment.se, r.moment_root, r.ratio, r.k_hat,
                                r.k_hat_l1});
    }
    out.result = {{"p", p}, {"T", T}, {"rows", rows},
                  {"limit_norm_bound", number_to_json(rep.limit_norm_bound)}, {"cofinite", rep.cofinite}};
    out.check(rep.cofinite, "norm bound and moment disagree on finiteness");
    return out;
}

double poisson_power_moment(double rate, double e) {
    // Σ_k k^e P(N = k), summed until the remaining mass is negligible.
    double total = 0.0, pmf = std::exp(-rate), mass = pmf;
    for (int k = 1; k < 100000; ++k) {
        pmf *= rate / k;
        mass += pmf;
        total += std::pow(static_cast<double>(k), e) * pmf;
        if (k > rate && 1.0 - mass < 1e-17) break;
    }
    return total;
}

Outcome run_ep_norms(const Context& ctx) {
    const Json& P = ctx.params;
    const double p = num(P, "p"), T = num(P, "T");
    Outcome out;
    const auto levels = num_list(P, "levels");
    if (!levels.empty()) {
        const auto study = truncation_stability(problem_from(P), levels, p, T, static_cast<int>(integer(P, "grid_steps")),
                                                count_param(P, "paths"), seed_of(P), ctx.threads);
        Json diag = Json::array();
        for (const auto& d : study.diagnostics) diag.push_back(ep_json(d));
        out.result = {{"levels", study.levels}, {"diagnostics", diag},
                      {"successive_differences", study.successive_differences}, {"decreasing", study.decreasing}};
        out.csv_header = {"level", "next_level", "difference"};
        for (std::size_t i = 0; i < study.successive_differences.size(); ++i)
            out.csv_rows.push_back({study.levels[i], study.levels[i + 1], study.successive_differences[i]});
        out.check(study.decreasing, "successive truncation differences are not decreasing");
        return out;
    }
    const auto s = solve_problem(problem_from(P), P, T, ctx.threads);
    const auto d = ep_norms(s.solution, p);
    out.result = {{"problem", s.problem.id}, {"ep_norms", ep_json(d)}};
    out.csv_header = {"term", "mean", "se"};
    out.csv_rows = {{"e_sup_y", d.sup_y.mean, d.sup_y.se}, {"e_z", d.z.mean, d.z.se},
                    {"e_psi", d.psi.mean, d.psi.se}, {"e_m", d.m.mean, d.m.se},
                    {"total", d.total.mean, d.total.se}};
    if (s.problem.id == "counterexample") {
        const double oracle = poisson_power_moment(T, p / 2.0);
        const bool ok = std::abs(d.psi.mean - oracle) <= 3.0 * d.psi.se;
        out.result["e_psi_oracle"] = {{"value", oracle}, {"within_3se", ok}};
        out.check(ok, "e_psi is more than 3 se from the Poisson series value");
    }
    return out;
}

using Runner = std::function<Outcome(const Context&)>;

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> table = {
        {"verify-lemma", run_verify_lemma}, {"sum-norm", run_sum_norm}, {"simulate", run_simulate},
        {"solve", run_solve},               {"counterexample", run_counterexample},
        {"apriori", run_apriori},           {"bdg", run_bdg},           {"bj", run_bj},
        {"ep-norms", run_ep_norms}};
    return table;
}

std::string csv_cell(const Json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::isnan(x)) return "nan";
        if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    }
    return v.dump();
}

Json header_json(const ExperimentConfig& config, const Json& params) {
    Json h = {{"tool", "bsdelab"}, {"version", version()}, {"subcommand", config.subcommand}, {"config", params}};
    h["seed"] = params.contains("seed") ? params.at("seed") : Json(nullptr);
    return h;
}

void write_text(const std::string& path, std::ostream& fallback, const std::string& text) {
    if (path.empty()) {
        fallback << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), "cannot write '" + path + "'");
    f << text;
}

}  // namespace

std::string version() { return BSDELAB_VERSION; }

std::vector<std::string> subcommands() {
    std::vector<std::string> names;
    for (const auto& [name, spec] : schemas()) names.push_back(name);
    return names;
}

bool is_stochastic(const std::string& subcommand, const Json& params) {
    if (subcommand == "sum-norm") return false;
    if (subcommand == "verify-lemma")
        return params.contains("certificates") && params.at("certificates").is_number() &&
               params.at("certificates").get<double>() > 0;
    return true;
}

Json resolve_params(const std::string& subcommand, const Json& overrides) {
    const auto& schema = schema_of(subcommand);
    require(overrides.is_object(), "parameters must form a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const ParamSpec& s) { return s.name == key; });
        require(known, "unknown parameter '" + key + "' for subcommand " + subcommand);
    }
    Json resolved = Json::object();
    for (const auto& spec : schema) {
        const Json& v = overrides.contains(spec.name) ? overrides.at(spec.name) : spec.fallback;
        check_type(spec, v);
        resolved[spec.name] = v;
    }
    return resolved;
}

int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    Json params;
    Outcome outcome;
    try {
        params = resolve_params(config.subcommand, config.params);
        if (is_stochastic(config.subcommand, params)) seed_of(params);
        outcome = runners().at(config.subcommand)(Context{params, config.threads});
    } catch (const InvalidInput& e) {
        err << "bsdelab " << config.subcommand << ": invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const Json::exception& e) {
        err << "bsdelab " << config.subcommand << ": invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const ConvergenceError& e) {
        err << "bsdelab " << config.subcommand << ": did not converge: " << e.what() << "\n";
        return kExitAssertion;
    }

    const Json header = header_json(config, params);
    try {
        if (outcome.stream) {
            std::string text = header.dump() + "\n";
            for (const auto& line : outcome.stream_lines) text += line.dump() + "\n";
            write_text(config.out_path, out, text);
        } else {
            Json doc = header;
            doc["result"] = outcome.result;
            doc["status"] = outcome.failures.empty() ? "pass" : "fail";
            doc["failures"] = outcome.failures;
            write_text(config.out_path, out, doc.dump(2) + "\n");
        }
        if (!config.csv_path.empty()) {
            std::string text = "# bsdelab " + version() + "\n# subcommand: " + config.subcommand +
                               "\n# seed: " + header.at("seed").dump() + "\n# config: " + params.dump() + "\n";
            for (std::size_t i = 0; i < outcome.csv_header.size(); ++i)
                text += (i ? "," : "") + outcome.csv_header[i];
            text += "\n";
            for (const auto& row : outcome.csv_rows) {
                for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + csv_cell(row[i]);
                text += "\n";
            }
            write_text(config.csv_path, out, text);
        }
    } catch (const InvalidInput& e) {
        err << "bsdelab " << config.subcommand << ": " << e.what() << "\n";
        return kExitInvalid;
    }
    for (const auto& f : outcome.failures) err << "bsdelab " << config.subcommand << ": FAIL: " << f << "\n";
    return outcome.failures.empty() ? kExitPass : kExitAssertion;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerical laboratory for L^p solutions of BSDEs with jumps", "bsdelab"};
    app.require_subcommand(1);
    std::string config_path, out_path, csv_path;
    int threads = 0;
    app.add_option("--config", config_path, "JSON file with parameters (flags override it)");
    app.add_option("--out", out_path, "write the JSON result here instead of standard output");
    app.add_option("--csv", csv_path, "also write a CSV table here");
    app.add_option("--threads", threads, "worker cap (0: all cores); results do not depend on it")
        ->check(CLI::NonNegativeNumber);
    app.set_version_flag("--version", version());

    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::map<std::string, bool>> flags;
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> blurbs{
        {"verify-lemma", "grid sweep and certificates for Psi >= Gamma"},
        {"sum-norm", "norm of a mark function in L^q + L^2"},
        {"simulate", "sample Poisson/Brownian paths and a compensated integral"},
        {"solve", "backward solve of a registry problem with residual checks"},
        {"counterexample", "strict gap between the two p-th power integrals"},
        {"apriori", "a priori ratio of E^p norms to the data"},
        {"bdg", "BDG sandwich for a compensated integral"},
        {"bj", "Bichteler-Jacod norms under small-jump truncation"},
        {"ep-norms", "E^p norms of a solution, optionally across truncation levels"},
    };
    for (const auto& [name, schema] : schemas()) {
        const auto blurb = blurbs.find(name);
        CLI::App* sub = app.add_subcommand(name, blurb == blurbs.end() ? "" : blurb->second);
        subs[name] = sub;
        for (const auto& spec : schema) {
            if (spec.kind == Kind::Bool) {
                sub->add_flag(flag_name(spec.name), flags[name][spec.name], spec.help);
            } else {
                sub->add_option(flag_name(spec.name), raw[name][spec.name], spec.help);
            }
        }
    }
    // Global options are accepted after the subcommand name as well.
    for (auto& [name, sub] : subs) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitInvalid;
    }

    ExperimentConfig config;
    config.out_path = out_path;
    config.csv_path = csv_path;
    config.threads = threads;
    std::string chosen;
    for (auto& [name, sub] : subs)
        if (sub->parsed()) chosen = name;
    config.subcommand = chosen;

    try {
        if (!config_path.empty()) {
            Json file = read_json_file(config_path);
            require(file.is_object(), config_path + ": expected a JSON object");
            if (file.contains("subcommand")) {
                require(file.at("subcommand") == chosen,
                        config_path + ": written for subcommand " + file.at("subcommand").dump());
                file.erase("subcommand");
            }
            if (file.contains("params")) file = file.at("params");
            config.params = file;
        }
        for (const auto& spec : schema_of(chosen)) {
            CLI::App* sub = subs.at(chosen);
            if (spec.kind == Kind::Bool) {
                if (sub->count(flag_name(spec.name)) > 0) config.params[spec.name] = flags[chosen][spec.name];
            } else if (sub->count(flag_name(spec.name)) > 0) {
                config.params[spec.name] = flag_to_json(spec, raw[chosen][spec.name]);
            }
        }
        if (!config.params.contains("seed") || config.params.at("seed").is_null()) {
            const bool takes_seed = std::any_of(schema_of(chosen).begin(), schema_of(chosen).end(),
                                                [](const ParamSpec& s) { return s.name == "seed"; });
            if (const char* env = std::getenv("BSDELAB_SEED"); env != nullptr && takes_seed) {
                const ParamSpec seed_spec{"seed", Kind::Integer, nullptr, ""};
                config.params["seed"] = flag_to_json(seed_spec, env);
            }
        }
    } catch (const InvalidInput& e) {
        err << "bsdelab " << chosen << ": invalid input: " << e.what() << "\n";
        return kExitInvalid;
    }
    return run(config, out, err);
}

}  // namespace bsdelab::cli
