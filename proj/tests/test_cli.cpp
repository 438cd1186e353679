#include "bsdelab/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

using namespace bsdelab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_config(const std::string& sub, Json params, int threads = 1) {
    cli::ExperimentConfig c;
    c.subcommand = sub;
    c.params = std::move(params);
    c.threads = threads;
    std::ostringstream out, err;
    const int code = cli::run(c, out, err);
    return {code, out.str(), err.str()};
}

Outcome run_argv(std::vector<std::string> args) {
    args.insert(args.begin(), "bsdelab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "bsdelab_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("subcommand registry") {
    const auto subs = cli::subcommands();
    for (const char* name : {"verify-lemma", "sum-norm", "simulate", "solve", "counterexample", "apriori", "bdg", "bj",
                             "ep-norms"})
        CHECK(std::find(subs.begin(), subs.end(), name) != subs.end());
    CHECK(cli::is_stochastic("simulate", Json::object()));
    CHECK_FALSE(cli::is_stochastic("sum-norm", Json::object()));
    CHECK_FALSE(cli::version().empty());
}

TEST_CASE("resolve_params fills defaults and rejects unknown keys") {
    const Json p = cli::resolve_params("counterexample", Json{{"paths", 500}});
    CHECK(p.at("paths") == 500);
    CHECK(p.at("T") == 1.0);
    CHECK(p.at("p").size() == 5);
    CHECK_THROWS_AS(cli::resolve_params("counterexample", Json{{"pathz", 500}}), InvalidInput);
    CHECK_THROWS_AS(cli::resolve_params("counterexample", Json{{"paths", "many"}}), InvalidInput);
    CHECK_THROWS_AS(cli::resolve_params("no-such-command", Json::object()), InvalidInput);
}

TEST_CASE("sum-norm examples through the JSON interface") {
    auto r = run_config("sum-norm", Json::object());
    REQUIRE(r.code == cli::kExitPass);
    Json j = Json::parse(r.out);
    CHECK(j.at("status") == "pass");
    CHECK(j.at("result").at("value") == 0.0);
    CHECK(j.at("tool") == "bsdelab");

    r = run_config("sum-norm", Json{{"q", 1.5}, {"function", {{"type", "atoms"}, {"values", {2.0}}}}});
    REQUIRE(r.code == cli::kExitPass);
    CHECK(Json::parse(r.out).at("result").at("value").get<double>() == doctest::Approx(2.0));

    // Weight 4 on one atom: ||v||_{L^1 + L^2} = 2|v| once |v| is large enough for the L^2 piece to win.
    const Json measure = {{"type", "atomic"}, {"atoms", {{{"u", 1.0}, {"w", 4.0}}}}};
    r = run_config("sum-norm", Json{{"q", 1.0}, {"measure", measure}, {"function", {{"type", "atoms"}, {"values", {3.0}}}}});
    REQUIRE(r.code == cli::kExitPass);
    CHECK(Json::parse(r.out).at("result").at("value").get<double>() == doctest::Approx(6.0).epsilon(1e-9));

    r = run_config("sum-norm", Json{{"q", 2.5}});
    CHECK(r.code == cli::kExitInvalid);
    r = run_config("sum-norm", Json{{"measure", {{"type", "powerlaw"}, {"alpha", 2.5}}}});
    CHECK(r.code == cli::kExitInvalid);
}

TEST_CASE("verify-lemma on a coarse grid passes") {
    const auto r = run_config("verify-lemma", Json{{"grid", "60x30"}, {"far_radii", 20}, {"far_angles", 21}, {"p", 1.7}});
    REQUIRE(r.code == cli::kExitPass);
    const Json j = Json::parse(r.out);
    CHECK(j.at("result").at("violation_count") == 0);
    CHECK(j.at("seed").is_null());
}

TEST_CASE("stochastic subcommands require a seed") {
    auto r = run_config("solve", Json{{"paths", 40}});
    CHECK(r.code == cli::kExitInvalid);
    CHECK(r.err.find("seed") != std::string::npos);
    r = run_config("solve", Json{{"paths", 40}, {"seed", 7}});
    CHECK(r.code == cli::kExitPass);
    const Json j = Json::parse(r.out);
    CHECK(j.at("seed") == 7);
    CHECK(j.at("result").at("terminal_mismatch") == 0.0);
    CHECK(j.at("result").at("max_step_residual").get<double>() < 1e-10);
}

TEST_CASE("unknown keys and malformed values exit with 2") {
    CHECK(run_config("bdg", Json{{"seed", 1}, {"colour", "red"}}).code == cli::kExitInvalid);
    CHECK(run_config("bdg", Json{{"seed", 1}, {"p", 0.5}}).code == cli::kExitInvalid);
    CHECK(run_config("frobnicate", Json::object()).code == cli::kExitInvalid);
    CHECK(run_argv({"bdg", "--colour", "red"}).code == cli::kExitInvalid);
    CHECK(run_argv({}).code == cli::kExitInvalid);
}

TEST_CASE("flags override the config file, which overrides defaults") {
    const fs::path cfg = scratch("cfg.json");
    std::ofstream(cfg) << R"({"subcommand":"counterexample","params":{"paths":300,"p":[1.5],"seed":4}})";
    auto r = run_argv({"counterexample", "--config", cfg.string()});
    REQUIRE(r.code == cli::kExitPass);
    Json j = Json::parse(r.out);
    CHECK(j.at("config").at("paths") == 300);
    CHECK(j.at("seed") == 4);

    r = run_argv({"counterexample", "--config", cfg.string(), "--paths", "600", "--seed", "5"});
    REQUIRE(r.code == cli::kExitPass);
    j = Json::parse(r.out);
    CHECK(j.at("config").at("paths") == 600);
    CHECK(j.at("seed") == 5);

    std::ofstream(cfg) << R"({"subcommand":"bdg","params":{}})";
    CHECK(run_argv({"counterexample", "--config", cfg.string()}).code == cli::kExitInvalid);
    CHECK(run_argv({"counterexample", "--config", scratch("missing.json").string()}).code == cli::kExitInvalid);
}

TEST_CASE("the seed can come from the environment") {
    ::setenv("BSDELAB_SEED", "12", 1);
    const auto r = run_argv({"counterexample", "--paths", "300", "--p", "1.3"});
    ::unsetenv("BSDELAB_SEED");
    REQUIRE(r.code == cli::kExitPass);
    CHECK(Json::parse(r.out).at("seed") == 12);
}

TEST_CASE("artifacts: JSON file, CSV with a provenance header, JSON lines") {
    const fs::path out = scratch("out.json"), csv = scratch("out.csv");
    auto r = run_argv({"counterexample", "--paths", "300", "--p", "1.5", "--seed", "3", "--out", out.string(), "--csv",
                       csv.string()});
    REQUIRE(r.code == cli::kExitPass);
    const Json j = Json::parse(slurp(out));
    CHECK(j.at("subcommand") == "counterexample");
    const std::string table = slurp(csv);
    CHECK(table.rfind("# bsdelab ", 0) == 0);
    CHECK(table.find("# seed: 3") != std::string::npos);
    CHECK(table.find("p,T,paths,I1") != std::string::npos);

    r = run_config("simulate", Json{{"paths", 5}, {"seed", 2}, {"format", "jsonl"}, {"T", 0.5}});
    REQUIRE(r.code == cli::kExitPass);
    std::istringstream lines(r.out);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        const Json row = Json::parse(line);
        if (count == 0) CHECK(row.at("subcommand") == "simulate");
        else CHECK(row.contains("grid"));
        ++count;
    }
    CHECK(count == 6);
}

TEST_CASE("stochastic output does not depend on the thread count") {
    const std::vector<std::pair<std::string, Json>> cases = {
        {"simulate", {{"paths", 3000}, {"seed", 8}}},
        {"counterexample", {{"paths", 3000}, {"seed", 8}, {"p", {1.2, 1.8}}}},
        {"bdg", {{"paths", 3000}, {"seed", 8}}},
        {"solve", {{"paths", 300}, {"seed", 8}, {"problem", "brownian-terminal"}, {"method", "regression"}}},
    };
    for (const auto& [sub, params] : cases) {
        const auto one = run_config(sub, params, 1);
        const auto four = run_config(sub, params, 4);
        CAPTURE(sub);
        CHECK(one.code == four.code);
        CHECK(one.out == four.out);
        CHECK(one.out == run_config(sub, params, 1).out);
    }
}
