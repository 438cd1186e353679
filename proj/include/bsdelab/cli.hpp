#pragma once

// Command-line front end. Every subcommand has a parameter schema; values come
// from schema defaults, then an optional JSON config file, then flags.

#include "bsdelab/serialization.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace bsdelab::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitInvalid = 2;

struct ExperimentConfig {
    std::string subcommand;
    Json params = Json::object();  ///< overrides; unknown keys are rejected by run()
    std::string out_path;          ///< empty: standard output
    std::string csv_path;          ///< empty: no CSV
    int threads = 0;               ///< worker cap; never changes results
};

std::string version();
std::vector<std::string> subcommands();
bool is_stochastic(const std::string& subcommand, const Json& params);

/// Parameters with schema defaults filled in. Throws InvalidInput on schema violations.
Json resolve_params(const std::string& subcommand, const Json& overrides);

/// Validates, runs and writes artifacts. Returns 0 (all assertions pass),
/// 1 (an assertion failed) or 2 (invalid input).
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Full argv handling: CLI11 parsing, config file, BSDELAB_SEED, then run().
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bsdelab::cli
