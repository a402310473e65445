#pragma once

/// Command-line front end: JSON run configuration, subcommand dispatch, and
/// deterministic artifact emission.
///
/// Subcommands: solve-elliptic, solve-classical, solve-translating, flow,
/// flow-translating, verify-lemmas, convergence-study, check-config.  Every
/// numeric run is driven by a single JSON config document; command-line flags
/// are reserved for seed, overwrite, force, and verbosity.  Outputs
/// (report.json, solution.dat, trace.csv, study.csv) land in the configured
/// output directory and are byte-deterministic given config and seed.
///
/// Exit codes: 0 success/converged, 2 validation error, 3 not converged,
/// 4 internal error.  Errors print a human-readable line on the error stream
/// and a JSON error object on the output stream.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sumhess/elliptic.hpp"
#include "sumhess/parabolic.hpp"

namespace sumhess::cli {

/// Exit codes of run(); scripts may rely on these values.
inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_not_converged = 3;
inline constexpr int exit_internal = 4;

/// One fully parsed and normalized run configuration.  Unknown keys are
/// rejected during parsing; defaults are filled in so two configs that mean
/// the same run normalize to the same document.  Expressions are stored in
/// canonical form (parsed and printed back).  `directory` keeps the string
/// exactly as written so the normalized echo is location-independent;
/// `resolved_directory` is the same path resolved against the config file
/// and is the only place any subcommand writes to.
struct RunConfig {
    int n = 2;
    int k = 2;
    double alpha = 1.0;
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> dims;
    std::string f;
    std::string phi;
    std::string u0 = "0";
    std::optional<std::string> u_exact;
    Mode mode = Mode::general;
    double c_phi = 0.0;
    std::optional<double> c_f;
    double f_min = 1e-8;

    SolverConfig solver;
    FlowConfig flow;  // flow.newton mirrors solver; flow.force is flag-only

    std::string directory = "out";
    std::string resolved_directory = "out";
    std::vector<std::string> formats{"report", "solution", "trace", "study"};
    std::uint64_t seed = 1;
};

/// Parses and schema-validates a config document.  base_dir is the directory
/// of the config file; relative output paths resolve against it.  Throws
/// std::invalid_argument naming the offending key path on unknown keys, type
/// mismatches, out-of-range values, and expression syntax errors.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& base_dir);

/// Canonical JSON echo of a config: defaults filled, keys ordered,
/// expressions canonical, `directory` as written.  Parsing the echo and
/// normalizing again reproduces it byte for byte.
[[nodiscard]] std::string normalized_config(const RunConfig& rc);

/// Builds and structurally validates the ProblemSpec a config describes.
/// Throws std::invalid_argument on any condition validate() rejects.
[[nodiscard]] ProblemSpec problem_of(const RunConfig& rc);

/// Entry point of the tool; argv[0] is the program name.  Writes files only
/// under the configured output directory.  Never throws: every failure is
/// mapped to an exit code, a human-readable message on err, and a JSON error
/// object on out.
[[nodiscard]] int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, bound to std::cout / std::cerr.
[[nodiscard]] int run(int argc, const char* const* argv);

}  // namespace sumhess::cli
