#pragma once

// Command-line front end. run_cli is the whole program minus process setup,
// so tests can drive it with captured streams.

#include "mopf/extract.hpp"
#include "mopf/sampling.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mopf {

enum class OutputFormat { json, csv };

struct RunConfig {
    std::string command;  ///< solve | hierarchy | export | sample-space
    std::string input;
    std::optional<int> order;
    int max_order = 3;
    Thresholds thresholds;
    SolverSettings solver;
    OpfOptions opf;
    OutputFormat format = OutputFormat::json;
    std::string out;  ///< empty: standard output
    std::vector<GridAxis> grid;
    bool squared = false;
    bool slacks = false;
    std::string plot_script;
    bool timings = true;

    void validate() const;
};

inline constexpr int kExitExact = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInexact = 2;

/// Reads a JSON config file into cfg. Unknown keys are rejected.
void apply_config_file(const std::string& path, RunConfig& cfg);

/// Report documents, already rounded to 12 significant digits.
std::string solve_report(const Network& net, const PolynomialProgram& pp, const OrderResult& r,
                         const RunConfig& cfg);
std::string hierarchy_report(const Network& net, const PolynomialProgram& pp,
                             const HierarchyResult& h, const RunConfig& cfg);

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mopf
