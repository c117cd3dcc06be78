#pragma once

// Brute-force grid sampling of the voltage space of a polynomial program.

#include "mopf/opf_poly.hpp"

#include <string>
#include <vector>

namespace mopf {

struct GridAxis {
    std::string variable;
    double min = 0.0;
    double max = 0.0;
    int steps = 2;

    double value(int i) const;
};

/// Parses "VAR=min:max:steps".
GridAxis parse_grid_axis(const std::string& spec);

struct SampleOptions {
    double feasibility_tolerance = 1e-6;
    bool constraint_slacks = false;  ///< one column per constraint
    bool squared = false;            ///< squared-coordinate columns
};

inline constexpr int kMaxSampledVariables = 4;

struct SampleRow {
    Eigen::VectorXd point;
    bool feasible = false;
    double cost = 0.0;
    double slack_min = 0.0;
    std::vector<double> slacks;
};

struct SampleTable {
    std::vector<std::string> variables;
    std::vector<std::string> constraint_labels;
    std::vector<int> shape;  ///< steps per variable; last variable varies fastest
    std::vector<SampleRow> rows;

    std::size_t feasible_count() const;
};

/// Evaluates every grid point. Each program variable needs exactly one axis.
SampleTable sample_space(const PolynomialProgram& pp, const std::vector<GridAxis>& axes,
                         const SampleOptions& options = {});

std::string to_csv(const SampleTable& table, const SampleOptions& options = {});

/// Minimal matplotlib script that scatters the feasible rows of a CSV file.
std::string plot_script(const std::string& csv_path, const SampleTable& table);

} // namespace mopf
