#pragma once

// Dense primal-dual interior-point solver for LMI-form semidefinite
// programs, plus SDPA sparse-format interchange.

#include "mopf/moment.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mopf {

struct SolverSettings {
    double gap_tolerance = 1e-8;
    double feasibility_tolerance = 1e-8;
    int max_iterations = 200;
    double step_fraction = 0.98;
    bool predictor_corrector = true;
    /// Iterates whose dual objective or variable norms exceed this are
    /// treated as diverging (infeasibility heuristic).
    double divergence_threshold = 1e10;
    /// Largest number of free moment variables the dense solver accepts.
    std::size_t max_free_variables = 4000;
    /// Relative singular-value cut for the scaled constraint operator; weaker
    /// directions are left out of the Newton step.
    double schur_cutoff = 1e-10;
    /// Each psd block (normalized to unit largest coefficient) is solved as
    /// B >= -psd_shift * I. The reported dual objective refers to the
    /// unshifted blocks and remains a valid bound.
    double psd_shift = 1e-8;
    bool verbose = false;

    void validate() const;
};

enum class SolveStatus { optimal, max_iterations, numerical_failure, infeasible_detected };

std::string to_string(SolveStatus status);

struct IterateRecord {
    int iteration = 0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;  ///< of the unshifted problem
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    double mu = 0.0;
};

struct SdpSolution {
    Eigen::VectorXd y;  ///< full moment vector, fixed variables included
    double objective = 0.0;
    double dual_objective = 0.0;  ///< of the unshifted problem
    SolveStatus status = SolveStatus::numerical_failure;
    int iterations = 0;
    double gap = 0.0;  ///< relative duality gap
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    std::vector<double> block_min_eigenvalues;  ///< one per psd block
    std::vector<IterateRecord> history;
    std::string message;
};

/// LMI data with fixed variables substituted: every block equals
/// constant + sum_k x_k F_k over the free variables x.
struct LmiEntry {
    Eigen::Index var = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

struct LmiBlock {
    std::string label;
    int dim = 0;
    Eigen::MatrixXd constant;
    std::vector<LmiEntry> entries;  ///< upper triangle, row <= col
};

struct LmiForm {
    std::vector<std::size_t> free_vars;  ///< moment position of free variable k
    Eigen::VectorXd fixed;               ///< full moment vector of fixed values
    Eigen::VectorXd cost;                ///< objective over free variables
    double cost_constant = 0.0;
    std::vector<LmiBlock> psd;
    std::vector<LmiBlock> zero;

    Eigen::Index free_count() const { return static_cast<Eigen::Index>(free_vars.size()); }
    /// Full moment vector from free values.
    Eigen::VectorXd expand(const Eigen::VectorXd& x) const;
};

LmiForm compile_lmi(const SdpProblem& prob);

SdpSolution solve(const SdpProblem& prob, const SolverSettings& settings = {});

struct ResidualReport {
    std::vector<std::string> psd_labels;
    std::vector<double> psd_min_eigenvalues;
    std::vector<std::string> zero_labels;
    std::vector<double> zero_max_abs;
    double objective = 0.0;

    double worst_psd() const;
    double worst_zero() const;
};

ResidualReport residuals(const SdpProblem& prob, const Eigen::VectorXd& y);
ResidualReport residuals(const SdpProblem& prob, const SdpSolution& sol);

// ---------------------------------------------------------------------------
// SDPA sparse format (.dat-s)

struct SdpaEntry {
    int matrix = 0;  ///< 0 for F0
    int block = 0;   ///< 1-based
    int row = 0;     ///< 1-based, row <= col
    int col = 0;
    double value = 0.0;

    friend bool operator==(const SdpaEntry&, const SdpaEntry&) = default;
};

struct SdpaData {
    int variable_count = 0;
    std::vector<int> block_sizes;
    Eigen::VectorXd objective;
    std::vector<SdpaEntry> entries;
    std::vector<std::string> comments;
};

/// Writes min c'x s.t. sum_k x_k F_k - F_0 >= 0 over the free moment
/// variables. Zero blocks become a +B / -B block pair.
std::string export_sdpa(const SdpProblem& prob);
SdpaData parse_sdpa(const std::string& text);

} // namespace mopf
