#pragma once

#include "mopf/moment.hpp"
#include "mopf/network.hpp"
#include "mopf/opf_poly.hpp"
#include "mopf/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mopf {

/// Number of eigenvalues above rank_tol * max(1, lambda_max).
template <typename Derived>
int numerical_rank(const Eigen::MatrixBase<Derived>& matrix, double rank_tol = 1e-6) {
    using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (matrix.rows() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(matrix), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const auto cut = rank_tol * std::max(typename Derived::Scalar(1), ev(ev.size() - 1));
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cut) ++rank;
    }
    return rank;
}

struct Thresholds {
    double gap = 1e-5;          ///< relative
    double feasibility = 1e-6;  ///< per unit
    double rank_tol = 1e-6;     ///< relative eigenvalue cut
};

enum class Verdict { globally_optimal, inexact_lower_bound, multiple_optima_suspected };

std::string to_string(Verdict v);

/// Candidate point in the program's variable space read off the degree-one
/// moments (divided by y_0).
Eigen::VectorXd extract_candidate(const Eigen::VectorXd& y, const MomentIndex& idx);
Eigen::VectorXd extract_candidate(const SdpSolution& sol, const MomentIndex& idx);

/// What the relaxation says about itself.
struct RelaxationEvidence {
    double bound = 0.0;
    int rank = 1;
    Eigen::VectorXd spectrum;  ///< eigenvalues of the moment matrix, ascending
};

RelaxationEvidence moment_evidence(const SdpProblem& prob, const SdpSolution& sol,
                                   double rank_tol);

struct ExactnessReport {
    int rank = 0;
    Eigen::VectorXd spectrum;
    Eigen::VectorXd candidate;  ///< in program variables
    Eigen::VectorXd vd;         ///< per bus, reference Vq restored
    Eigen::VectorXd vq;
    std::map<ConstraintKind, double> worst_violation;
    double max_violation = 0.0;
    double candidate_cost = 0.0;
    double bound = 0.0;
    double gap = 0.0;
    Verdict verdict = Verdict::inexact_lower_bound;
};

ExactnessReport certify(const PolynomialProgram& pp, const Eigen::VectorXd& candidate,
                        const RelaxationEvidence& evidence, const Thresholds& thresholds = {});
ExactnessReport certify(const Network& net, const Eigen::VectorXd& candidate,
                        const RelaxationEvidence& evidence, const Thresholds& thresholds = {},
                        const OpfOptions& options = {});

struct OrderResult {
    int order = 0;
    bool solved = false;
    std::string error;
    std::size_t moment_dim = 0;
    std::size_t variable_count = 0;
    SolveStatus status = SolveStatus::numerical_failure;
    int iterations = 0;
    double solver_gap = 0.0;
    double bound = 0.0;
    ExactnessReport report;
    double assemble_seconds = 0.0;
    double solve_seconds = 0.0;
};

/// Assembles, solves and certifies a single relaxation order.
OrderResult solve_order(const PolynomialProgram& pp, int order, const SolverSettings& settings = {},
                        const Thresholds& thresholds = {});

struct HierarchyResult {
    std::vector<OrderResult> orders;
    Verdict verdict = Verdict::inexact_lower_bound;
    std::optional<int> gamma_min;
    std::optional<double> best_bound;
};

struct HierarchyOptions {
    SolverSettings solver;
    Thresholds thresholds;
    OpfOptions opf;
};

/// Solves orders ceil(deg/2) .. max_order, stopping at the first globally
/// optimal verdict.
HierarchyResult solve_hierarchy(const Network& net, int max_order,
                                const HierarchyOptions& options = {});
HierarchyResult solve_hierarchy(const PolynomialProgram& pp, int max_order,
                                const HierarchyOptions& options = {});

} // namespace mopf
