#pragma once

// Order-gamma moment relaxation: moment matrix, localizing matrices and the
// assembled semidefinite program in LMI form over the moment variables y.

#include "mopf/opf_poly.hpp"
#include "mopf/polynomial.hpp"

#include <map>
#include <string>
#include <vector>

namespace mopf {

/// Square symmetric matrix whose entries are linear forms in y.
class SymbolicPsdBlock {
public:
    SymbolicPsdBlock() = default;
    SymbolicPsdBlock(int dim, std::string label, int order)
        : dim_(dim), order_(order), label_(std::move(label)),
          entries_(static_cast<std::size_t>(dim) * dim) {}

    int dim() const { return dim_; }
    int order() const { return order_; }
    const std::string& label() const { return label_; }

    const LinearExpr& at(int i, int j) const { return entries_[index(i, j)]; }
    LinearExpr& at(int i, int j) { return entries_[index(i, j)]; }

    bool is_zero() const;

    /// Numeric value of the block at a moment vector.
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;

private:
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * dim_ + j; }

    int dim_ = 0;
    int order_ = 0;
    std::string label_;
    std::vector<LinearExpr> entries_;
};

/// min objective(y) s.t. every psd block is PSD, every zero block vanishes
/// identically, and fixed variables take their values.
struct SdpProblem {
    MomentIndex index;  ///< degree 2*order
    int order = 0;
    std::vector<std::string> variable_names;
    LinearExpr objective;
    std::vector<SymbolicPsdBlock> psd_blocks;
    std::vector<SymbolicPsdBlock> zero_blocks;
    std::map<std::size_t, double> fixed_vars;

    std::size_t variable_count() const { return index.size(); }
    /// Moment vector with free variables zero and fixed ones set.
    Eigen::VectorXd fixed_vector() const;
};

/// Degree-<=order monomials in graded-lex order, constant first.
std::vector<Exponent> monomial_basis(int nvars, int order);

SymbolicPsdBlock build_moment_matrix(const std::vector<Exponent>& basis, const MomentIndex& idx);

/// Localizing matrix of f >= 0 at relaxation order `order`. The block uses
/// the basis of order (order - beta) with deg f in {2 beta - 1, 2 beta}.
/// Throws OrderTooLowError when order < beta.
SymbolicPsdBlock build_localizing_matrix(const Polynomial& f, int order, const MomentIndex& idx,
                                         const std::string& label = {});

/// Smallest admissible relaxation order: ceil(deg / 2), at least 1.
int minimum_order(const PolynomialProgram& pp);

SdpProblem assemble_relaxation(const PolynomialProgram& pp, int order);

/// Block dimensions of an assembled relaxation, in block order.
struct BlockCensus {
    std::vector<std::pair<std::string, int>> psd;
    std::vector<std::pair<std::string, int>> zero;
};

BlockCensus block_census(const SdpProblem& prob);

} // namespace mopf
