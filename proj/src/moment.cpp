#include "mopf/moment.hpp"

#include "mopf/error.hpp"

#include <cmath>

namespace mopf {

bool SymbolicPsdBlock::is_zero() const {
    for (const auto& e : entries_) {
        if (!e.empty()) return false;
    }
    return true;
}

Eigen::MatrixXd SymbolicPsdBlock::evaluate(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd m(dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
        for (int j = i; j < dim_; ++j) {
            m(i, j) = at(i, j).evaluate(y);
            m(j, i) = m(i, j);
        }
    }
    return m;
}

Eigen::VectorXd SdpProblem::fixed_vector() const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(variable_count()));
    for (const auto& [v, val] : fixed_vars) y(static_cast<Eigen::Index>(v)) = val;
    return y;
}

std::vector<Exponent> monomial_basis(int nvars, int order) {
    return graded_monomials(nvars, order);
}

SymbolicPsdBlock build_moment_matrix(const std::vector<Exponent>& basis, const MomentIndex& idx) {
    const int k = static_cast<int>(basis.size());
    const int order = basis.empty() ? 0 : total_degree(basis.back());
    SymbolicPsdBlock block(k, "moment", order);
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            const auto e = LinearExpr::single(idx.position(basis[i] + basis[j]));
            block.at(i, j) = e;
            block.at(j, i) = e;
        }
    }
    return block;
}

SymbolicPsdBlock build_localizing_matrix(const Polynomial& f, int order, const MomentIndex& idx,
                                         const std::string& label) {
    const int beta = (f.degree() + 1) / 2;
    const int local_order = order - beta;
    if (local_order < 0) {
        throw OrderTooLowError("relaxation order too low: constraint '" + label + "' has degree " +
                               std::to_string(f.degree()) + " and needs order >= " +
                               std::to_string(beta) + ", got " + std::to_string(order));
    }
    const auto basis = monomial_basis(idx.nvars(), local_order);
    const int k = static_cast<int>(basis.size());
    SymbolicPsdBlock block(k, label, local_order);
    for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
            const Exponent shift = basis[i] + basis[j];
            LinearExpr e;
            for (const auto& [alpha, c] : f.terms()) e.add(idx.position(alpha + shift), c);
            block.at(i, j) = e;
            block.at(j, i) = e;
        }
    }
    return block;
}

int minimum_order(const PolynomialProgram& pp) {
    return std::max(1, (pp.degree() + 1) / 2);
}

SdpProblem assemble_relaxation(const PolynomialProgram& pp, int order) {
    if (order < 1) {
        throw OrderTooLowError("relaxation order must be at least 1, got " + std::to_string(order));
    }
    // Collect every polynomial whose degree exceeds 2*order before building.
    std::string violating;
    auto check = [&](const Polynomial& p, const std::string& name) {
        if (p.degree() > 2 * order) {
            if (!violating.empty()) violating += ", ";
            violating += name + " (degree " + std::to_string(p.degree()) + ")";
        }
    };
    check(pp.objective, "objective");
    for (const auto& c : pp.constraints) check(c.poly, c.label);
    if (!violating.empty()) {
        throw OrderTooLowError("relaxation order too low: order " + std::to_string(order) +
                               " covers degree <= " + std::to_string(2 * order) +
                               "; violating: " + violating + "; minimum order is " +
                               std::to_string(minimum_order(pp)));
    }

    SdpProblem prob;
    prob.order = order;
    prob.index = MomentIndex(pp.nvars(), 2 * order);
    prob.variable_names = pp.variables();
    prob.objective = apply_functional(pp.objective, prob.index);
    prob.fixed_vars[0] = 1.0;

    const int nv = pp.nvars();
    prob.psd_blocks.push_back(build_moment_matrix(monomial_basis(nv, order), prob.index));
    for (const auto& c : pp.constraints) {
        if (c.kind == ConstraintKind::reference && c.is_equality()) {
            // Vq_ref = 0 pins every moment with a positive Vq_ref exponent.
            int var = -1;
            for (const auto& [e, coef] : c.poly.terms()) {
                for (int i = 0; i < nv; ++i) {
                    if (e[i] == 1) var = i;
                }
            }
            if (var < 0 || c.poly.size() != 1 || c.lower != 0.0) {
                throw Error("reference equality must have the form Vq_ref = 0");
            }
            for (std::size_t p = 0; p < prob.index.size(); ++p) {
                if (prob.index.exponent(p)[var] > 0) prob.fixed_vars[p] = 0.0;
            }
            continue;
        }
        if (c.is_equality()) {
            prob.zero_blocks.push_back(
                build_localizing_matrix(c.poly - c.lower, order, prob.index, c.label + "="));
            continue;
        }
        if (std::isfinite(c.lower)) {
            prob.psd_blocks.push_back(
                build_localizing_matrix(c.poly - c.lower, order, prob.index, c.label + ">=min"));
        }
        if (std::isfinite(c.upper)) {
            prob.psd_blocks.push_back(
                build_localizing_matrix(c.upper - c.poly, order, prob.index, c.label + "<=max"));
        }
    }
    return prob;
}

BlockCensus block_census(const SdpProblem& prob) {
    BlockCensus census;
    for (const auto& b : prob.psd_blocks) census.psd.emplace_back(b.label(), b.dim());
    for (const auto& b : prob.zero_blocks) census.zero.emplace_back(b.label(), b.dim());
    return census;
}

} // namespace mopf
