#include "mopf/sdp.hpp"

#include "mopf/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace mopf {

void SolverSettings::validate() const {
    if (!(gap_tolerance > 0.0) || !(feasibility_tolerance > 0.0)) {
        throw ValidationError("solver tolerances must be positive");
    }
    if (max_iterations <= 0) throw ValidationError("max_iterations must be positive");
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) {
        throw ValidationError("step fraction must lie in (0, 1)");
    }
    if (!(divergence_threshold > 0.0)) throw ValidationError("divergence threshold must be positive");
    if (!(psd_shift >= 0.0)) throw ValidationError("psd shift must be non-negative");
    if (!(schur_cutoff >= 0.0 && schur_cutoff < 1.0)) throw ValidationError("Schur cutoff must lie in [0, 1)");
}

std::string to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::numerical_failure: return "numerical-failure";
    case SolveStatus::infeasible_detected: return "infeasible-detected";
    }
    return "unknown";
}

Eigen::VectorXd LmiForm::expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = fixed;
    for (std::size_t k = 0; k < free_vars.size(); ++k) {
        y(static_cast<Eigen::Index>(free_vars[k])) = x(static_cast<Eigen::Index>(k));
    }
    return y;
}

namespace {

LmiBlock compile_block(const SymbolicPsdBlock& block, const std::vector<Eigen::Index>& free_of,
                       const Eigen::VectorXd& fixed) {
    LmiBlock out;
    out.label = block.label();
    out.dim = block.dim();
    out.constant = Eigen::MatrixXd::Zero(out.dim, out.dim);
    for (int i = 0; i < out.dim; ++i) {
        for (int j = i; j < out.dim; ++j) {
            for (const auto& [v, c] : block.at(i, j).terms()) {
                const Eigen::Index k = free_of[v];
                if (k < 0) {
                    out.constant(i, j) += c * fixed(static_cast<Eigen::Index>(v));
                } else {
                    out.entries.push_back({k, i, j, c});
                }
            }
            out.constant(j, i) = out.constant(i, j);
        }
    }
    return out;
}

} // namespace

LmiForm compile_lmi(const SdpProblem& prob) {
    LmiForm lmi;
    const std::size_t m = prob.variable_count();
    std::vector<Eigen::Index> free_of(m, -1);
    lmi.fixed = prob.fixed_vector();
    for (std::size_t v = 0; v < m; ++v) {
        if (!prob.fixed_vars.count(v)) {
            free_of[v] = static_cast<Eigen::Index>(lmi.free_vars.size());
            lmi.free_vars.push_back(v);
        }
    }
    lmi.cost = Eigen::VectorXd::Zero(lmi.free_count());
    for (const auto& [v, c] : prob.objective.terms()) {
        if (v >= m) throw Error("objective references moment variable out of range");
        if (free_of[v] < 0) lmi.cost_constant += c * lmi.fixed(static_cast<Eigen::Index>(v));
        else lmi.cost(free_of[v]) += c;
    }
    for (const auto& b : prob.psd_blocks) lmi.psd.push_back(compile_block(b, free_of, lmi.fixed));
    for (const auto& b : prob.zero_blocks) lmi.zero.push_back(compile_block(b, free_of, lmi.fixed));
    return lmi;
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-block operator data for the interior-point iteration.
struct BlockOp {
    int dim = 0;
    MatrixXd constant;
    std::vector<LmiEntry> entries;                   // upper triangle
    std::vector<Index> vars;                         // distinct variables
    std::vector<std::vector<LmiEntry>> by_var;       // entries per vars[i]

    explicit BlockOp(const LmiBlock& b) : dim(b.dim), constant(b.constant), entries(b.entries) {
        std::vector<LmiEntry> sorted = entries;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const LmiEntry& a, const LmiEntry& c) { return a.var < c.var; });
        for (const auto& e : sorted) {
            if (vars.empty() || vars.back() != e.var) {
                vars.push_back(e.var);
                by_var.emplace_back();
            }
            by_var.back().push_back(e);
        }
    }

    // sum_k x_k F_k, without the constant.
    MatrixXd linear(const VectorXd& x) const {
        MatrixXd m = MatrixXd::Zero(dim, dim);
        for (const auto& e : entries) m(e.row, e.col) += e.value * x(e.var);
        for (int i = 0; i < dim; ++i) {
            for (int j = i + 1; j < dim; ++j) m(j, i) = m(i, j);
        }
        return m;
    }

    MatrixXd affine(const VectorXd& x) const { return constant + linear(x); }

    // Optional restriction to the range of an orthonormal basis V: the
    // iteration then sees V' B V in place of the block B.
    bool reduced = false;
    MatrixXd basis;

    int rdim() const { return reduced ? static_cast<int>(basis.cols()) : dim; }
    MatrixXd restrict(const MatrixXd& m) const {
        return reduced ? MatrixXd(basis.transpose() * m * basis) : m;
    }
    MatrixXd expand(const MatrixXd& m) const {
        return reduced ? MatrixXd(basis * m * basis.transpose()) : m;
    }
    MatrixXd affine_r(const VectorXd& x) const { return restrict(affine(x)); }
    MatrixXd linear_r(const VectorXd& dx) const { return restrict(linear(dx)); }
    MatrixXd constant_r() const { return restrict(constant); }
    void adjoint_r(const MatrixXd& m, VectorXd& g) const { adjoint(expand(m), g); }
    void add_schur_r(const MatrixXd& x, const MatrixXd& zinv, MatrixXd& s) const {
        add_schur(expand(x), expand(zinv), s);
    }

    // g_k += <F_k, M> for symmetric M.
    void adjoint(const MatrixXd& m, VectorXd& g) const {
        for (const auto& e : entries) {
            const double v = e.row == e.col ? m(e.row, e.row) : m(e.row, e.col) + m(e.col, e.row);
            g(e.var) += e.value * v;
        }
    }

    // S(k, l) += tr(F_k X F_l Zinv).
    void add_schur(const MatrixXd& x, const MatrixXd& zinv, MatrixXd& s) const {
        MatrixXd w(dim, dim);
        for (std::size_t li = 0; li < vars.size(); ++li) {
            w.setZero();
            for (const auto& e : by_var[li]) {
                w.noalias() += e.value * x.col(e.row) * zinv.row(e.col);
                if (e.row != e.col) w.noalias() += e.value * x.col(e.col) * zinv.row(e.row);
            }
            const Index l = vars[li];
            for (const auto& e : entries) {
                const double v = e.row == e.col ? w(e.row, e.row) : w(e.row, e.col) + w(e.col, e.row);
                s(e.var, l) += e.value * v;
            }
        }
    }
};

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// Largest alpha with m + alpha*dm PSD (m positive definite); +inf if unbounded.
double max_step(const MatrixXd& m, const MatrixXd& dm) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return 0.0;
    MatrixXd t = llt.matrixL().solve(dm);
    t = llt.matrixL().solve(t.transpose()).transpose();
    const double lmin = min_eigenvalue(sym(t));
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double frobenius(const std::vector<MatrixXd>& a) {
    double s = 0.0;
    for (const auto& m : a) s += m.squaredNorm();
    return std::sqrt(s);
}

// Nesterov-Todd scaling of a pair (X, Z): R' Z R = inv(R) X inv(R)' = diag(lambda).
struct NtScaling {
    MatrixXd r;
    MatrixXd rinv;
    VectorXd lambda;
};

bool nt_scaling(const MatrixXd& x, const MatrixXd& z, NtScaling& out) {
    Eigen::LLT<MatrixXd> lz(z);
    Eigen::LLT<MatrixXd> lx(x);
    if (lz.info() != Eigen::Success || lx.info() != Eigen::Success) return false;
    const MatrixXd Lz = lz.matrixL();
    const MatrixXd Lx = lx.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Lx, Eigen::ComputeFullU);
    out.lambda = svd.singularValues();
    if (out.lambda.size() > 0 && !(out.lambda.minCoeff() > 0.0)) return false;
    const VectorXd sq = out.lambda.cwiseSqrt();
    const MatrixXd& U = svd.matrixU();
    out.r = Lz.transpose().triangularView<Eigen::Upper>().solve(U) * sq.asDiagonal();
    out.rinv = sq.cwiseInverse().asDiagonal() * U.transpose() * Lz.transpose();
    return true;
}

// Affine parameterization x = x0 + N w of the equality-constrained variables.
struct EqualityReduction {
    VectorXd x0;
    MatrixXd basis;  // N, orthonormal columns
    bool identity = true;
    bool consistent = true;
};

EqualityReduction reduce_equalities(const LmiForm& lmi) {
    const Index m = lmi.free_count();
    EqualityReduction red;
    red.x0 = VectorXd::Zero(m);

    std::size_t rows = 0;
    for (const auto& b : lmi.zero) rows += static_cast<std::size_t>(b.dim) * (b.dim + 1) / 2;
    if (rows == 0) return red;

    MatrixXd a = MatrixXd::Zero(static_cast<Index>(rows), m);
    VectorXd rhs(static_cast<Index>(rows));
    Index r = 0;
    for (const auto& b : lmi.zero) {
        const Index first = r;
        std::vector<Index> row_of(static_cast<std::size_t>(b.dim) * b.dim, -1);
        for (int i = 0; i < b.dim; ++i) {
            for (int j = i; j < b.dim; ++j) {
                row_of[static_cast<std::size_t>(i) * b.dim + j] = r;
                rhs(r) = -b.constant(i, j);
                ++r;
            }
        }
        for (const auto& e : b.entries) {
            a(row_of[static_cast<std::size_t>(e.row) * b.dim + e.col], e.var) += e.value;
        }
        (void)first;
    }

    Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > 1e-10 * std::max(1.0, smax)) ++rank;
    }
    const MatrixXd& v = svd.matrixV();
    if (rank > 0) {
        VectorXd coef = svd.matrixU().leftCols(rank).transpose() * rhs;
        coef.array() /= sv.head(rank).array();
        red.x0 = v.leftCols(rank) * coef;
    }
    const double resid = (a * red.x0 - rhs).norm();
    red.consistent = resid <= 1e-8 * (1.0 + rhs.norm());
    red.basis = v.rightCols(m - rank);
    red.identity = false;
    return red;
}

// Restricts a block to the complement of the common kernel of every matrix
// it can take on the equality manifold. Vectors in that kernel are null
// vectors of the block at every feasible point, so dropping them leaves the
// feasible set unchanged and restores strict feasibility where the kernel was
// the only obstruction.
void reduce_face(BlockOp& block, const EqualityReduction& red, Index m) {
    const int d = block.dim;
    if (d == 0) return;
    const Index dirs = red.identity ? m : red.basis.cols();
    std::vector<Index> used;
    if (red.identity) {
        used = block.vars;
    } else {
        used.resize(static_cast<std::size_t>(dirs));
        for (Index j = 0; j < dirs; ++j) used[static_cast<std::size_t>(j)] = j;
    }
    MatrixXd stacked = MatrixXd::Zero(static_cast<Index>(used.size() + 1) * d, d);
    stacked.topRows(d) = block.affine(red.x0);
    for (std::size_t k = 0; k < used.size(); ++k) {
        auto f = stacked.middleRows(static_cast<Index>(k + 1) * d, d);
        for (const auto& e : block.entries) {
            const double w = red.identity ? (e.var == used[k] ? 1.0 : 0.0) : red.basis(e.var, used[k]);
            if (w == 0.0) continue;
            f(e.row, e.col) += w * e.value;
            if (e.row != e.col) f(e.col, e.row) += w * e.value;
        }
    }
    Eigen::BDCSVD<MatrixXd> svd(stacked, Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const double top = sv(0);
    Index rank = 0;
    while (rank < d && sv(rank) > 1e-9 * std::max(1.0, top)) ++rank;
    if (rank == d) return;
    block.reduced = true;
    block.basis = svd.matrixV().leftCols(rank);
}

} // namespace

SdpSolution solve(const SdpProblem& prob, const SolverSettings& settings) {
    settings.validate();
    LmiForm lmi = compile_lmi(prob);
    // Each psd block is divided by its largest coefficient; positive scaling
    // leaves the feasible set alone and evens out the dual multipliers.
    for (auto& b : lmi.psd) {
        double big = b.constant.cwiseAbs().maxCoeff();
        for (const auto& e : b.entries) big = std::max(big, std::abs(e.value));
        if (!(big > 0.0)) continue;
        b.constant /= big;
        for (auto& e : b.entries) e.value /= big;
    }
    const Index m = lmi.free_count();
    if (static_cast<std::size_t>(m) > settings.max_free_variables) {
        throw Error("SDP has " + std::to_string(m) + " free moment variables; the dense solver budget is " +
                    std::to_string(settings.max_free_variables) + " (export it for an external solver)");
    }

    SdpSolution sol;
    const EqualityReduction red = reduce_equalities(lmi);
    if (!red.consistent) {
        sol.status = SolveStatus::infeasible_detected;
        sol.message = "linear equality constraints are inconsistent";
        sol.y = lmi.expand(red.x0);
        return sol;
    }

    if (lmi.psd.empty()) {
        // Pure linear program over an affine set: bounded only if the cost is
        // orthogonal to the free directions.
        const VectorXd rd = red.identity ? lmi.cost : VectorXd(red.basis.transpose() * lmi.cost);
        sol.y = lmi.expand(red.x0);
        sol.objective = sol.dual_objective = lmi.cost.dot(red.x0) + lmi.cost_constant;
        sol.status = rd.norm() <= settings.feasibility_tolerance * (1.0 + lmi.cost.norm())
                         ? SolveStatus::optimal
                         : SolveStatus::infeasible_detected;
        if (sol.status != SolveStatus::optimal) sol.message = "objective is unbounded below";
        return sol;
    }

    std::vector<BlockOp> faces;
    faces.reserve(lmi.psd.size());
    for (const auto& b : lmi.psd) {
        faces.emplace_back(b);
        reduce_face(faces.back(), red, m);
        if (settings.verbose && faces.back().reduced) {
            std::cerr << "block " << b.label << ": " << b.dim << " -> " << faces.back().rdim() << "\n";
        }
        if (faces.back().rdim() == 0) faces.pop_back();
    }
    const std::size_t nb = faces.size();
    int n_total = 0;
    for (const auto& b : faces) n_total += b.rdim();

    // Objective normalized by its largest coefficient.
    const double scale = lmi.cost.size() > 0 && lmi.cost.cwiseAbs().maxCoeff() > 0.0
                             ? lmi.cost.cwiseAbs().maxCoeff()
                             : 1.0;
    const VectorXd c = lmi.cost / scale;
    const double c0 = lmi.cost_constant / scale;

    auto project = [&](const VectorXd& g) -> VectorXd {
        return red.identity ? g : VectorXd(red.basis.transpose() * g);
    };
    auto lift = [&](const VectorXd& dw) -> VectorXd {
        return red.identity ? dw : VectorXd(red.basis * dw);
    };

    struct Run {
        VectorXd x;
        SolveStatus status = SolveStatus::max_iterations;
        std::string message;
        int iterations = 0;
        double pobj = 0.0, dobj = 0.0, pinf = 0.0, dinf = 0.0, gap = 0.0;
        std::vector<IterateRecord> history;
    };
    // One interior-point run with every block relaxed to B >= -shift I.
    // With shift = 0 and a diverging dual residual the run gives up early
    // so the caller can retry shifted.
    auto run = [&](double shift) -> Run {
        Run out;
        std::vector<BlockOp> blocks = faces;
        // Starting point: x on the equality manifold, X and Z multiples of I.
        VectorXd x = red.x0;
        double norm_c_blocks = 0.0;
        double max_f = 0.0;
        {
            VectorXd fnorm2 = VectorXd::Zero(m);
            for (const auto& b : blocks) {
                norm_c_blocks += b.affine_r(x).squaredNorm();
                for (const auto& e : b.entries) {
                    fnorm2(e.var) += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
                }
            }
            norm_c_blocks = std::sqrt(norm_c_blocks);
            if (m > 0) max_f = std::sqrt(fnorm2.maxCoeff());
        }
        double xi = 10.0;
        double eta = std::max({10.0, norm_c_blocks, max_f});
        {
            double ratio = 0.0;
            for (Index k = 0; k < m; ++k) ratio = std::max(ratio, (1.0 + std::abs(c(k))) / (1.0 + max_f));
            xi = std::max(xi, std::sqrt(static_cast<double>(n_total)) * ratio);
        }
        // The iterates are carried as their scaling: X = R L R' and Z = inv(R)' L inv(R)
        // with L = diag(lambda). Updating R multiplicatively keeps every step at
        // the scale of lambda even when X and Z themselves are badly conditioned.
        std::vector<MatrixXd> Rs(nb), Rinv(nb), X(nb), Z(nb);
        std::vector<VectorXd> lam(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            const int d = blocks[b].rdim();
            lam[b] = VectorXd::Constant(d, std::sqrt(xi * eta));
            Rs[b] = std::pow(xi / eta, 0.25) * MatrixXd::Identity(d, d);
            Rinv[b] = std::pow(eta / xi, 0.25) * MatrixXd::Identity(d, d);
        }
        for (auto& op : blocks) {
            if (shift > 0.0) {
                op.constant += shift * (op.reduced ? MatrixXd(op.basis * op.basis.transpose())
                                                   : MatrixXd::Identity(op.dim, op.dim));
            }
        }
        double norm_const = 0.0;
        std::vector<MatrixXd> C(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            C[b] = blocks[b].constant_r();
            norm_const += C[b].squaredNorm();
        }
        norm_const = std::sqrt(norm_const);

        std::vector<MatrixXd> Rp(nb), dX(nb), dZ(nb), dXa(nb), dZa(nb);
        SolveStatus status = SolveStatus::max_iterations;
        std::string message;
        int iter = 0;
        double pobj = 0.0;
        double dobj = 0.0;
        double dobj_unshifted = 0.0;  // dual objective of the original blocks
        double pinf = 0.0;
        double dinf = 0.0;
        double gap = 0.0;
        int stalls = 0;
        int rising = 0;
        double min_dinf = std::numeric_limits<double>::infinity();
        struct Best {
            double merit = std::numeric_limits<double>::infinity();
            VectorXd x;
            double pobj = 0.0, dobj = 0.0, dobj_unshifted = 0.0, pinf = 0.0, dinf = 0.0, gap = 0.0;
        } best;

        for (iter = 0;; ++iter) {
            std::vector<MatrixXd> rps(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                const MatrixXd L = lam[b].asDiagonal();
                X[b] = sym(Rs[b] * L * Rs[b].transpose());
                Z[b] = sym(Rinv[b].transpose() * L * Rinv[b]);
                const MatrixXd a = blocks[b].affine_r(x);
                Rp[b] = a - Z[b];
                rps[b] = sym(Rs[b].transpose() * a * Rs[b]) - L;
            }
            VectorXd atx = VectorXd::Zero(m);
            for (std::size_t b = 0; b < nb; ++b) blocks[b].adjoint_r(X[b], atx);
            const VectorXd r = c - atx;
            const VectorXd rd = project(r);

            double cx = 0.0;
            for (std::size_t b = 0; b < nb; ++b) cx += C[b].cwiseProduct(X[b]).sum();
            pobj = c.dot(x) + c0;
            dobj = -cx + (red.identity ? 0.0 : r.dot(red.x0)) + c0;
            dobj_unshifted = dobj;
            for (const auto& xb : X) dobj_unshifted += shift * xb.trace();
            pinf = frobenius(Rp) / (1.0 + norm_const);
            dinf = rd.norm() / (1.0 + c.norm());
            gap = std::abs(pobj - dobj) / std::max(1.0, 0.5 * (std::abs(pobj) + std::abs(dobj)));
            double mu = 0.0;
            for (const auto& l : lam) mu += l.squaredNorm();
            if (n_total > 0) mu /= n_total;
            out.history.push_back({iter, pobj * scale, dobj_unshifted * scale, pinf, dinf, mu});
            const double merit = std::max({gap / settings.gap_tolerance, pinf / settings.feasibility_tolerance,
                                           dinf / settings.feasibility_tolerance});
            if (merit < best.merit) best = {merit, x, pobj, dobj, dobj_unshifted, pinf, dinf, gap};
            if (settings.verbose) {
                std::cerr << "iter " << iter << " pobj " << pobj * scale << " dobj " << dobj * scale
                          << " pinf " << pinf << " dinf " << dinf << " mu " << mu << "\n";
            }

            if (gap <= settings.gap_tolerance && pinf <= settings.feasibility_tolerance &&
                dinf <= settings.feasibility_tolerance) {
                status = SolveStatus::optimal;
                break;
            }
            double xmax = 0.0;
            for (const auto& xb : X) xmax = std::max(xmax, xb.cwiseAbs().maxCoeff());
            if (dinf <= std::sqrt(settings.feasibility_tolerance) &&
                (dobj > settings.divergence_threshold || xmax > settings.divergence_threshold)) {
                status = SolveStatus::infeasible_detected;
                message = "dual iterates diverge; the LMI appears infeasible";
                break;
            }
            if (x.size() > 0 && x.cwiseAbs().maxCoeff() > settings.divergence_threshold) {
                status = SolveStatus::infeasible_detected;
                message = "primal iterates diverge; the dual appears infeasible";
                break;
            }
            min_dinf = std::min(min_dinf, dinf);
            rising = dinf > std::max(settings.feasibility_tolerance, 100.0 * min_dinf) ? rising + 1 : 0;
            if (shift == 0.0 && settings.psd_shift > 0.0 && rising >= 3) {
                status = SolveStatus::numerical_failure;
                message = "dual residual diverging";
                break;
            }
            if (iter >= settings.max_iterations) {
                status = SolveStatus::max_iterations;
                message = "iteration limit reached";
                break;
            }

            // The Schur matrix is G'G with G stacking svec(P' F_k P), P = V R.
            // Factoring G by QR keeps the conditioning of G rather than its square.
            Index grows = 0;
            for (const auto& l : lam) grows += l.size() * (l.size() + 1) / 2;
            MatrixXd G = MatrixXd::Zero(grows, m);
            {
                Index off = 0;
                const double rt2 = std::sqrt(2.0);
                for (std::size_t b = 0; b < nb; ++b) {
                    const MatrixXd P = blocks[b].reduced ? MatrixXd(blocks[b].basis * Rs[b]) : Rs[b];
                    const Index r = P.cols();
                    MatrixXd fk(r, r);
                    for (std::size_t li = 0; li < blocks[b].vars.size(); ++li) {
                        fk.setZero();
                        for (const auto& e : blocks[b].by_var[li]) {
                            fk.noalias() += e.value * P.row(e.row).transpose() * P.row(e.col);
                            if (e.row != e.col) fk.noalias() += e.value * P.row(e.col).transpose() * P.row(e.row);
                        }
                        auto col = G.col(blocks[b].vars[li]);
                        Index q = off;
                        for (Index j = 0; j < r; ++j) {
                            col(q++) += fk(j, j);
                            for (Index i = j + 1; i < r; ++i) col(q++) += rt2 * 0.5 * (fk(i, j) + fk(j, i));
                        }
                    }
                    off += r * (r + 1) / 2;
                }
            }
            const MatrixXd Gw = red.identity ? G : MatrixXd(G * red.basis);
            const Index nw = Gw.cols();
            // more directions than block entries: zero rows make R square, and
            // the missing rank shows up on its diagonal
            const Index qrows = std::max(grows, nw);
            MatrixXd Gq = MatrixXd::Zero(qrows, nw);
            Gq.topRows(grows) = Gw;
            Eigen::HouseholderQR<MatrixXd> qr(Gq);
            const MatrixXd Rq = qr.matrixQR().topRows(nw).triangularView<Eigen::Upper>();
            // The triangular factor is used directly while its diagonal looks
            // healthy; otherwise its SVD drops the directions below the cutoff.
            const VectorXd rdiag = Rq.diagonal().cwiseAbs();
            const bool truncate = nw > 0 && rdiag.minCoeff() <= std::sqrt(settings.schur_cutoff) * rdiag.maxCoeff();
            Eigen::BDCSVD<MatrixXd> rsvd;
            Index keep = nw;
            if (truncate) {
                rsvd.compute(Rq, Eigen::ComputeFullU | Eigen::ComputeFullV);
                const VectorXd& sig = rsvd.singularValues();
                keep = 0;
                while (keep < nw && sig(keep) > settings.schur_cutoff * sig(0)) ++keep;
                if (keep == 0) {
                    status = SolveStatus::numerical_failure;
                    message = "Schur complement is singular";
                    break;
                }
            }
            // Solves G'(v - G dw) = rd over the numerically nonsingular directions of G.
            auto ls_solve = [&](const VectorXd& v, const VectorXd& rhs_d) -> VectorXd {
                VectorXd vq = VectorXd::Zero(qrows);
                vq.head(grows) = v;
                const VectorXd qv = (qr.householderQ().transpose() * vq).head(nw);
                if (!truncate) {
                    const VectorXd t = qv - Rq.transpose().triangularView<Eigen::Lower>().solve(rhs_d);
                    return Rq.triangularView<Eigen::Upper>().solve(t);
                }
                const VectorXd sk = rsvd.singularValues().head(keep);
                const VectorXd a = rsvd.matrixU().leftCols(keep).transpose() * qv;
                const VectorXd e = rsvd.matrixV().leftCols(keep).transpose() * rhs_d;
                const VectorXd coef = ((a.array() - e.array() / sk.array()) / sk.array()).matrix();
                return rsvd.matrixV().leftCols(keep) * coef;
            };

            auto svec = [&](const std::vector<MatrixXd>& ms) {
                VectorXd v(grows);
                Index q = 0;
                for (const auto& mb : ms) {
                    for (Index j = 0; j < mb.cols(); ++j) {
                        v(q++) = mb(j, j);
                        for (Index i = j + 1; i < mb.rows(); ++i) v(q++) = std::sqrt(2.0) * 0.5 * (mb(i, j) + mb(j, i));
                    }
                }
                return v;
            };
            auto smat = [&](const VectorXd& v) {
                std::vector<MatrixXd> ms(nb);
                Index q = 0;
                for (std::size_t b = 0; b < nb; ++b) {
                    const Index r = lam[b].size();
                    ms[b].resize(r, r);
                    for (Index j = 0; j < r; ++j) {
                        ms[b](j, j) = v(q++);
                        for (Index i = j + 1; i < r; ++i) ms[b](i, j) = ms[b](j, i) = v(q++) / std::sqrt(2.0);
                    }
                }
                return ms;
            };
            const VectorXd rp_s = svec(rps);

            // Search direction for target sigma*mu; corr is the scaled
            // second-order term, or null for the affine predictor. Everything is
            // solved in the scaled space, where both iterates equal diag(lambda);
            // unscaled directions are formed only at the end.
            auto direction = [&](double target, const std::vector<MatrixXd>* corr, VectorXd& dx,
                                 std::vector<MatrixXd>& dXt, std::vector<MatrixXd>& dZt) {
                std::vector<MatrixXd> tb(nb);
                for (std::size_t b = 0; b < nb; ++b) {
                    const Index d = lam[b].size();
                    MatrixXd rhs = MatrixXd::Zero(d, d);
                    rhs.diagonal() = (target - lam[b].array().square()).matrix();
                    if (corr) rhs -= (*corr)[b];
                    tb[b].resize(d, d);
                    for (Index i = 0; i < d; ++i) {
                        for (Index j = 0; j < d; ++j) tb[b](i, j) = 2.0 * rhs(i, j) / (lam[b](i) + lam[b](j));
                    }
                }
                // dX~ = v - G dw with G'(v - G dw) = rd.
                const VectorXd v = svec(tb) - rp_s;
                VectorXd dw = ls_solve(v, rd);
                dw += ls_solve(v - Gw * dw, rd);
                dx = lift(dw);
                const VectorXd gdw = Gw * dw;
                dXt = smat(v - gdw);
                dZt = smat(rp_s + gdw);
            };
            auto steps = [&](const std::vector<MatrixXd>& dXs, const std::vector<MatrixXd>& dZs) {
                double ap = std::numeric_limits<double>::infinity();
                double ad = std::numeric_limits<double>::infinity();
                for (std::size_t b = 0; b < nb; ++b) {
                    const MatrixXd diag = lam[b].asDiagonal();
                    ap = std::min(ap, max_step(diag, dZs[b]));
                    ad = std::min(ad, max_step(diag, dXs[b]));
                }
                return std::pair{ap, ad};
            };

            VectorXd dx(m);
            double sigma_mu = 0.0;
            const std::vector<MatrixXd>* corr = nullptr;
            std::vector<MatrixXd> corr_terms(nb);
            if (settings.predictor_corrector) {
                VectorXd dxa(m);
                direction(0.0, nullptr, dxa, dXa, dZa);
                auto [apa, ada] = steps(dXa, dZa);
                apa = std::min(1.0, apa);
                ada = std::min(1.0, ada);
                double mu_aff = 0.0;
                for (std::size_t b = 0; b < nb; ++b) {
                    const MatrixXd diag = lam[b].asDiagonal();
                    mu_aff += (diag + ada * dXa[b]).cwiseProduct(diag + apa * dZa[b]).sum();
                }
                mu_aff /= n_total;
                const double ratio = std::clamp(mu_aff / mu, 0.0, 1.0);
                sigma_mu = ratio * ratio * ratio * mu;
                for (std::size_t b = 0; b < nb; ++b) corr_terms[b] = sym(dZa[b] * dXa[b]);
                corr = &corr_terms;
            } else {
                sigma_mu = 0.1 * mu;
            }
            direction(sigma_mu, corr, dx, dX, dZ);
            auto [ap, ad] = steps(dX, dZ);
            ap = std::min(1.0, settings.step_fraction * ap);
            ad = std::min(1.0, settings.step_fraction * ad);

            if (!std::isfinite(ap) || !std::isfinite(ad) || !dx.allFinite()) {
                status = SolveStatus::numerical_failure;
                message = "non-finite search direction";
                break;
            }
            stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
            if (stalls >= 3) {
                status = SolveStatus::numerical_failure;
                message = "step lengths collapsed";
                break;
            }
            x += ap * dx;
            bool scaled_ok = true;
            for (std::size_t b = 0; b < nb && scaled_ok; ++b) {
                const MatrixXd L = lam[b].asDiagonal();
                NtScaling inc;
                scaled_ok = nt_scaling(sym(L + ad * dX[b]), sym(L + ap * dZ[b]), inc);
                if (!scaled_ok) break;
                Rs[b] = Rs[b] * inc.r;
                Rinv[b] = inc.rinv * Rinv[b];
                lam[b] = inc.lambda;
            }
            if (!scaled_ok) {
                status = SolveStatus::numerical_failure;
                message = "iterates lost positive definiteness";
                break;
            }
        }

        if (status != SolveStatus::optimal && status != SolveStatus::infeasible_detected &&
            best.x.size() == x.size()) {
            x = best.x;
            pobj = best.pobj;
            dobj = best.dobj;
            dobj_unshifted = best.dobj_unshifted;
            pinf = best.pinf;
            dinf = best.dinf;
            gap = best.gap;
        }
        out.x = x;
        out.status = status;
        out.message = message;
        out.iterations = iter;
        out.pobj = pobj;
        out.dobj = dobj_unshifted;
        out.pinf = pinf;
        out.dinf = dinf;
        out.gap = gap;
        return out;
    };

    Run res = run(0.0);
    // The shifted problem is looser by about shift * tr(dual), so the
    // smaller shift goes first.
    for (double shift : {0.01 * settings.psd_shift, settings.psd_shift}) {
        if (!(shift > 0.0) ||
            (res.status != SolveStatus::numerical_failure && res.status != SolveStatus::max_iterations)) {
            break;
        }
        if (settings.verbose) std::cerr << "retrying with psd shift " << shift << "\n";
        Run shifted = run(shift);
        shifted.iterations += res.iterations;
        if (shifted.status == SolveStatus::optimal) shifted.message = "solved with psd shift";
        res = std::move(shifted);
    }
    sol.status = res.status;
    sol.message = res.message;
    sol.iterations = res.iterations;
    sol.y = lmi.expand(res.x);
    sol.objective = res.pobj * scale;
    sol.dual_objective = res.dobj * scale;
    sol.gap = res.gap;
    sol.primal_infeasibility = res.pinf;
    sol.dual_infeasibility = res.dinf;
    sol.history = std::move(res.history);
    for (const auto& b : prob.psd_blocks) sol.block_min_eigenvalues.push_back(min_eigenvalue(b.evaluate(sol.y)));
    return sol;
}

double ResidualReport::worst_psd() const {
    double w = std::numeric_limits<double>::infinity();
    for (double v : psd_min_eigenvalues) w = std::min(w, v);
    return w;
}

double ResidualReport::worst_zero() const {
    double w = 0.0;
    for (double v : zero_max_abs) w = std::max(w, v);
    return w;
}

ResidualReport residuals(const SdpProblem& prob, const Eigen::VectorXd& y) {
    ResidualReport rep;
    for (const auto& b : prob.psd_blocks) {
        rep.psd_labels.push_back(b.label());
        rep.psd_min_eigenvalues.push_back(min_eigenvalue(b.evaluate(y)));
    }
    for (const auto& b : prob.zero_blocks) {
        rep.zero_labels.push_back(b.label());
        const MatrixXd v = b.evaluate(y);
        rep.zero_max_abs.push_back(v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    }
    rep.objective = prob.objective.evaluate(y);
    return rep;
}

ResidualReport residuals(const SdpProblem& prob, const SdpSolution& sol) {
    return residuals(prob, sol.y);
}

} // namespace mopf
