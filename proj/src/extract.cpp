#include "mopf/extract.hpp"

#include "mopf/error.hpp"

#include <chrono>
#include <cmath>

namespace mopf {

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::globally_optimal: return "globally-optimal";
    case Verdict::inexact_lower_bound: return "inexact-lower-bound";
    case Verdict::multiple_optima_suspected: return "multiple-optima-suspected";
    }
    return "unknown";
}

Eigen::VectorXd extract_candidate(const Eigen::VectorXd& y, const MomentIndex& idx) {
    const double y0 = y(0) != 0.0 ? y(0) : 1.0;
    Eigen::VectorXd x(idx.nvars());
    for (int i = 0; i < idx.nvars(); ++i) {
        x(i) = y(static_cast<Eigen::Index>(idx.linear_position(i))) / y0;
    }
    return x;
}

Eigen::VectorXd extract_candidate(const SdpSolution& sol, const MomentIndex& idx) {
    return extract_candidate(sol.y, idx);
}

RelaxationEvidence moment_evidence(const SdpProblem& prob, const SdpSolution& sol,
                                   double rank_tol) {
    RelaxationEvidence ev;
    ev.bound = sol.objective;
    for (const auto& block : prob.psd_blocks) {
        if (block.label() != "moment") continue;
        const Eigen::MatrixXd m = block.evaluate(sol.y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        ev.spectrum = es.eigenvalues();
        ev.rank = numerical_rank(m, rank_tol);
    }
    return ev;
}

ExactnessReport certify(const PolynomialProgram& pp, const Eigen::VectorXd& candidate,
                        const RelaxationEvidence& evidence, const Thresholds& thresholds) {
    ExactnessReport rep;
    rep.rank = evidence.rank;
    rep.spectrum = evidence.spectrum;
    rep.candidate = candidate;
    pp.vars.unpack(candidate, rep.vd, rep.vq);
    for (const auto& c : pp.constraints) {
        const double viol = std::max(0.0, -c.slack(c.poly.evaluate(candidate)));
        auto [it, inserted] = rep.worst_violation.emplace(c.kind, viol);
        if (!inserted) it->second = std::max(it->second, viol);
        rep.max_violation = std::max(rep.max_violation, viol);
    }
    rep.candidate_cost = pp.objective.evaluate(candidate);
    rep.bound = evidence.bound;
    rep.gap = (rep.candidate_cost - rep.bound) / std::max(1.0, std::abs(rep.bound));

    const bool gap_ok = rep.gap <= thresholds.gap;
    const bool feasible = rep.max_violation <= thresholds.feasibility;
    if (gap_ok && feasible && rep.rank <= 1) {
        rep.verdict = Verdict::globally_optimal;
    } else if (std::abs(rep.gap) <= thresholds.gap && rep.rank > 1) {
        rep.verdict = Verdict::multiple_optima_suspected;
    } else {
        rep.verdict = Verdict::inexact_lower_bound;
    }
    return rep;
}

ExactnessReport certify(const Network& net, const Eigen::VectorXd& candidate,
                        const RelaxationEvidence& evidence, const Thresholds& thresholds,
                        const OpfOptions& options) {
    return certify(assemble_opf(net, options), candidate, evidence, thresholds);
}

OrderResult solve_order(const PolynomialProgram& pp, int order, const SolverSettings& settings,
                        const Thresholds& thresholds) {
    using clock = std::chrono::steady_clock;
    OrderResult res;
    res.order = order;
    const auto t0 = clock::now();
    const SdpProblem prob = assemble_relaxation(pp, order);
    res.moment_dim = prob.psd_blocks.front().dim();
    res.variable_count = prob.variable_count();
    const auto t1 = clock::now();
    res.assemble_seconds = std::chrono::duration<double>(t1 - t0).count();

    const SdpSolution sol = solve(prob, settings);
    res.solve_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    res.status = sol.status;
    res.iterations = sol.iterations;
    res.solver_gap = sol.gap;
    res.bound = sol.objective;
    if (sol.status == SolveStatus::infeasible_detected) {
        res.error = sol.message.empty() ? "relaxation infeasible" : sol.message;
        return res;
    }
    res.solved = true;
    const RelaxationEvidence ev = moment_evidence(prob, sol, thresholds.rank_tol);
    res.report = certify(pp, extract_candidate(sol, prob.index), ev, thresholds);
    if (sol.status != SolveStatus::optimal) {
        // Without a converged solve the bound is not trustworthy.
        res.error = "solver stopped with status " + to_string(sol.status) + ": " + sol.message;
        res.report.verdict = Verdict::inexact_lower_bound;
    }
    return res;
}

HierarchyResult solve_hierarchy(const PolynomialProgram& pp, int max_order,
                                const HierarchyOptions& options) {
    HierarchyResult out;
    const int start = minimum_order(pp);
    if (max_order < start) {
        throw OrderTooLowError("maximum order " + std::to_string(max_order) +
                               " is below the minimum admissible order " + std::to_string(start));
    }
    for (int order = start; order <= max_order; ++order) {
        OrderResult r;
        try {
            r = solve_order(pp, order, options.solver, options.thresholds);
        } catch (const Error& e) {
            r.order = order;
            r.error = e.what();
        }
        if (r.solved && r.status == SolveStatus::optimal) {
            if (!out.best_bound || r.bound > *out.best_bound) out.best_bound = r.bound;
        }
        const bool exact = r.solved && r.report.verdict == Verdict::globally_optimal;
        if (r.solved) out.verdict = r.report.verdict;
        out.orders.push_back(std::move(r));
        if (exact) {
            out.verdict = Verdict::globally_optimal;
            out.gamma_min = order;
            break;
        }
    }
    if (!out.gamma_min && out.verdict == Verdict::globally_optimal) {
        out.verdict = Verdict::inexact_lower_bound;
    }
    return out;
}

HierarchyResult solve_hierarchy(const Network& net, int max_order, const HierarchyOptions& options) {
    return solve_hierarchy(assemble_opf(net, options.opf), max_order, options);
}

} // namespace mopf
