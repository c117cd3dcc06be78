// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "mopf/extract.hpp"
#include "mopf/moment.hpp"
#include "mopf/sdp.hpp"

#include "oracle.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

using namespace mopf;

namespace {

// Tolerances and budgets.
constexpr int kLiftPoints = 500;
constexpr double kLiftEig = 1e-9;
constexpr double kLiftZero = 1e-9;
constexpr double kLiftCostRel = 1e-9;
constexpr double kLiftSeconds = 30;

constexpr int kGridSteps = 201;
constexpr double kOracleCostRel = 1e-4;
constexpr double kOracleVoltage = 1e-3;
constexpr double kWb2Seconds = 10;

constexpr double kLowOrderMargin = 1e-4;
constexpr double kExactGap = 1e-5;
constexpr double kGridTol = 0.02;  // per-unit mismatch admitted on the 201^3 grid
constexpr double kTightSeconds = 20;

constexpr int kMonotoneCases = 20;
constexpr double kMonotoneTol = 1e-6;
constexpr double kMonotoneSeconds = 300;

constexpr int kOrderRuleCases = 200;

constexpr double kSignCostTol = 1e-5;
constexpr double kSignSeconds = 10;

constexpr int kPlanted = 200;
constexpr double kPlantedTol = 1e-6;
constexpr double kMinT = 1e-8;
constexpr double kSolverSeconds = 120;

constexpr int kRoundTrips = 20;

constexpr double kCase5Seconds = 60;

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

oracle::CaseFeatures random_features(std::mt19937& rng) {
    std::bernoulli_distribution coin(0.5);
    return {coin(rng), coin(rng), coin(rng)};
}

// 1 ------------------------------------------------------------------------
Outcome lifting_soundness() {
    const auto t0 = clock_type::now();
    std::mt19937 rng(1001);
    double worst_eig = 0.0, worst_zero = 0.0, worst_cost = 0.0;
    int blocks = 0;
    for (int i = 0; i < kLiftPoints; ++i) {
        const auto rc = oracle::random_case(rng, 2 + i % 3, random_features(rng));
        const PolynomialProgram pp = assemble_opf(rc.net);
        const Eigen::VectorXd x = pp.vars.pack(rc.vd, rc.vq);
        const SdpProblem prob = assemble_relaxation(pp, std::max(2, minimum_order(pp)));
        const Eigen::VectorXd y = lift_point(x, prob.index);
        for (const auto& b : prob.psd_blocks) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.evaluate(y), Eigen::EigenvaluesOnly);
            worst_eig = std::min(worst_eig, es.eigenvalues().minCoeff());
            ++blocks;
        }
        for (const auto& b : prob.zero_blocks) {
            worst_zero = std::max(worst_zero, b.evaluate(y).cwiseAbs().maxCoeff());
            ++blocks;
        }
        const double c = oracle::cost(rc.net, oracle::phasors(rc.vd, rc.vq));
        worst_cost = std::max(worst_cost, std::abs(prob.objective.evaluate(y) - c) / std::max(1.0, std::abs(c)));
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = worst_eig >= -kLiftEig && worst_zero <= kLiftZero && worst_cost <= kLiftCostRel && t < kLiftSeconds;
    o.detail = std::to_string(kLiftPoints) + " points, " + std::to_string(blocks) + " blocks; min eig " +
               fmt("%.2e", worst_eig) + ", max zero-block " + fmt("%.2e", worst_zero) + ", cost rel err " +
               fmt("%.2e", worst_cost) + ", " + fmt("%.1f s", t);
    return o;
}

// 2 ------------------------------------------------------------------------
Outcome wb2_oracle() {
    const auto t0 = clock_type::now();
    const Network net = load_case(case_path("wb2.json"));
    const auto grid = oracle::two_bus_grid(net, kGridSteps, kGridTol);
    const auto opt = oracle::two_bus_optimum(net);
    const double t_oracle = seconds_since(t0);
    const auto t1 = clock_type::now();
    const PolynomialProgram pp = assemble_opf(net);
    const OrderResult r = solve_order(pp, 2);
    const double t = seconds_since(t1);
    Outcome o;
    if (!opt.ok || !r.solved) {
        o.detail = "oracle or solve failed: " + r.error;
        return o;
    }
    const double rel = std::abs(r.bound - opt.cost) / std::abs(opt.cost);
    const Eigen::Vector3d ref(opt.vd1, opt.vd2, opt.vq2);
    const double dv = (r.report.candidate - ref).cwiseAbs().maxCoeff();
    o.pass = rel <= kOracleCostRel && r.report.verdict == Verdict::globally_optimal && dv <= kOracleVoltage &&
             t < kWb2Seconds;
    o.detail = "oracle " + fmt("%.6f", opt.cost) + " (grid best " + fmt("%.4f", grid.best.cost) + "), bound " +
               fmt("%.6f", r.bound) + ", rel " + fmt("%.1e", rel) + ", |dV| " + fmt("%.1e", dv) + ", " +
               to_string(r.report.verdict) + ", solve " + fmt("%.2f s", t) + ", oracle " + fmt("%.1f s", t_oracle);
    return o;
}

// 3 ------------------------------------------------------------------------
// The two-bus feasible set is two curve segments at the original limit.
// Tightening the bus 2 upper limit cuts one of them away, and the first
// order relaxation stops being exact.
Outcome nonconvex_regime() {
    const auto t0 = clock_type::now();
    const Network loose = load_case(case_path("wb2.json"));
    const Network net = load_case(case_path("wb2_tight.json"));
    const int pieces_loose = oracle::two_bus_pieces(loose);
    const int pieces = oracle::two_bus_pieces(net);
    const auto opt = oracle::two_bus_optimum(net);
    const double t_oracle = seconds_since(t0);
    const auto t1 = clock_type::now();
    const PolynomialProgram pp = assemble_opf(net);
    const OrderResult r1 = solve_order(pp, 1);
    const OrderResult r2 = solve_order(pp, 2);
    const double t = seconds_since(t1);
    Outcome o;
    if (!opt.ok || !r1.solved || !r2.solved) {
        o.detail = "oracle or solve failed";
        return o;
    }
    const bool split = pieces_loose >= 2 && pieces < pieces_loose;
    const bool low = r1.bound < opt.cost - kLowOrderMargin;
    const bool exact = r2.report.verdict == Verdict::globally_optimal && std::abs(r2.report.gap) <= kExactGap &&
                       std::abs(r2.bound - opt.cost) <= kOracleCostRel * std::abs(opt.cost);
    o.pass = split && low && exact && t < kTightSeconds;
    o.detail = "pieces " + std::to_string(pieces_loose) + " at V2max " + fmt("%.2f", loose.buses()[1].v_max) +
               ", " + std::to_string(pieces) + " at " + fmt("%.2f", net.buses()[1].v_max) + ", oracle " +
               fmt("%.6f", opt.cost) + ", bound(1) " + fmt("%.6f", r1.bound) + ", bound(2) " +
               fmt("%.6f", r2.bound) + ", gap(2) " + fmt("%.1e", r2.report.gap) + ", " +
               to_string(r2.report.verdict) + ", solve " + fmt("%.2f s", t) + ", oracle " + fmt("%.1f s", t_oracle);
    return o;
}

// 4 ------------------------------------------------------------------------
Outcome monotonicity() {
    const auto t0 = clock_type::now();
    std::mt19937 rng(4004);
    int violations = 0, failures = 0, solves = 0;
    double worst = 0.0;
    for (int i = 0; i < kMonotoneCases; ++i) {
        const auto rc = oracle::random_case(rng, 2 + i % 2, random_features(rng));
        const PolynomialProgram pp = assemble_opf(rc.net);
        double prev = -kInf;
        for (int g = minimum_order(pp); g <= 3; ++g) {
            const OrderResult r = solve_order(pp, g);
            ++solves;
            if (!r.solved || r.status != SolveStatus::optimal) {
                ++failures;
                std::printf("  case %d order %d: %s\n", i, g, r.error.c_str());
                continue;
            }
            if (prev > -kInf) {
                const double drop = (prev - r.bound) / (1.0 + std::abs(r.bound));
                worst = std::max(worst, drop);
                if (drop > kMonotoneTol) ++violations;
            }
            prev = r.bound;
        }
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = violations == 0 && failures == 0 && t < kMonotoneSeconds;
    o.detail = std::to_string(kMonotoneCases) + " cases, " + std::to_string(solves) + " solves, " +
               std::to_string(failures) + " unsolved, " + std::to_string(violations) + " decreases, worst drop " +
               fmt("%.1e", worst) + ", " + fmt("%.1f s", t);
    return o;
}

// 5 ------------------------------------------------------------------------
Outcome minimum_order_rule() {
    std::mt19937 rng(5005);
    int wrong = 0, rejected = 0, accepted = 0;
    for (int i = 0; i < kOrderRuleCases; ++i) {
        const auto f = random_features(rng);
        const auto rc = oracle::random_case(rng, 2 + i % 3, f);
        const PolynomialProgram pp = assemble_opf(rc.net);
        const bool needs_two = f.quadratic_cost || f.flow_limits;
        try {
            assemble_relaxation(pp, 1);
            ++accepted;
            if (needs_two) ++wrong;
        } catch (const OrderTooLowError&) {
            ++rejected;
            if (!needs_two) ++wrong;
        }
        if (minimum_order(pp) != (needs_two ? 2 : 1)) ++wrong;
    }
    Outcome o;
    o.pass = wrong == 0 && rejected > 0 && accepted > 0;
    o.detail = std::to_string(kOrderRuleCases) + " cases, " + std::to_string(rejected) + " rejected at order 1, " +
               std::to_string(accepted) + " accepted, " + std::to_string(wrong) + " mismatches";
    return o;
}

// 6 ------------------------------------------------------------------------
Outcome sign_pattern() {
    const auto t0 = clock_type::now();
    const Network net = load_case(case_path("lln3.json"));
    const auto en = oracle::sign_enumeration(net);
    const OrderResult r = solve_order(assemble_opf(net), 2);
    const double t = seconds_since(t0);
    Outcome o;
    if (!en.ok || !r.solved) {
        o.detail = "enumeration or solve failed";
        return o;
    }
    const double err = std::abs(r.bound - en.cost) / std::max(1.0, std::abs(en.cost));
    o.pass = err <= kSignCostTol && r.report.verdict == Verdict::globally_optimal && t < kSignSeconds;
    std::string signs;
    for (int s : en.signs) signs += s > 0 ? '+' : '-';
    o.detail = "enumeration " + fmt("%.6f", en.cost) + " (" + signs + "), bound " + fmt("%.6f", r.bound) +
               ", rel " + fmt("%.1e", err) + ", " + to_string(r.report.verdict) + ", " + fmt("%.2f s", t);
    return o;
}

// 7 ------------------------------------------------------------------------
LinearExpr parse_literal(const std::string& text, const MomentIndex& idx) {
    // terms like "y_020", "+ y_002", "- 0.9y_000"
    LinearExpr e;
    std::istringstream in(text);
    std::string tok;
    double sign = 1.0;
    while (in >> tok) {
        if (tok == "+") {
            sign = 1.0;
            continue;
        }
        if (tok == "-") {
            sign = -1.0;
            continue;
        }
        const auto at = tok.find("y_");
        const double coef = at == 0 ? 1.0 : std::stod(tok.substr(0, at));
        Exponent ex;
        for (char ch : tok.substr(at + 2)) ex.push_back(ch - '0');
        e.add(idx.position(ex), sign * coef);
        sign = 1.0;
    }
    return e;
}

Outcome moment_structure() {
    static const char* layout[10][10] = {
        {"000", "100", "010", "001", "200", "110", "101", "020", "011", "002"},
        {"100", "200", "110", "101", "300", "210", "201", "120", "111", "102"},
        {"010", "110", "020", "011", "210", "120", "111", "030", "021", "012"},
        {"001", "101", "011", "002", "201", "111", "102", "021", "012", "003"},
        {"200", "300", "210", "201", "400", "310", "301", "220", "211", "202"},
        {"110", "210", "120", "111", "310", "220", "211", "130", "121", "112"},
        {"101", "201", "111", "102", "301", "211", "202", "121", "112", "103"},
        {"020", "120", "030", "021", "220", "130", "121", "040", "031", "022"},
        {"011", "111", "021", "012", "211", "121", "112", "031", "022", "013"},
        {"002", "102", "012", "003", "202", "112", "103", "022", "013", "004"}};
    static const char* localizing[4][4] = {
        {"y_020 + y_002 - 0.9y_000", "y_120 + y_102 - 0.9y_100", "y_030 + y_012 - 0.9y_010",
         "y_021 + y_003 - 0.9y_001"},
        {"y_120 + y_102 - 0.9y_100", "y_220 + y_202 - 0.9y_200", "y_130 + y_112 - 0.9y_110",
         "y_121 + y_103 - 0.9y_101"},
        {"y_030 + y_012 - 0.9y_010", "y_130 + y_112 - 0.9y_110", "y_040 + y_022 - 0.9y_020",
         "y_031 + y_013 - 0.9y_011"},
        {"y_021 + y_003 - 0.9y_001", "y_121 + y_103 - 0.9y_101", "y_031 + y_013 - 0.9y_011",
         "y_022 + y_004 - 0.9y_002"}};

    const MomentIndex idx(3, 4);
    const SymbolicPsdBlock m = build_moment_matrix(monomial_basis(3, 2), idx);
    int checked = 0, bad = 0;
    for (int i = 0; i < 10; ++i) {
        for (int j = i; j < 10; ++j) {
            ++checked;
            const LinearExpr& e = m.at(i, j);
            const bool ok = e.size() == 1 && e.terms().begin()->second == 1.0 &&
                            moment_label(idx.exponent(e.terms().begin()->first)) == std::string("y_") + layout[i][j];
            if (!ok) ++bad;
        }
    }
    // f_V2 - 0.9 in (Vd1, Vd2, Vq2)
    const Polynomial vd2 = Polynomial::variable(3, 1), vq2 = Polynomial::variable(3, 2);
    const Polynomial f = vd2 * vd2 + vq2 * vq2 - 0.9;
    const SymbolicPsdBlock l = build_localizing_matrix(f, 2, idx);
    int lchecked = 0, lbad = 0;
    if (l.dim() != 4) {
        lbad = 16;
    } else {
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                ++lchecked;
                if (!(l.at(i, j) == parse_literal(localizing[i][j], idx))) ++lbad;
            }
        }
    }
    Outcome o;
    o.pass = checked == 55 && bad == 0 && lchecked == 16 && lbad == 0;
    o.detail = "moment matrix " + std::to_string(checked - bad) + "/55 upper-triangle entries, localizing " +
               std::to_string(lchecked - lbad) + "/16 entries";
    return o;
}

// 8 ------------------------------------------------------------------------
Outcome solver_correctness() {
    const auto t0 = clock_type::now();
    std::mt19937 rng(8008);
    std::uniform_int_distribution<int> dim(1, 5), vars(1, 8), nblocks(1, 3), zdim(0, 2);
    int bad = 0;
    double worst = 0.0;
    for (int i = 0; i < kPlanted; ++i) {
        std::vector<int> dims(nblocks(rng));
        for (auto& d : dims) d = dim(rng);
        const int m = vars(rng);
        const int zero = zdim(rng);
        const auto lmi = oracle::planted_lmi(rng, m, dims, zero);
        const SdpSolution s = solve(lmi.prob);
        const double err = std::abs(s.objective - lmi.optimum) / std::max(1.0, std::abs(lmi.optimum));
        worst = std::max(worst, err);
        if (s.status != SolveStatus::optimal || err > kPlantedTol) ++bad;
    }
    // min t s.t. [[t, 1], [1, t]] >= 0
    SdpProblem p;
    p.index = MomentIndex(1, 1);
    p.order = 1;
    p.fixed_vars[0] = 1.0;
    p.objective = LinearExpr::single(1);
    SymbolicPsdBlock b(2, "t", 1);
    b.at(0, 0) = b.at(1, 1) = LinearExpr::single(1);
    b.at(0, 1) = b.at(1, 0) = LinearExpr::single(0);
    p.psd_blocks.push_back(b);
    const SdpSolution st = solve(p);
    const double terr = std::abs(st.objective - 1.0);
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = bad == 0 && terr <= kMinT && t < kSolverSeconds;
    o.detail = std::to_string(kPlanted) + " planted LMIs, " + std::to_string(bad) + " off, worst rel err " +
               fmt("%.1e", worst) + "; min-t " + fmt("%.12f", st.objective) + "; " + fmt("%.1f s", t);
    return o;
}

// 9 ------------------------------------------------------------------------
Outcome sdpa_round_trip() {
    std::vector<SdpProblem> probs;
    for (const char* name : {"wb2.json", "wb2_tight.json", "lln3.json", "case5.json"}) {
        const PolynomialProgram pp = assemble_opf(load_case(case_path(name)));
        probs.push_back(assemble_relaxation(pp, 2));
    }
    probs.push_back(assemble_relaxation(assemble_opf(load_case(case_path("wb2_tight.json"))), 1));
    std::mt19937 rng(9009);
    while (static_cast<int>(probs.size()) < kRoundTrips) {
        const auto rc = oracle::random_case(rng, 2 + static_cast<int>(probs.size()) % 3, random_features(rng));
        OpfOptions opts;
        if (probs.size() % 4 == 0) opts.mode = ReferenceMode::constrained;
        const PolynomialProgram pp = assemble_opf(rc.net, opts);
        probs.push_back(assemble_relaxation(pp, minimum_order(pp) + static_cast<int>(probs.size()) % 2));
    }
    int bad = 0;
    std::size_t entries = 0;
    for (const auto& prob : probs) {
        const std::string text = export_sdpa(prob);
        const auto got = oracle::read_sdpa(text);
        const auto want = oracle::expected_sdpa(prob);
        entries += got.entries.size();
        const bool same = got.m == want.m && got.sizes == want.sizes && got.c == want.c && got.entries == want.entries;
        // the library's own reader must agree with the independent one
        const SdpaData d = parse_sdpa(text);
        std::map<oracle::SdpaKey, double> mine;
        for (const auto& e : d.entries) mine[{e.matrix, e.block, e.row, e.col}] += e.value;
        if (!same || mine != got.entries) ++bad;
    }
    Outcome o;
    o.pass = bad == 0 && static_cast<int>(probs.size()) == kRoundTrips;
    o.detail = std::to_string(probs.size()) + " relaxations, " + std::to_string(entries) + " entries, " +
               std::to_string(bad) + " mismatches";
    return o;
}

// 10 -----------------------------------------------------------------------
Outcome scale_targets() {
    const auto t0 = clock_type::now();
    const PolynomialProgram p5 = assemble_opf(load_case(case_path("case5.json")));
    const OrderResult r5 = solve_order(p5, 2);
    const double t5 = seconds_since(t0);

    const PolynomialProgram p10 = assemble_opf(load_case(case_path("case10.json")));
    const SdpProblem prob10 = assemble_relaxation(p10, 2);
    const int dim10 = prob10.psd_blocks.front().dim();
    const std::string text = export_sdpa(prob10);
    const auto got = oracle::read_sdpa(text);
    const bool exported = got.entries == oracle::expected_sdpa(prob10).entries;
    std::string outcome10;
    bool handled = false;
    const auto t1 = clock_type::now();
    try {
        const SdpSolution s = solve(prob10);
        outcome10 = "solved (" + to_string(s.status) + ")";
        handled = true;
    } catch (const Error& e) {
        outcome10 = std::string("declined: ") + e.what();
        handled = true;
    }
    const double t10 = seconds_since(t1);

    Outcome o;
    o.pass = p5.nvars() == 9 && r5.moment_dim == 55 && r5.solved && r5.status == SolveStatus::optimal &&
             t5 < kCase5Seconds && p10.nvars() == 19 && dim10 == 210 && exported && handled;
    o.detail = "5-bus: 55x55, " + to_string(r5.status) + ", bound " + fmt("%.4f", r5.bound) + ", " +
               to_string(r5.report.verdict) + ", " + fmt("%.1f s", t5) + "; 10-bus: " + std::to_string(dim10) + "x" +
               std::to_string(dim10) + ", " + std::to_string(got.entries.size()) + " SDPA entries, solver " +
               outcome10 + " after " + fmt("%.2f s", t10);
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"lifting soundness", lifting_soundness},
        {"two-bus oracle", wb2_oracle},
        {"non-convex regime", nonconvex_regime},
        {"hierarchy monotonicity", monotonicity},
        {"minimum-order rule", minimum_order_rule},
        {"sign-pattern case", sign_pattern},
        {"moment structure", moment_structure},
        {"solver correctness", solver_correctness},
        {"SDPA round trip", sdpa_round_trip},
        {"scale targets", scale_targets},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
