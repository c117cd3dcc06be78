#include "mopf/cli.hpp"

#include "oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mopf;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "momentopf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string temp_file(const std::string& name, const std::string& content = {}) {
    const auto p = std::filesystem::temp_directory_path() / ("mopf_cli_" + name);
    if (!content.empty()) std::ofstream(p) << content;
    return p.string();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("solve reports an exact two-bus optimum") {
    const Run r = cli({"solve", case_path("wb2.json"), "-g", "2", "--no-timings"});
    CHECK(r.code == kExitExact);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["verdict"] == "globally-optimal");
    CHECK(j["result"]["order"] == 2);
    CHECK(j["result"]["rank"] == 1);
    CHECK(!j["result"].contains("timings"));

    // generation at the reported voltages, recomputed from complex power
    const Network net = load_case(case_path("wb2.json"));
    Eigen::VectorXd vd(2), vq(2);
    for (int k = 0; k < 2; ++k) {
        vd(k) = j["buses"][k]["vd"].get<double>();
        vq(k) = j["buses"][k]["vq"].get<double>();
    }
    const auto inj = oracle::injections(net, oracle::phasors(vd, vq));
    for (int k = 0; k < 2; ++k) {
        const double pg = inj[k].real() + net.p_load_pu(k);
        const double qg = inj[k].imag() + net.q_load_pu(k);
        CHECK(std::abs(j["buses"][k]["pg_pu"].get<double>() - pg) < 1e-9);
        CHECK(std::abs(j["buses"][k]["qg_pu"].get<double>() - qg) < 1e-9);
    }
    const auto opt = oracle::two_bus_optimum(net);
    CHECK(j["result"]["bound"].get<double>() == doctest::Approx(opt.cost).epsilon(1e-6));
}

TEST_CASE("reports are deterministic") {
    const auto a = cli({"solve", case_path("wb2.json"), "--no-timings"});
    const auto b = cli({"solve", case_path("wb2.json"), "--no-timings"});
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"command\": \"solve\"") < a.out.find("\"verdict\""));
}

TEST_CASE("order too low for a quadratic cost") {
    const Run r = cli({"solve", case_path("wb2.json"), "-g", "1"});
    CHECK(r.code == kExitError);
    CHECK(r.err.find("order too low") != std::string::npos);
}

TEST_CASE("malformed case file") {
    const std::string path = temp_file("bad.json", "{\n \"buses\": [\n");
    const Run r = cli({"solve", path});
    CHECK(r.code == kExitError);
    CHECK(r.err.find("parse error") != std::string::npos);
    CHECK(r.err.find("line") != std::string::npos);
    CHECK(cli({"solve", "/nonexistent/case.json"}).code == kExitError);
    CHECK(cli({"frobnicate"}).code == kExitError);
}

TEST_CASE("hierarchy") {
    const Run exact = cli({"hierarchy", case_path("wb2.json"), "--max-order", "3", "--no-timings"});
    CHECK(exact.code == kExitExact);
    const auto j = nlohmann::json::parse(exact.out);
    CHECK(j["gamma_min"] == 2);

    const Run capped = cli({"hierarchy", case_path("wb2_tight.json"), "--max-order", "1"});
    CHECK(capped.code == kExitInexact);
    const auto c = nlohmann::json::parse(capped.out);
    CHECK(c["gamma_min"].is_null());
    CHECK(c["verdict"] == "inexact-lower-bound");
    CHECK(c["orders"].size() == 1);
    CHECK(c["orders"][0]["bound"].is_number());

    const Run both = cli({"hierarchy", case_path("wb2_tight.json"), "--max-order", "2", "--format", "csv"});
    CHECK(both.code == kExitExact);
    const auto rows = csv_rows(both.out);
    REQUIRE(rows.size() == 3);
    CHECK(std::stod(rows[1][2]) < std::stod(rows[2][2]));
}

TEST_CASE("config file is overridden by flags") {
    const std::string cfg = temp_file("cfg.json", R"({"order": 1, "tol_gap": 1e-5, "timings": false})");
    CHECK(cli({"solve", case_path("wb2.json"), "--config", cfg}).code == kExitError);
    const Run r = cli({"solve", case_path("wb2.json"), "--config", cfg, "-g", "2"});
    CHECK(r.code == kExitExact);
    CHECK(r.out.find("timings") == std::string::npos);
    const std::string bad = temp_file("cfg_bad.json", R"({"ordr": 2})");
    CHECK(cli({"solve", case_path("wb2.json"), "--config", bad}).code == kExitError);
}

TEST_CASE("export writes SDPA and a census") {
    const std::string out = temp_file("wb2.dat-s");
    const Run r = cli({"export", case_path("wb2.json"), "-g", "2", "--out", out});
    CHECK(r.code == kExitExact);
    CHECK(r.out.find("psd  10x10  moment") != std::string::npos);
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    const SdpProblem prob = assemble_relaxation(assemble_opf(load_case(case_path("wb2.json"))), 2);
    const auto got = oracle::read_sdpa(ss.str());
    const auto want = oracle::expected_sdpa(prob);
    CHECK(got.entries == want.entries);
    CHECK(got.c == want.c);

    // linear cost, gamma = 1: largest block is 1 + number of variables
    const Run lin = cli({"export", case_path("wb2_tight.json"), "-g", "1", "--out", temp_file("t.dat-s")});
    CHECK(lin.code == kExitExact);
    CHECK(lin.out.find("largest psd block 4x4") != std::string::npos);
}

TEST_CASE("sample-space CSV") {
    const Run box = cli({"sample-space", case_path("wb2.json"), "--grid", "Vd1=0.95:1.05:5", "--grid",
                         "Vd2=0.0:0.1:5", "--grid", "Vq2=0.0:0.1:5"});
    CHECK(box.code == kExitExact);
    auto rows = csv_rows(box.out);
    REQUIRE(rows.size() == 126);
    CHECK(rows[0] == std::vector<std::string>{"Vd1", "Vd2", "Vq2", "feasible", "cost", "slack_min"});
    int feasible = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) feasible += rows[i][3] == "1";
    CHECK(feasible == 0);

    const std::string one_bus = temp_file("one.json", R"({"base_mva": 100,
        "buses": [{"id": 1, "v_min": 0.5, "v_max": 1.5, "reference": true}],
        "generators": [{"bus": 1, "c1": 1}], "branches": []})");
    const Run all = cli({"sample-space", one_bus, "--grid", "Vd1=0.6:1.4:9", "--squared"});
    CHECK(all.code == kExitExact);
    rows = csv_rows(all.out);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0].back() == "Vd1^2");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == "1");

    CHECK(cli({"sample-space", case_path("wb2.json"), "--grid", "Vd1=0.95:1.05:1"}).code == kExitError);
    CHECK(cli({"sample-space", case_path("wb2.json"), "--grid", "Vd1=0.95:1.05:3"}).code == kExitError);
    CHECK(cli({"sample-space", case_path("wb2.json"), "--grid", "Vx=0:1:3"}).code == kExitError);
}

TEST_CASE("tight upper voltage limit splits the two-bus feasible set") {
    // generators at both buses, so the feasible set is full-dimensional and
    // grid points can be tested without an equality tolerance
    auto components = [](const std::string& path, int n) {
        const std::string axis = ":" + std::to_string(n);
        const Run r = cli({"sample-space", path, "--tol-feas", "0", "--grid", "Vd1=0.90:0.97" + axis,
                           "--grid", "Vd2=0.94:1.03" + axis, "--grid", "Vq2=-0.15:0.36" + axis});
        REQUIRE(r.code == kExitExact);
        const auto rows = csv_rows(r.out);
        std::vector<char> keep;
        for (std::size_t i = 1; i < rows.size(); ++i) keep.push_back(rows[i][3] == "1");
        REQUIRE(keep.size() == static_cast<std::size_t>(n) * n * n);
        return oracle::grid_components(keep, {n, n, n});
    };
    const std::string tight = case_path("wb2_split.json");
    CHECK(components(tight, 61) >= 2);
    CHECK(components(tight, 41) >= 2);

    auto j = nlohmann::json::parse(std::ifstream(tight));
    j["buses"][1]["v_max"] = 1.15;
    const std::string loose = temp_file("loose.json", j.dump());
    CHECK(components(loose, 41) == 1);
}

}
