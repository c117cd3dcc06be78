#include "mopf/cli.hpp"

#include "mopf/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mopf {

namespace {

using ojson = nlohmann::ordered_json;

// 12 significant digits; the JSON writer then prints the shortest form.
ojson num(double v) {
    if (!std::isfinite(v)) return nullptr;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    double r = std::strtod(buf, nullptr);
    return r == 0.0 ? 0.0 : r;  // no "-0.0"
}

std::string fmt12(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

ojson num_array(const Eigen::VectorXd& v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

OutputFormat parse_format(const std::string& s) {
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    throw ValidationError("unknown output format '" + s + "' (expected json or csv)");
}

ReferenceMode parse_mode(const std::string& s) {
    if (s == "eliminated") return ReferenceMode::eliminated;
    if (s == "constrained") return ReferenceMode::constrained;
    throw ValidationError("unknown reference mode '" + s + "' (expected eliminated or constrained)");
}

void write_output(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw Error("cannot open '" + cfg.out + "' for writing");
    f << text;
    if (!f) throw Error("failed writing '" + cfg.out + "'");
}

ojson bus_table(const Network& net, const PolynomialProgram& pp, const ExactnessReport& rep) {
    ojson buses = ojson::array();
    if (rep.candidate.size() != pp.nvars()) return buses;
    const auto inj = build_injection_polys(net, pp.vars);
    for (int k = 0; k < net.bus_count(); ++k) {
        const double pg = inj[k].p.evaluate(rep.candidate);
        const double qg = inj[k].q.evaluate(rep.candidate);
        ojson b;
        b["id"] = net.buses()[k].id;
        b["vd"] = num(rep.vd(k));
        b["vq"] = num(rep.vq(k));
        b["vm"] = num(std::hypot(rep.vd(k), rep.vq(k)));
        b["pg_pu"] = num(pg);
        b["qg_pu"] = num(qg);
        b["pg_mw"] = num(pg * net.base_mva());
        b["qg_mvar"] = num(qg * net.base_mva());
        buses.push_back(std::move(b));
    }
    return buses;
}

ojson order_record(const OrderResult& r, bool timings) {
    ojson o;
    o["order"] = r.order;
    o["moment_dim"] = r.moment_dim;
    o["moment_variables"] = r.variable_count;
    o["solved"] = r.solved;
    o["status"] = to_string(r.status);
    o["iterations"] = r.iterations;
    if (r.solved) {
        o["bound"] = num(r.bound);
        o["candidate_cost"] = num(r.report.candidate_cost);
        o["gap"] = num(r.report.gap);
        o["solver_gap"] = num(r.solver_gap);
        o["rank"] = r.report.rank;
        o["max_violation"] = num(r.report.max_violation);
        ojson worst;
        for (const auto& [kind, v] : r.report.worst_violation) worst[to_string(kind)] = num(v);
        o["worst_violation"] = worst;
        o["verdict"] = to_string(r.report.verdict);
    } else {
        o["bound"] = nullptr;
        o["verdict"] = to_string(Verdict::inexact_lower_bound);
    }
    if (!r.error.empty()) o["message"] = r.error;
    if (timings) {
        o["timings"] = {{"assemble_s", num(r.assemble_seconds)}, {"solve_s", num(r.solve_seconds)}};
    }
    return o;
}

std::string order_csv_header() {
    return "order,status,bound,candidate_cost,gap,rank,max_violation,verdict\n";
}

std::string order_csv_row(const OrderResult& r) {
    std::string s = std::to_string(r.order) + "," + to_string(r.status) + ",";
    if (r.solved) {
        s += fmt12(r.bound) + "," + fmt12(r.report.candidate_cost) + "," + fmt12(r.report.gap) + "," +
             std::to_string(r.report.rank) + "," + fmt12(r.report.max_violation) + "," +
             to_string(r.report.verdict);
    } else {
        s += ",,,,," + to_string(Verdict::inexact_lower_bound);
    }
    return s + "\n";
}

std::string census_text(const SdpProblem& prob) {
    const BlockCensus c = block_census(prob);
    std::ostringstream os;
    os << "order " << prob.order << ", " << prob.variable_count() << " moment variables ("
       << prob.fixed_vars.size() << " fixed)\n";
    int largest = 0;
    for (const auto& [label, dim] : c.psd) {
        os << "psd  " << dim << "x" << dim << "  " << label << '\n';
        largest = std::max(largest, dim);
    }
    for (const auto& [label, dim] : c.zero) {
        os << "zero " << dim << "x" << dim << "  " << label << '\n';
    }
    os << "largest psd block " << largest << "x" << largest << '\n';
    return os.str();
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const Network net = load_case(cfg.input);
    const PolynomialProgram pp = assemble_opf(net, cfg.opf);
    const int order = cfg.order.value_or(minimum_order(pp));
    const OrderResult r = solve_order(pp, order, cfg.solver, cfg.thresholds);
    if (!r.solved) throw Error("order " + std::to_string(order) + ": " + r.error);
    if (cfg.format == OutputFormat::csv) {
        write_output(cfg, order_csv_header() + order_csv_row(r), out);
    } else {
        write_output(cfg, solve_report(net, pp, r, cfg) + "\n", out);
    }
    return r.report.verdict == Verdict::globally_optimal ? kExitExact : kExitInexact;
}

int cmd_hierarchy(const RunConfig& cfg, std::ostream& out) {
    const Network net = load_case(cfg.input);
    const PolynomialProgram pp = assemble_opf(net, cfg.opf);
    HierarchyOptions opts;
    opts.solver = cfg.solver;
    opts.thresholds = cfg.thresholds;
    opts.opf = cfg.opf;
    const HierarchyResult h = solve_hierarchy(pp, cfg.max_order, opts);
    if (cfg.format == OutputFormat::csv) {
        std::string s = order_csv_header();
        for (const auto& r : h.orders) s += order_csv_row(r);
        write_output(cfg, s, out);
    } else {
        write_output(cfg, hierarchy_report(net, pp, h, cfg) + "\n", out);
    }
    return h.gamma_min ? kExitExact : kExitInexact;
}

int cmd_export(const RunConfig& cfg, std::ostream& out) {
    const Network net = load_case(cfg.input);
    const PolynomialProgram pp = assemble_opf(net, cfg.opf);
    const int order = cfg.order.value_or(minimum_order(pp));
    const SdpProblem prob = assemble_relaxation(pp, order);
    std::string path = cfg.out;
    if (path.empty()) {
        path = std::filesystem::path(cfg.input).stem().string() + ".g" + std::to_string(order) + ".dat-s";
    }
    RunConfig to_file = cfg;
    to_file.out = path;
    write_output(to_file, export_sdpa(prob), out);
    out << census_text(prob);
    out << "wrote " << path << '\n';
    return kExitExact;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.format != OutputFormat::csv) {
        throw ValidationError("sample-space writes CSV only; use --format csv");
    }
    const Network net = load_case(cfg.input);
    const PolynomialProgram pp = assemble_opf(net, cfg.opf);
    SampleOptions so;
    so.feasibility_tolerance = cfg.thresholds.feasibility;
    so.squared = cfg.squared;
    so.constraint_slacks = cfg.slacks;
    const SampleTable table = sample_space(pp, cfg.grid, so);
    write_output(cfg, to_csv(table, so), out);
    if (!cfg.plot_script.empty()) {
        std::ofstream f(cfg.plot_script);
        if (!f) throw Error("cannot open '" + cfg.plot_script + "' for writing");
        f << plot_script(cfg.out.empty() ? "samples.csv" : cfg.out, table);
    }
    err << table.feasible_count() << " of " << table.rows.size() << " grid points feasible\n";
    return kExitExact;
}

} // namespace

void RunConfig::validate() const {
    if (command != "solve" && command != "hierarchy" && command != "export" &&
        command != "sample-space") {
        throw ValidationError("unknown command '" + command + "'");
    }
    if (input.empty()) throw ValidationError("no case file given");
    if (order && *order < 1) throw ValidationError("--order must be at least 1");
    if (max_order < 1) throw ValidationError("--max-order must be at least 1");
    if (!(thresholds.gap >= 0.0)) throw ValidationError("--tol-gap must be non-negative");
    if (!(thresholds.feasibility >= 0.0)) throw ValidationError("--tol-feas must be non-negative");
    if (!(thresholds.rank_tol > 0.0 && thresholds.rank_tol < 1.0)) {
        throw ValidationError("--rank-tol must lie in (0, 1)");
    }
    for (const auto& a : grid) {
        if (a.steps < 2) throw ValidationError("grid axis '" + a.variable + "' needs at least 2 steps");
    }
    if (command == "sample-space" && grid.empty()) {
        throw ValidationError("sample-space needs --grid VAR=min:max:steps for every variable");
    }
    solver.validate();
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ParseError("config '" + path + "': expected a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "order") cfg.order = v.get<int>();
            else if (key == "max_order") cfg.max_order = v.get<int>();
            else if (key == "tol_gap") cfg.thresholds.gap = v.get<double>();
            else if (key == "tol_feas") cfg.thresholds.feasibility = v.get<double>();
            else if (key == "rank_tol") cfg.thresholds.rank_tol = v.get<double>();
            else if (key == "out") cfg.out = v.get<std::string>();
            else if (key == "format") cfg.format = parse_format(v.get<std::string>());
            else if (key == "reference") cfg.opf.mode = parse_mode(v.get<std::string>());
            else if (key == "nonnegative_reference") cfg.opf.nonnegative_reference = v.get<bool>();
            else if (key == "timings") cfg.timings = v.get<bool>();
            else if (key == "squared") cfg.squared = v.get<bool>();
            else if (key == "slacks") cfg.slacks = v.get<bool>();
            else if (key == "grid") {
                cfg.grid.clear();
                for (const auto& g : v) cfg.grid.push_back(parse_grid_axis(g.get<std::string>()));
            } else if (key == "solver") {
                for (const auto& [sk, sv] : v.items()) {
                    auto& s = cfg.solver;
                    if (sk == "gap_tolerance") s.gap_tolerance = sv.get<double>();
                    else if (sk == "feasibility_tolerance") s.feasibility_tolerance = sv.get<double>();
                    else if (sk == "max_iterations") s.max_iterations = sv.get<int>();
                    else if (sk == "step_fraction") s.step_fraction = sv.get<double>();
                    else if (sk == "max_free_variables") s.max_free_variables = sv.get<std::size_t>();
                    else if (sk == "psd_shift") s.psd_shift = sv.get<double>();
                    else if (sk == "verbose") s.verbose = sv.get<bool>();
                    else throw ParseError("config '" + path + "': unknown key solver." + sk);
                }
            } else {
                throw ParseError("config '" + path + "': unknown key " + key);
            }
        }
    } catch (const nlohmann::json::type_error& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
}

std::string solve_report(const Network& net, const PolynomialProgram& pp, const OrderResult& r,
                         const RunConfig& cfg) {
    ojson doc;
    doc["command"] = "solve";
    doc["case"] = cfg.input;
    doc["reference_mode"] = to_string(pp.mode());
    doc["variables"] = pp.variables();
    doc["result"] = order_record(r, cfg.timings);
    doc["verdict"] = to_string(r.report.verdict);
    doc["spectrum"] = num_array(r.report.spectrum.reverse());
    doc["buses"] = bus_table(net, pp, r.report);
    return doc.dump(2);
}

std::string hierarchy_report(const Network& net, const PolynomialProgram& pp,
                             const HierarchyResult& h, const RunConfig& cfg) {
    ojson doc;
    doc["command"] = "hierarchy";
    doc["case"] = cfg.input;
    doc["reference_mode"] = to_string(pp.mode());
    doc["variables"] = pp.variables();
    doc["max_order"] = cfg.max_order;
    ojson orders = ojson::array();
    for (const auto& r : h.orders) orders.push_back(order_record(r, cfg.timings));
    doc["orders"] = orders;
    doc["gamma_min"] = h.gamma_min ? ojson(*h.gamma_min) : ojson(nullptr);
    doc["best_bound"] = h.best_bound ? num(*h.best_bound) : ojson(nullptr);
    doc["verdict"] = to_string(h.verdict);
    const OrderResult* last = nullptr;
    for (const auto& r : h.orders) {
        if (r.solved) last = &r;
    }
    doc["buses"] = last ? bus_table(net, pp, last->report) : ojson::array();
    return doc.dump(2);
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        if (cfg.command == "solve") return cmd_solve(cfg, out);
        if (cfg.command == "hierarchy") return cmd_hierarchy(cfg, out);
        if (cfg.command == "export") return cmd_export(cfg, out);
        return cmd_sample(cfg, out, err);
    } catch (const OrderTooLowError& e) {
        err << "error: order too low: " << e.what() << '\n';
    } catch (const ParseError& e) {
        err << "error: parse error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitError;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Moment-relaxation optimal power flow"};
    app.require_subcommand(1);

    std::string input, config, out_path, format, mode;
    std::vector<std::string> grid;
    int order = 0, max_order = 0;
    double tol_gap = 0, tol_feas = 0, rank_tol = 0;
    bool no_timings = false, squared = false, slacks = false, verbose = false;
    std::string plot;

    struct Opts {
        CLI::Option *order, *max_order, *tol_gap, *tol_feas, *rank_tol, *out, *format, *grid, *mode;
    };
    std::map<std::string, Opts> opts;

    auto add_common = [&](CLI::App* sub) {
        Opts o{};
        sub->add_option("case", input, "case file (JSON)")->required();
        sub->add_option("--config", config, "JSON config; flags take precedence");
        o.out = sub->add_option("--out,-o", out_path, "output file (default: standard output)");
        o.format = sub->add_option("--format", format, "json or csv");
        o.tol_gap = sub->add_option("--tol-gap", tol_gap, "relative gap for the exactness verdict");
        o.tol_feas = sub->add_option("--tol-feas", tol_feas, "constraint violation tolerance, per unit");
        o.rank_tol = sub->add_option("--rank-tol", rank_tol, "relative eigenvalue cut for the rank");
        o.mode = sub->add_option("--reference", mode, "eliminated or constrained");
        o.order = sub->add_option("--order,-g", order, "relaxation order");
        o.max_order = sub->add_option("--max-order", max_order, "largest order tried");
        o.grid = sub->add_option("--grid", grid, "VAR=min:max:steps, once per variable");
        sub->add_flag("--no-timings", no_timings, "omit wall-clock timings from reports");
        sub->add_flag("--verbose,-v", verbose, "solver progress on standard error");
        opts[sub->get_name()] = o;
        return sub;
    };
    add_common(app.add_subcommand("solve", "solve one relaxation order"));
    add_common(app.add_subcommand("hierarchy", "raise the order until the relaxation is exact"));
    add_common(app.add_subcommand("export", "write the relaxation in SDPA sparse format"));
    auto* sample = add_common(app.add_subcommand("sample-space", "grid-sample the voltage space to CSV"));
    sample->add_flag("--squared", squared, "add squared-coordinate columns");
    sample->add_flag("--slacks", slacks, "add one slack column per constraint");
    sample->add_option("--plot", plot, "also write a matplotlib script here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitExact;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }

    RunConfig cfg;
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "sample-space") cfg.format = OutputFormat::csv;
    const Opts& o = opts.at(cfg.command);
    try {
        if (!config.empty()) apply_config_file(config, cfg);
        cfg.input = input;
        if (o.order->count()) cfg.order = order;
        if (o.max_order->count()) cfg.max_order = max_order;
        if (o.tol_gap->count()) cfg.thresholds.gap = tol_gap;
        if (o.tol_feas->count()) cfg.thresholds.feasibility = tol_feas;
        if (o.rank_tol->count()) cfg.thresholds.rank_tol = rank_tol;
        if (o.out->count()) cfg.out = out_path;
        if (o.format->count()) cfg.format = parse_format(format);
        if (o.mode->count()) cfg.opf.mode = parse_mode(mode);
        if (o.grid->count()) {
            cfg.grid.clear();
            for (const auto& g : grid) cfg.grid.push_back(parse_grid_axis(g));
        }
        if (no_timings) cfg.timings = false;
        if (verbose) cfg.solver.verbose = true;
        if (squared) cfg.squared = true;
        if (slacks) cfg.slacks = true;
        cfg.plot_script = plot;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return run_command(cfg, out, err);
}

} // namespace mopf
