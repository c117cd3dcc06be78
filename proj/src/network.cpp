#include "mopf/network.hpp"

#include "mopf/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mopf {

using nlohmann::json;

Network::Network(double base_mva, std::vector<Bus> buses, std::vector<Generator> generators,
                 std::vector<Branch> branches)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      generators_(std::move(generators)),
      branches_(std::move(branches)) {
    validate();
}

void Network::validate() {
    if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
        throw ValidationError("base_mva must be positive");
    }
    std::set<int> ids;
    reference_index_ = -1;
    for (std::size_t k = 0; k < buses_.size(); ++k) {
        const Bus& bus = buses_[k];
        if (bus.id <= 0) {
            throw ValidationError("bus id must be a positive integer, got " + std::to_string(bus.id));
        }
        if (!ids.insert(bus.id).second) {
            throw ValidationError("duplicate bus id " + std::to_string(bus.id));
        }
        if (!(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max)) {
            throw ValidationError("bus " + std::to_string(bus.id) + ": need 0 < v_min <= v_max");
        }
        if (bus.is_reference) {
            if (reference_index_ >= 0) {
                throw ValidationError("more than one reference bus (" +
                                      std::to_string(buses_[reference_index_].id) + ", " +
                                      std::to_string(bus.id) + ")");
            }
            reference_index_ = static_cast<int>(k);
        }
    }
    if (reference_index_ < 0) {
        throw ValidationError("no reference bus");
    }

    generator_of_bus_.assign(buses_.size(), -1);
    for (std::size_t g = 0; g < generators_.size(); ++g) {
        const Generator& gen = generators_[g];
        if (!ids.count(gen.bus)) {
            throw ValidationError("generator " + std::to_string(g) + " refers to unknown bus " +
                                  std::to_string(gen.bus));
        }
        if (!(gen.p_min <= gen.p_max) || !(gen.q_min <= gen.q_max)) {
            throw ValidationError("generator at bus " + std::to_string(gen.bus) +
                                  ": need p_min <= p_max and q_min <= q_max");
        }
        if (!(gen.c2 >= 0.0)) {
            throw ValidationError("generator at bus " + std::to_string(gen.bus) +
                                  ": c2 must be non-negative");
        }
        const int k = index_of(gen.bus);
        if (generator_of_bus_[k] >= 0) {
            // The cost is a function of the bus injection, so two units at one
            // bus cannot be told apart.
            throw ValidationError("more than one generator at bus " + std::to_string(gen.bus));
        }
        generator_of_bus_[k] = static_cast<int>(g);
    }

    for (std::size_t l = 0; l < branches_.size(); ++l) {
        const Branch& br = branches_[l];
        const std::string name = "branch " + std::to_string(l);
        if (!ids.count(br.from) || !ids.count(br.to)) {
            throw ValidationError(name + " refers to an unknown bus");
        }
        if (br.from == br.to) {
            throw ValidationError(name + ": from and to are the same bus");
        }
        if (br.r == 0.0 && br.x == 0.0) {
            throw ValidationError(name + ": zero series impedance");
        }
        if (!(br.s_max >= 0.0)) {
            throw ValidationError(name + ": s_max must be non-negative");
        }
    }
}

int Network::index_of(int bus_id) const {
    for (std::size_t k = 0; k < buses_.size(); ++k) {
        if (buses_[k].id == bus_id) return static_cast<int>(k);
    }
    return -1;
}

int Network::generator_at(int bus_index) const {
    return generator_of_bus_.at(bus_index);
}

BusLimits Network::limits_pu(int bus_index) const {
    const int g = generator_at(bus_index);
    if (g < 0) return {};
    const Generator& gen = generators_[g];
    return {gen.p_min / base_mva_, gen.p_max / base_mva_, gen.q_min / base_mva_,
            gen.q_max / base_mva_};
}

CostPu Network::cost_pu(int bus_index) const {
    const int g = generator_at(bus_index);
    if (g < 0) return {};
    const Generator& gen = generators_[g];
    return {gen.c2 * base_mva_ * base_mva_, gen.c1 * base_mva_, gen.c0};
}

std::pair<double, double> series_admittance(double r, double x) {
    const double den = r * r + x * x;
    if (den == 0.0) {
        throw ValidationError("singular branch impedance (r = x = 0)");
    }
    return {r / den, -x / den};
}

BranchParams Network::branch_params(int branch_index) const {
    const Branch& br = branches_.at(branch_index);
    const auto [g, b] = series_admittance(br.r, br.x);
    return {index_of(br.from), index_of(br.to), g, b, br.b_sh, br.s_max / base_mva_};
}

Admittance admittance_matrix(const Network& net) {
    const int n = net.bus_count();
    Admittance y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (int l = 0; l < static_cast<int>(net.branches().size()); ++l) {
        const BranchParams p = net.branch_params(l);
        const int i = p.from_index;
        const int j = p.to_index;
        y.G(i, i) += p.g;
        y.G(j, j) += p.g;
        y.G(i, j) -= p.g;
        y.G(j, i) -= p.g;
        y.B(i, i) += p.b + 0.5 * p.b_sh;
        y.B(j, j) += p.b + 0.5 * p.b_sh;
        y.B(i, j) -= p.b;
        y.B(j, i) -= p.b;
    }
    return y;
}

// ---------------------------------------------------------------------------
// JSON case schema

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(path + "." + key + ": missing required field");
    }
    return *it;
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ParseError(path + ": expected a number");
    }
    return v.get<double>();
}

double number_field(const json& obj, const char* key, const std::string& path) {
    return number(require(obj, key, path), path + "." + key);
}

double optional_number(const json& obj, const char* key, const std::string& path,
                       double fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return number(*it, path + "." + key);
}

int integer_field(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) {
        throw ParseError(path + "." + key + ": expected an integer");
    }
    return v.get<int>();
}

const json& array_field(const json& obj, const char* key, bool required) {
    static const json empty = json::array();
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw ParseError(std::string("$.") + key + ": missing required field");
        return empty;
    }
    if (!it->is_array()) {
        throw ParseError(std::string("$.") + key + ": expected an array");
    }
    return *it;
}

json limit_value(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

} // namespace

Network parse_case(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("$: expected a JSON object");
    }

    const double base = optional_number(doc, "base_mva", "$", 100.0);

    std::vector<Bus> buses;
    const json& jbuses = array_field(doc, "buses", true);
    for (std::size_t k = 0; k < jbuses.size(); ++k) {
        const std::string path = "$.buses[" + std::to_string(k) + "]";
        const json& b = jbuses[k];
        if (!b.is_object()) throw ParseError(path + ": expected an object");
        Bus bus;
        bus.id = integer_field(b, "id", path);
        bus.v_min = number_field(b, "v_min", path);
        bus.v_max = number_field(b, "v_max", path);
        bus.p_load = optional_number(b, "p_load", path, 0.0);
        bus.q_load = optional_number(b, "q_load", path, 0.0);
        if (auto it = b.find("reference"); it != b.end()) {
            if (!it->is_boolean()) throw ParseError(path + ".reference: expected a boolean");
            bus.is_reference = it->get<bool>();
        }
        buses.push_back(bus);
    }

    std::vector<Generator> gens;
    const json& jgens = array_field(doc, "generators", false);
    for (std::size_t g = 0; g < jgens.size(); ++g) {
        const std::string path = "$.generators[" + std::to_string(g) + "]";
        const json& j = jgens[g];
        if (!j.is_object()) throw ParseError(path + ": expected an object");
        Generator gen;
        gen.bus = integer_field(j, "bus", path);
        gen.p_min = optional_number(j, "p_min", path, -kInf);
        gen.p_max = optional_number(j, "p_max", path, kInf);
        gen.q_min = optional_number(j, "q_min", path, -kInf);
        gen.q_max = optional_number(j, "q_max", path, kInf);
        gen.c2 = optional_number(j, "c2", path, 0.0);
        gen.c1 = optional_number(j, "c1", path, 0.0);
        gen.c0 = optional_number(j, "c0", path, 0.0);
        gens.push_back(gen);
    }

    std::vector<Branch> branches;
    const json& jbr = array_field(doc, "branches", false);
    for (std::size_t l = 0; l < jbr.size(); ++l) {
        const std::string path = "$.branches[" + std::to_string(l) + "]";
        const json& j = jbr[l];
        if (!j.is_object()) throw ParseError(path + ": expected an object");
        Branch br;
        br.from = integer_field(j, "from", path);
        br.to = integer_field(j, "to", path);
        br.r = number_field(j, "r", path);
        br.x = number_field(j, "x", path);
        br.b_sh = optional_number(j, "b_sh", path, 0.0);
        br.s_max = optional_number(j, "s_max", path, 0.0);
        branches.push_back(br);
    }

    return Network(base, std::move(buses), std::move(gens), std::move(branches));
}

Network load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open case file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string serialize_case(const Network& net) {
    json doc;
    doc["base_mva"] = net.base_mva();
    doc["buses"] = json::array();
    for (const Bus& b : net.buses()) {
        doc["buses"].push_back({{"id", b.id},
                                {"v_min", b.v_min},
                                {"v_max", b.v_max},
                                {"p_load", b.p_load},
                                {"q_load", b.q_load},
                                {"reference", b.is_reference}});
    }
    doc["generators"] = json::array();
    for (const Generator& g : net.generators()) {
        doc["generators"].push_back({{"bus", g.bus},
                                     {"p_min", limit_value(g.p_min)},
                                     {"p_max", limit_value(g.p_max)},
                                     {"q_min", limit_value(g.q_min)},
                                     {"q_max", limit_value(g.q_max)},
                                     {"c2", g.c2},
                                     {"c1", g.c1},
                                     {"c0", g.c0}});
    }
    doc["branches"] = json::array();
    for (const Branch& br : net.branches()) {
        doc["branches"].push_back({{"from", br.from},
                                   {"to", br.to},
                                   {"r", br.r},
                                   {"x", br.x},
                                   {"b_sh", br.b_sh},
                                   {"s_max", br.s_max}});
    }
    return doc.dump(2) + "\n";
}

} // namespace mopf
