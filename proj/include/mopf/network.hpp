#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace mopf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Quantities are kept in the units of the case file: MW / MVAr / MVA for
// loads, generation limits and flow limits; per-unit for voltages and branch
// impedances. Per-unit views are provided by Network.

struct Bus {
    int id = 0;
    double v_min = 0.0;
    double v_max = 0.0;
    double p_load = 0.0;
    double q_load = 0.0;
    bool is_reference = false;
};

struct Generator {
    int bus = 0;
    double p_min = -kInf;
    double p_max = kInf;
    double q_min = -kInf;
    double q_max = kInf;
    double c2 = 0.0;  ///< $/MW^2h
    double c1 = 0.0;  ///< $/MWh
    double c0 = 0.0;  ///< $/h
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_sh = 0.0;   ///< total line charging, per unit
    double s_max = 0.0;  ///< MVA; 0 means unconstrained
};

/// Series admittance and shunt of one branch in per unit.
struct BranchParams {
    int from_index = 0;
    int to_index = 0;
    double g = 0.0;
    double b = 0.0;
    double b_sh = 0.0;
    double s_max_pu = 0.0;
};

/// Per-unit operating limits of a bus, after folding in its generator (if any).
struct BusLimits {
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
};

/// Cost of the generator at a bus, with power measured in per unit.
struct CostPu {
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
};

class Network {
public:
    Network() = default;
    Network(double base_mva, std::vector<Bus> buses, std::vector<Generator> generators,
            std::vector<Branch> branches);

    double base_mva() const { return base_mva_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Generator>& generators() const { return generators_; }
    const std::vector<Branch>& branches() const { return branches_; }

    int bus_count() const { return static_cast<int>(buses_.size()); }
    int reference_index() const { return reference_index_; }
    int index_of(int bus_id) const;

    /// Index into generators() of the unit at a bus, or -1.
    int generator_at(int bus_index) const;

    double p_load_pu(int bus_index) const { return buses_[bus_index].p_load / base_mva_; }
    double q_load_pu(int bus_index) const { return buses_[bus_index].q_load / base_mva_; }
    BusLimits limits_pu(int bus_index) const;
    CostPu cost_pu(int bus_index) const;
    BranchParams branch_params(int branch_index) const;

private:
    void validate();

    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Generator> generators_;
    std::vector<Branch> branches_;
    std::vector<int> generator_of_bus_;
    int reference_index_ = -1;
};

/// Conductance and susceptance parts of the bus admittance matrix.
struct Admittance {
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;
};

Admittance admittance_matrix(const Network& net);

/// Series admittance 1/(r + jx) as (g, b).
std::pair<double, double> series_admittance(double r, double x);

Network parse_case(std::string_view text);
Network load_case(const std::string& path);
std::string serialize_case(const Network& net);

} // namespace mopf
