#pragma once

#include "mopf/network.hpp"
#include "mopf/polynomial.hpp"

#include <string>
#include <vector>

namespace mopf {

/// How the angle reference Vq_ref = 0 enters the program.
enum class ReferenceMode {
    eliminated,   ///< Vq_ref is dropped from the variable list
    constrained,  ///< Vq_ref is kept and pinned through the moment variables
};

enum class ConstraintKind { active_power, reactive_power, voltage, flow, reference };

std::string to_string(ReferenceMode mode);
std::string to_string(ConstraintKind kind);

/// Assignment of voltage components to polynomial variables.
class VariableSpace {
public:
    VariableSpace() = default;
    VariableSpace(const Network& net, ReferenceMode mode);

    int size() const { return static_cast<int>(names_.size()); }
    int bus_count() const { return static_cast<int>(vd_.size()); }
    ReferenceMode mode() const { return mode_; }
    const std::vector<std::string>& names() const { return names_; }

    /// Variable index of Vd / Vq at a bus, or -1 if eliminated.
    int vd(int bus) const { return vd_.at(bus); }
    int vq(int bus) const { return vq_.at(bus); }

    Polynomial vd_poly(int bus) const;
    Polynomial vq_poly(int bus) const;

    /// Packs per-bus components into a point of this space (eliminated
    /// components are dropped).
    Eigen::VectorXd pack(const Eigen::VectorXd& vd, const Eigen::VectorXd& vq) const;
    /// Unpacks a point into per-bus components; eliminated components are 0.
    void unpack(const Eigen::VectorXd& point, Eigen::VectorXd& vd, Eigen::VectorXd& vq) const;

private:
    ReferenceMode mode_ = ReferenceMode::eliminated;
    std::vector<int> vd_;
    std::vector<int> vq_;
    std::vector<std::string> names_;
};

struct BusInjection {
    Polynomial p;  ///< generation P_G = net injection + P_D
    Polynomial q;
};

struct BranchFlow {
    Polynomial p;
    Polynomial q;
    Polynomial s2;  ///< p^2 + q^2
};

struct FlowPolys {
    BranchFlow from_to;
    BranchFlow to_from;
};

std::vector<BusInjection> build_injection_polys(const Network& net, const VariableSpace& vars);
Polynomial build_voltage_poly(const Network& net, const VariableSpace& vars, int bus);
FlowPolys build_flow_polys(const Network& net, const VariableSpace& vars, int branch);
Polynomial build_cost_poly(const Network& net, const VariableSpace& vars);

struct PolyConstraint {
    Polynomial poly;
    double lower = -kInf;
    double upper = kInf;
    ConstraintKind kind = ConstraintKind::voltage;
    std::string label;

    bool is_equality() const { return lower == upper; }
    /// min(f - lower, upper - f); negative when violated.
    double slack(double value) const;
};

struct OpfOptions {
    ReferenceMode mode = ReferenceMode::eliminated;
    /// Adds Vd_ref >= 0, which removes the sign-flipped copy V -> -V of
    /// every operating point.
    bool nonnegative_reference = true;
};

struct PolynomialProgram {
    VariableSpace vars;
    Polynomial objective;
    std::vector<PolyConstraint> constraints;
    int reference_bus = 0;

    int nvars() const { return vars.size(); }
    const std::vector<std::string>& variables() const { return vars.names(); }
    ReferenceMode mode() const { return vars.mode(); }
    /// Largest degree among objective and constraint polynomials.
    int degree() const;
    /// Worst violation max(0, -slack) over all constraints at a point.
    double max_violation(const Eigen::VectorXd& point) const;
};

PolynomialProgram assemble_opf(const Network& net, const OpfOptions& options = {});

} // namespace mopf
