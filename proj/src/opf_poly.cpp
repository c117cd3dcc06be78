#include "mopf/opf_poly.hpp"

#include <algorithm>
#include <cmath>

namespace mopf {

std::string to_string(ReferenceMode mode) {
    return mode == ReferenceMode::eliminated ? "eliminated" : "constrained";
}

std::string to_string(ConstraintKind kind) {
    switch (kind) {
    case ConstraintKind::active_power: return "active-power";
    case ConstraintKind::reactive_power: return "reactive-power";
    case ConstraintKind::voltage: return "voltage";
    case ConstraintKind::flow: return "flow";
    case ConstraintKind::reference: return "reference";
    }
    return "unknown";
}

VariableSpace::VariableSpace(const Network& net, ReferenceMode mode) : mode_(mode) {
    const int n = net.bus_count();
    vd_.assign(n, -1);
    vq_.assign(n, -1);
    for (int k = 0; k < n; ++k) {
        vd_[k] = static_cast<int>(names_.size());
        names_.push_back("Vd" + std::to_string(net.buses()[k].id));
    }
    for (int k = 0; k < n; ++k) {
        if (mode == ReferenceMode::eliminated && k == net.reference_index()) continue;
        vq_[k] = static_cast<int>(names_.size());
        names_.push_back("Vq" + std::to_string(net.buses()[k].id));
    }
}

Polynomial VariableSpace::vd_poly(int bus) const {
    return vd_.at(bus) < 0 ? Polynomial(size()) : Polynomial::variable(size(), vd_[bus]);
}

Polynomial VariableSpace::vq_poly(int bus) const {
    return vq_.at(bus) < 0 ? Polynomial(size()) : Polynomial::variable(size(), vq_[bus]);
}

Eigen::VectorXd VariableSpace::pack(const Eigen::VectorXd& vd, const Eigen::VectorXd& vq) const {
    Eigen::VectorXd x(size());
    for (int k = 0; k < bus_count(); ++k) {
        if (vd_[k] >= 0) x(vd_[k]) = vd(k);
        if (vq_[k] >= 0) x(vq_[k]) = vq(k);
    }
    return x;
}

void VariableSpace::unpack(const Eigen::VectorXd& point, Eigen::VectorXd& vd,
                           Eigen::VectorXd& vq) const {
    vd = Eigen::VectorXd::Zero(bus_count());
    vq = Eigen::VectorXd::Zero(bus_count());
    for (int k = 0; k < bus_count(); ++k) {
        if (vd_[k] >= 0) vd(k) = point(vd_[k]);
        if (vq_[k] >= 0) vq(k) = point(vq_[k]);
    }
}

std::vector<BusInjection> build_injection_polys(const Network& net, const VariableSpace& vars) {
    const Admittance y = admittance_matrix(net);
    const int n = net.bus_count();
    const int nv = vars.size();
    std::vector<BusInjection> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        // Real and imaginary parts of the injected current (YV)_k.
        Polynomial re(nv);
        Polynomial im(nv);
        for (int i = 0; i < n; ++i) {
            const double g = y.G(i, k);
            const double b = y.B(i, k);
            if (g == 0.0 && b == 0.0) continue;
            const Polynomial vdi = vars.vd_poly(i);
            const Polynomial vqi = vars.vq_poly(i);
            re += g * vdi - b * vqi;
            im += b * vdi + g * vqi;
        }
        const Polynomial vdk = vars.vd_poly(k);
        const Polynomial vqk = vars.vq_poly(k);
        BusInjection inj{vdk * re + vqk * im, vqk * re - vdk * im};
        inj.p += net.p_load_pu(k);
        inj.q += net.q_load_pu(k);
        out.push_back(std::move(inj));
    }
    return out;
}

Polynomial build_voltage_poly(const Network& net, const VariableSpace& vars, int bus) {
    (void)net;
    const Polynomial vd = vars.vd_poly(bus);
    const Polynomial vq = vars.vq_poly(bus);
    return vd * vd + vq * vq;
}

namespace {

BranchFlow flow_at(const VariableSpace& vars, int l, int m, double g, double b, double b_sh) {
    const Polynomial vdl = vars.vd_poly(l);
    const Polynomial vql = vars.vq_poly(l);
    const Polynomial vdm = vars.vd_poly(m);
    const Polynomial vqm = vars.vq_poly(m);
    const Polynomial cross = vdl * vqm - vdm * vql;
    const Polynomial mag_l = vdl * vdl + vql * vql;
    const Polynomial dot = vdl * vdm + vql * vqm;
    BranchFlow f;
    f.p = b * cross + g * (mag_l - dot);
    f.q = b * (dot - mag_l) + g * cross - (0.5 * b_sh) * mag_l;
    f.s2 = f.p * f.p + f.q * f.q;
    return f;
}

} // namespace

FlowPolys build_flow_polys(const Network& net, const VariableSpace& vars, int branch) {
    const BranchParams p = net.branch_params(branch);
    return {flow_at(vars, p.from_index, p.to_index, p.g, p.b, p.b_sh),
            flow_at(vars, p.to_index, p.from_index, p.g, p.b, p.b_sh)};
}

Polynomial build_cost_poly(const Network& net, const VariableSpace& vars) {
    const auto inj = build_injection_polys(net, vars);
    Polynomial cost(vars.size());
    for (int k = 0; k < net.bus_count(); ++k) {
        if (net.generator_at(k) < 0) continue;
        const CostPu c = net.cost_pu(k);
        if (c.c2 != 0.0) cost += c.c2 * (inj[k].p * inj[k].p);
        cost += c.c1 * inj[k].p;
        cost += c.c0;
    }
    return cost;
}

double PolyConstraint::slack(double value) const {
    double s = kInf;
    if (std::isfinite(lower)) s = std::min(s, value - lower);
    if (std::isfinite(upper)) s = std::min(s, upper - value);
    return s;
}

int PolynomialProgram::degree() const {
    int d = objective.degree();
    for (const auto& c : constraints) d = std::max(d, c.poly.degree());
    return d;
}

double PolynomialProgram::max_violation(const Eigen::VectorXd& point) const {
    double worst = 0.0;
    for (const auto& c : constraints) {
        worst = std::max(worst, -c.slack(c.poly.evaluate(point)));
    }
    return worst;
}

PolynomialProgram assemble_opf(const Network& net, const OpfOptions& options) {
    PolynomialProgram pp;
    pp.vars = VariableSpace(net, options.mode);
    pp.reference_bus = net.reference_index();
    pp.objective = build_cost_poly(net, pp.vars);

    const auto inj = build_injection_polys(net, pp.vars);
    for (int k = 0; k < net.bus_count(); ++k) {
        const std::string id = std::to_string(net.buses()[k].id);
        const BusLimits lim = net.limits_pu(k);
        pp.constraints.push_back({inj[k].p, lim.p_min, lim.p_max, ConstraintKind::active_power, "P" + id});
        pp.constraints.push_back({inj[k].q, lim.q_min, lim.q_max, ConstraintKind::reactive_power, "Q" + id});
    }
    for (int k = 0; k < net.bus_count(); ++k) {
        const Bus& bus = net.buses()[k];
        pp.constraints.push_back({build_voltage_poly(net, pp.vars, k), bus.v_min * bus.v_min,
                                  bus.v_max * bus.v_max, ConstraintKind::voltage,
                                  "V" + std::to_string(bus.id)});
    }
    for (int l = 0; l < static_cast<int>(net.branches().size()); ++l) {
        const Branch& br = net.branches()[l];
        if (br.s_max <= 0.0) continue;
        const double smax = br.s_max / net.base_mva();
        const FlowPolys f = build_flow_polys(net, pp.vars, l);
        const std::string from = std::to_string(br.from);
        const std::string to = std::to_string(br.to);
        pp.constraints.push_back({f.from_to.s2, -kInf, smax * smax, ConstraintKind::flow,
                                  "S" + from + "-" + to});
        pp.constraints.push_back({f.to_from.s2, -kInf, smax * smax, ConstraintKind::flow,
                                  "S" + to + "-" + from});
    }

    const int ref = net.reference_index();
    const std::string ref_id = std::to_string(net.buses()[ref].id);
    if (options.mode == ReferenceMode::constrained) {
        pp.constraints.push_back({pp.vars.vq_poly(ref), 0.0, 0.0, ConstraintKind::reference,
                                  "Vq" + ref_id});
    }
    if (options.nonnegative_reference) {
        pp.constraints.push_back({pp.vars.vd_poly(ref), 0.0, kInf, ConstraintKind::reference,
                                  "Vd" + ref_id});
    }
    return pp;
}

} // namespace mopf
