#include "mopf/sampling.hpp"

#include "mopf/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <thread>

namespace mopf {

namespace {

double parse_double(const std::string& s, const std::string& spec) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) {
        throw ValidationError("grid spec '" + spec + "': '" + s + "' is not a number");
    }
    return v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace

double GridAxis::value(int i) const {
    if (i == steps - 1) return max;
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

GridAxis parse_grid_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("grid spec '" + spec + "' must look like VAR=min:max:steps");
    }
    GridAxis axis;
    axis.variable = spec.substr(0, eq);
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) {
        throw ValidationError("grid spec '" + spec + "' must look like VAR=min:max:steps");
    }
    axis.min = parse_double(parts[0], spec);
    axis.max = parse_double(parts[1], spec);
    int steps = 0;
    auto [p, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), steps);
    if (ec != std::errc() || p != parts[2].data() + parts[2].size()) {
        throw ValidationError("grid spec '" + spec + "': steps must be an integer");
    }
    if (steps < 2) throw ValidationError("grid spec '" + spec + "': steps must be at least 2");
    if (!(axis.min <= axis.max)) throw ValidationError("grid spec '" + spec + "': min > max");
    axis.steps = steps;
    return axis;
}

std::size_t SampleTable::feasible_count() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const SampleRow& r) { return r.feasible; }));
}

SampleTable sample_space(const PolynomialProgram& pp, const std::vector<GridAxis>& axes,
                         const SampleOptions& options) {
    const int n = pp.nvars();
    if (n > kMaxSampledVariables) {
        throw ValidationError("grid sampling supports at most " +
                              std::to_string(kMaxSampledVariables) + " free variables, the case has " +
                              std::to_string(n) + "; use a dedicated local solver or a coarser model");
    }
    const auto& names = pp.variables();
    std::vector<const GridAxis*> by_var(static_cast<std::size_t>(n), nullptr);
    for (const auto& axis : axes) {
        const auto it = std::find(names.begin(), names.end(), axis.variable);
        if (it == names.end()) throw ValidationError("grid variable '" + axis.variable + "' is unknown");
        auto& slot = by_var[static_cast<std::size_t>(it - names.begin())];
        if (slot) throw ValidationError("grid variable '" + axis.variable + "' given twice");
        slot = &axis;
    }
    for (int i = 0; i < n; ++i) {
        if (!by_var[static_cast<std::size_t>(i)]) {
            throw ValidationError("missing grid axis for variable '" + names[static_cast<std::size_t>(i)] + "'");
        }
    }

    SampleTable table;
    table.variables = names;
    for (const auto& c : pp.constraints) table.constraint_labels.push_back(c.label);
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
        table.shape.push_back(by_var[static_cast<std::size_t>(i)]->steps);
        total *= static_cast<std::size_t>(table.shape.back());
    }
    table.rows.resize(total);

    auto evaluate = [&](std::size_t row) {
        Eigen::VectorXd x(n);
        std::size_t rem = row;
        for (int i = n - 1; i >= 0; --i) {
            const auto steps = static_cast<std::size_t>(table.shape[static_cast<std::size_t>(i)]);
            x(i) = by_var[static_cast<std::size_t>(i)]->value(static_cast<int>(rem % steps));
            rem /= steps;
        }
        SampleRow& r = table.rows[row];
        r.point = x;
        r.cost = pp.objective.evaluate(x);
        r.slack_min = kInf;
        for (const auto& c : pp.constraints) {
            const double s = c.slack(c.poly.evaluate(x));
            r.slack_min = std::min(r.slack_min, s);
            if (options.constraint_slacks) r.slacks.push_back(s);
        }
        r.feasible = r.slack_min >= -options.feasibility_tolerance;
    };

    const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    if (total < 4096 || workers == 1) {
        for (std::size_t i = 0; i < total; ++i) evaluate(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < total; i += workers) evaluate(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    return table;
}

std::string to_csv(const SampleTable& table, const SampleOptions& options) {
    std::string out;
    for (const auto& v : table.variables) out += v + ",";
    out += "feasible,cost,slack_min";
    if (options.squared) {
        for (const auto& v : table.variables) out += "," + v + "^2";
    }
    if (options.constraint_slacks) {
        for (const auto& l : table.constraint_labels) out += ",slack_" + l;
    }
    out += "\n";
    for (const auto& r : table.rows) {
        for (Eigen::Index i = 0; i < r.point.size(); ++i) out += fmt(r.point(i)) + ",";
        out += r.feasible ? "1" : "0";
        out += "," + fmt(r.cost) + "," + fmt(r.slack_min);
        if (options.squared) {
            for (Eigen::Index i = 0; i < r.point.size(); ++i) out += "," + fmt(r.point(i) * r.point(i));
        }
        for (double s : r.slacks) out += "," + fmt(s);
        out += "\n";
    }
    return out;
}

std::string plot_script(const std::string& csv_path, const SampleTable& table) {
    std::string axes;
    for (std::size_t i = 0; i < table.variables.size() && i < 3; ++i) {
        if (i) axes += ", ";
        axes += "'" + table.variables[i] + "'";
    }
    std::string s;
    s += "import pandas as pd\n";
    s += "import matplotlib.pyplot as plt\n\n";
    s += "df = pd.read_csv('" + csv_path + "')\n";
    s += "ok = df[df.feasible == 1]\n";
    s += "cols = [" + axes + "]\n";
    s += "fig = plt.figure()\n";
    s += "if len(cols) >= 3:\n";
    s += "    ax = fig.add_subplot(projection='3d')\n";
    s += "    ax.scatter(ok[cols[0]], ok[cols[1]], ok[cols[2]], c=ok.cost, s=2)\n";
    s += "    ax.set_zlabel(cols[2])\n";
    s += "elif len(cols) == 2:\n";
    s += "    ax = fig.add_subplot()\n";
    s += "    ax.scatter(ok[cols[0]], ok[cols[1]], c=ok.cost, s=2)\n";
    s += "else:\n";
    s += "    ax = fig.add_subplot()\n";
    s += "    ax.scatter(ok[cols[0]], ok.cost, s=2)\n";
    s += "ax.set_xlabel(cols[0])\n";
    s += "if len(cols) >= 2:\n";
    s += "    ax.set_ylabel(cols[1])\n";
    s += "plt.savefig('" + csv_path + ".png', dpi=150)\n";
    return s;
}

} // namespace mopf
