#include "mopf/error.hpp"
#include "mopf/sdp.hpp"

#include <charconv>
#include <sstream>

namespace mopf {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_block(std::ostringstream& os, const LmiBlock& b, int block_no, double sign) {
    for (int i = 0; i < b.dim; ++i) {
        for (int j = i; j < b.dim; ++j) {
            const double f0 = -sign * b.constant(i, j);
            if (f0 != 0.0) {
                os << "0 " << block_no << ' ' << i + 1 << ' ' << j + 1 << ' ' << format_double(f0)
                   << '\n';
            }
        }
    }
    for (const auto& e : b.entries) {
        os << e.var + 1 << ' ' << block_no << ' ' << e.row + 1 << ' ' << e.col + 1 << ' '
           << format_double(sign * e.value) << '\n';
    }
}

} // namespace

std::string export_sdpa(const SdpProblem& prob) {
    const LmiForm lmi = compile_lmi(prob);
    std::ostringstream os;

    os << "\"moment relaxation of order " << prob.order << " in variables";
    for (const auto& name : prob.variable_names) os << ' ' << name;
    os << '\n';
    os << "\"form: min c'x s.t. sum_k x_k F_k - F_0 psd; objective constant "
       << format_double(lmi.cost_constant) << '\n';
    for (std::size_t k = 0; k < lmi.free_vars.size(); ++k) {
        os << "\"x" << k + 1 << " = " << moment_label(prob.index.exponent(lmi.free_vars[k])) << '\n';
    }
    int block_no = 0;
    for (const auto& b : lmi.psd) os << "\"block " << ++block_no << ": " << b.label << '\n';
    for (const auto& b : lmi.zero) {
        os << "\"block " << ++block_no << ": " << b.label << " (+)\n";
        os << "\"block " << ++block_no << ": " << b.label << " (-)\n";
    }

    os << lmi.free_vars.size() << '\n';
    os << lmi.psd.size() + 2 * lmi.zero.size() << '\n';
    bool first = true;
    auto size_sep = [&]() -> const char* {
        if (first) {
            first = false;
            return "";
        }
        return " ";
    };
    for (const auto& b : lmi.psd) os << size_sep() << b.dim;
    for (const auto& b : lmi.zero) os << size_sep() << b.dim << ' ' << b.dim;
    os << '\n';
    for (Eigen::Index k = 0; k < lmi.cost.size(); ++k) {
        if (k) os << ' ';
        os << format_double(lmi.cost(k));
    }
    os << '\n';

    block_no = 0;
    for (const auto& b : lmi.psd) write_block(os, b, ++block_no, 1.0);
    for (const auto& b : lmi.zero) {
        write_block(os, b, ++block_no, 1.0);
        write_block(os, b, ++block_no, -1.0);
    }
    return os.str();
}

SdpaData parse_sdpa(const std::string& text) {
    SdpaData data;
    std::istringstream in(text);
    std::string line;
    std::string body;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!header_done && !line.empty() && (line[0] == '"' || line[0] == '*')) {
            data.comments.push_back(line.substr(1));
            continue;
        }
        header_done = true;
        // "2 =mDIM" style annotations
        if (const auto eq = line.find('='); eq != std::string::npos) line.erase(eq);
        for (char& ch : line) {
            if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
        }
        body += line;
        body += '\n';
    }

    std::istringstream tok(body);
    auto next_int = [&](const char* what) {
        long long v = 0;
        if (!(tok >> v)) throw ParseError(std::string("SDPA: expected ") + what);
        return static_cast<int>(v);
    };
    auto next_double = [&](const char* what) {
        std::string s;
        if (!(tok >> s)) throw ParseError(std::string("SDPA: expected ") + what);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ParseError("SDPA: bad number '" + s + "' for " + what);
        }
        return v;
    };

    data.variable_count = next_int("number of variables");
    const int nblocks = next_int("number of blocks");
    if (data.variable_count < 0 || nblocks < 0) throw ParseError("SDPA: negative counts");
    for (int b = 0; b < nblocks; ++b) data.block_sizes.push_back(next_int("block size"));
    data.objective.resize(data.variable_count);
    for (int k = 0; k < data.variable_count; ++k) data.objective(k) = next_double("objective entry");

    std::string first;
    while (tok >> first) {
        SdpaEntry e;
        try {
            e.matrix = std::stoi(first);
        } catch (const std::exception&) {
            throw ParseError("SDPA: bad matrix number '" + first + "'");
        }
        e.block = next_int("block number");
        e.row = next_int("row");
        e.col = next_int("column");
        e.value = next_double("entry value");
        if (e.matrix < 0 || e.matrix > data.variable_count || e.block < 1 || e.block > nblocks) {
            throw ParseError("SDPA: entry index out of range");
        }
        const int dim = std::abs(data.block_sizes[e.block - 1]);
        if (e.row < 1 || e.col < 1 || e.row > dim || e.col > dim) {
            throw ParseError("SDPA: entry position out of range");
        }
        data.entries.push_back(e);
    }
    return data;
}

} // namespace mopf
