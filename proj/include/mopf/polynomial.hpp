#pragma once

// Sparse multivariate polynomials over the voltage components, the monomial
// index that numbers moment variables, and the substitution functional that
// replaces each monomial by its moment variable.

#include "mopf/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace mopf {

/// Exponent vector of a monomial, one entry per active variable.
using Exponent = std::vector<int>;

inline int total_degree(const Exponent& e) {
    return std::accumulate(e.begin(), e.end(), 0);
}

inline Exponent operator+(const Exponent& a, const Exponent& b) {
    Exponent out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

/// Graded lexicographic order: lower total degree first; within a degree,
/// larger powers of earlier variables first. With variables (Vd1, Vd2, Vq2)
/// the degree-2 block reads Vd1^2, Vd1Vd2, Vd1Vq2, Vd2^2, Vd2Vq2, Vq2^2.
struct GradedLexLess {
    bool operator()(const Exponent& a, const Exponent& b) const {
        const int da = total_degree(a);
        const int db = total_degree(b);
        if (da != db) return da < db;
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                            [](int x, int y) { return x > y; });
    }
};

/// All exponent vectors of exactly `degree` in `nvars` variables, in
/// graded-lex order.
inline std::vector<Exponent> monomials_of_degree(int nvars, int degree) {
    std::vector<Exponent> out;
    if (nvars == 0) {
        if (degree == 0) out.emplace_back();
        return out;
    }
    Exponent cur(nvars, 0);
    auto rec = [&](auto&& self, int var, int remaining) -> void {
        if (var == nvars - 1) {
            cur[var] = remaining;
            out.push_back(cur);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[var] = e;
            self(self, var + 1, remaining - e);
        }
        cur[var] = 0;
    };
    rec(rec, 0, degree);
    return out;
}

/// All exponent vectors of degree <= max_degree, graded-lex, constant first.
inline std::vector<Exponent> graded_monomials(int nvars, int max_degree) {
    std::vector<Exponent> out;
    for (int d = 0; d <= max_degree; ++d) {
        auto block = monomials_of_degree(nvars, d);
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

/// Binomial coefficient C(n, k) as a size.
inline std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
    return r;
}

inline std::string monomial_to_string(const Exponent& e, const std::vector<std::string>& names = {}) {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (!first) os << '*';
        first = false;
        if (i < names.size()) os << names[i];
        else os << 'x' << i + 1;
        if (e[i] > 1) os << '^' << e[i];
    }
    if (first) os << '1';
    return os.str();
}

/// Subscript label of a moment variable, e.g. "y_110" (digits separated by
/// commas once any exponent exceeds 9).
inline std::string moment_label(const Exponent& e) {
    const bool wide = std::any_of(e.begin(), e.end(), [](int v) { return v > 9; });
    std::string s = "y_";
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (wide && i > 0) s += ',';
        s += std::to_string(e[i]);
    }
    return s;
}

template <typename Scalar>
class BasicPolynomial {
public:
    using Terms = std::map<Exponent, Scalar, GradedLexLess>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    explicit BasicPolynomial(int nvars = 0) : nvars_(nvars) {}

    static BasicPolynomial constant(int nvars, Scalar c) {
        BasicPolynomial p(nvars);
        p.add_term(Exponent(nvars, 0), c);
        return p;
    }

    static BasicPolynomial variable(int nvars, int index, Scalar c = Scalar(1)) {
        BasicPolynomial p(nvars);
        Exponent e(nvars, 0);
        e.at(index) = 1;
        p.add_term(e, c);
        return p;
    }

    static BasicPolynomial monomial(const Exponent& e, Scalar c = Scalar(1)) {
        BasicPolynomial p(static_cast<int>(e.size()));
        p.add_term(e, c);
        return p;
    }

    int nvars() const { return nvars_; }
    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    int degree() const {
        // Graded order: the last key has maximal degree.
        return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first);
    }

    Scalar coefficient(const Exponent& e) const {
        auto it = terms_.find(e);
        return it == terms_.end() ? Scalar(0) : it->second;
    }

    /// Adds c * x^e, dropping the term if the coefficient becomes exactly zero.
    void add_term(const Exponent& e, Scalar c) {
        if (static_cast<int>(e.size()) != nvars_) {
            throw Error("monomial length " + std::to_string(e.size()) + " does not match " +
                        std::to_string(nvars_) + " variables");
        }
        if (c == Scalar(0)) return;
        auto [it, inserted] = terms_.emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == Scalar(0)) terms_.erase(it);
        }
    }

    BasicPolynomial& operator+=(const BasicPolynomial& q) {
        check_space(q);
        for (const auto& [e, c] : q.terms_) add_term(e, c);
        return *this;
    }

    BasicPolynomial& operator-=(const BasicPolynomial& q) {
        check_space(q);
        for (const auto& [e, c] : q.terms_) add_term(e, -c);
        return *this;
    }

    BasicPolynomial& operator+=(Scalar c) {
        add_term(Exponent(nvars_, 0), c);
        return *this;
    }

    BasicPolynomial& operator-=(Scalar c) { return *this += -c; }

    BasicPolynomial& operator*=(Scalar c) {
        if (c == Scalar(0)) {
            terms_.clear();
            return *this;
        }
        for (auto it = terms_.begin(); it != terms_.end();) {
            it->second *= c;
            if (it->second == Scalar(0)) it = terms_.erase(it);
            else ++it;
        }
        return *this;
    }

    friend BasicPolynomial operator+(BasicPolynomial p, const BasicPolynomial& q) { return p += q; }
    friend BasicPolynomial operator-(BasicPolynomial p, const BasicPolynomial& q) { return p -= q; }
    friend BasicPolynomial operator+(BasicPolynomial p, Scalar c) { return p += c; }
    friend BasicPolynomial operator-(BasicPolynomial p, Scalar c) { return p -= c; }
    friend BasicPolynomial operator-(Scalar c, const BasicPolynomial& p) { return (-p) += c; }
    friend BasicPolynomial operator*(BasicPolynomial p, Scalar c) { return p *= c; }
    friend BasicPolynomial operator*(Scalar c, BasicPolynomial p) { return p *= c; }
    friend BasicPolynomial operator-(BasicPolynomial p) { return p *= Scalar(-1); }

    friend BasicPolynomial operator*(const BasicPolynomial& p, const BasicPolynomial& q) {
        p.check_space(q);
        BasicPolynomial out(p.nvars_);
        for (const auto& [ea, ca] : p.terms_) {
            for (const auto& [eb, cb] : q.terms_) out.add_term(ea + eb, ca * cb);
        }
        return out;
    }

    friend bool operator==(const BasicPolynomial& a, const BasicPolynomial& b) {
        return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
    }

    /// Direct sum of coefficient times monomial value.
    template <typename Derived>
    Scalar evaluate(const Eigen::MatrixBase<Derived>& point) const {
        if (point.size() != nvars_) {
            throw Error("evaluation point has " + std::to_string(point.size()) +
                        " entries, polynomial has " + std::to_string(nvars_) + " variables");
        }
        Scalar sum(0);
        for (const auto& [e, c] : terms_) {
            Scalar term = c;
            for (int i = 0; i < nvars_; ++i) {
                for (int k = 0; k < e[i]; ++k) term *= point(i);
            }
            sum += term;
        }
        return sum;
    }

    std::string to_string(const std::vector<std::string>& names = {}) const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [e, c] : terms_) {
            if (!first) os << (c < Scalar(0) ? " - " : " + ");
            else if (c < Scalar(0)) os << '-';
            first = false;
            os << std::abs(c) << '*' << monomial_to_string(e, names);
        }
        return os.str();
    }

private:
    void check_space(const BasicPolynomial& q) const {
        if (q.nvars_ != nvars_) {
            throw Error("polynomials live in different variable spaces (" +
                        std::to_string(nvars_) + " vs " + std::to_string(q.nvars_) + ")");
        }
    }

    int nvars_;
    Terms terms_;
};

using Polynomial = BasicPolynomial<double>;

template <typename Scalar, typename Derived>
Scalar poly_eval(const BasicPolynomial<Scalar>& p, const Eigen::MatrixBase<Derived>& point) {
    return p.evaluate(point);
}

/// Numbering of all monomials of degree <= max_degree; position 0 is the
/// constant monomial.
class MomentIndex {
public:
    MomentIndex() = default;
    MomentIndex(int nvars, int max_degree)
        : nvars_(nvars), max_degree_(max_degree), basis_(graded_monomials(nvars, max_degree)) {
        for (std::size_t i = 0; i < basis_.size(); ++i) lookup_.emplace(basis_[i], i);
    }

    int nvars() const { return nvars_; }
    int max_degree() const { return max_degree_; }
    std::size_t size() const { return basis_.size(); }
    const std::vector<Exponent>& exponents() const { return basis_; }
    const Exponent& exponent(std::size_t position) const { return basis_.at(position); }

    bool contains(const Exponent& e) const { return lookup_.count(e) != 0; }

    std::size_t position(const Exponent& e) const {
        auto it = lookup_.find(e);
        if (it == lookup_.end()) {
            throw Error("monomial " + monomial_to_string(e) + " (degree " +
                        std::to_string(total_degree(e)) + ") is outside the moment index of degree " +
                        std::to_string(max_degree_));
        }
        return it->second;
    }

    /// Position of the degree-1 monomial of a variable.
    std::size_t linear_position(int var) const {
        Exponent e(nvars_, 0);
        e.at(var) = 1;
        return position(e);
    }

private:
    int nvars_ = 0;
    int max_degree_ = 0;
    std::vector<Exponent> basis_;
    std::map<Exponent, std::size_t, GradedLexLess> lookup_;
};

/// Sparse linear form over moment-variable positions.
class LinearExpr {
public:
    using Terms = std::map<std::size_t, double>;

    LinearExpr() = default;

    static LinearExpr single(std::size_t var, double coef = 1.0) {
        LinearExpr e;
        e.add(var, coef);
        return e;
    }

    void add(std::size_t var, double coef) {
        if (coef == 0.0) return;
        auto [it, inserted] = terms_.emplace(var, coef);
        if (!inserted) {
            it->second += coef;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    LinearExpr& operator+=(const LinearExpr& o) {
        for (const auto& [v, c] : o.terms_) add(v, c);
        return *this;
    }

    LinearExpr& operator*=(double s) {
        if (s == 0.0) {
            terms_.clear();
            return *this;
        }
        for (auto& [v, c] : terms_) c *= s;
        return *this;
    }

    friend LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
    friend LinearExpr operator*(double s, LinearExpr a) { return a *= s; }
    friend bool operator==(const LinearExpr& a, const LinearExpr& b) { return a.terms_ == b.terms_; }

    const Terms& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    double coefficient(std::size_t var) const {
        auto it = terms_.find(var);
        return it == terms_.end() ? 0.0 : it->second;
    }

    std::size_t max_variable() const { return terms_.empty() ? 0 : terms_.rbegin()->first; }

    template <typename Derived>
    double evaluate(const Eigen::MatrixBase<Derived>& y) const {
        double s = 0.0;
        for (const auto& [v, c] : terms_) s += c * y(static_cast<Eigen::Index>(v));
        return s;
    }

    double max_abs_coefficient() const {
        double m = 0.0;
        for (const auto& [v, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    std::string to_string(const MomentIndex& idx) const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [v, c] : terms_) {
            if (!first) os << (c < 0 ? " - " : " + ");
            else if (c < 0) os << '-';
            first = false;
            if (std::abs(c) != 1.0) os << std::abs(c) << '*';
            os << moment_label(idx.exponent(v));
        }
        return os.str();
    }

private:
    Terms terms_;
};

/// Replaces every monomial x^a of p by the moment variable y_a.
template <typename Scalar>
LinearExpr apply_functional(const BasicPolynomial<Scalar>& p, const MomentIndex& idx) {
    if (p.nvars() != idx.nvars()) {
        throw Error("polynomial has " + std::to_string(p.nvars()) + " variables, index has " +
                    std::to_string(idx.nvars()));
    }
    LinearExpr out;
    for (const auto& [e, c] : p.terms()) {
        if (total_degree(e) > idx.max_degree()) {
            throw Error("monomial " + monomial_to_string(e) + " of degree " +
                        std::to_string(total_degree(e)) + " exceeds moment degree " +
                        std::to_string(idx.max_degree()));
        }
        out.add(idx.position(e), static_cast<double>(c));
    }
    return out;
}

/// Moment vector of the Dirac measure at `point`: y_a = point^a.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> lift_point(
    const Eigen::MatrixBase<Derived>& point, const MomentIndex& idx) {
    using Scalar = typename Derived::Scalar;
    if (point.size() != idx.nvars()) {
        throw Error("lift_point: point has " + std::to_string(point.size()) + " entries, index has " +
                    std::to_string(idx.nvars()) + " variables");
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Exponent& e = idx.exponent(i);
        Scalar v(1);
        for (int k = 0; k < idx.nvars(); ++k) {
            for (int p = 0; p < e[k]; ++p) v *= point(k);
        }
        y(static_cast<Eigen::Index>(i)) = v;
    }
    return y;
}

} // namespace mopf
