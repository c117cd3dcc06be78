#include "mopf/polynomial.hpp"

#include <doctest.h>

#include <random>

using namespace mopf;

TEST_SUITE("polynomial") {

TEST_CASE("graded lex order") {
    const auto m = graded_monomials(3, 2);
    const std::vector<Exponent> expected{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0},
                                         {1, 1, 0}, {1, 0, 1}, {0, 2, 0}, {0, 1, 1}, {0, 0, 2}};
    CHECK(m == expected);
    CHECK(graded_monomials(3, 4).size() == binomial(7, 4));
    CHECK(graded_monomials(19, 2).size() == 210);
    CHECK(binomial(5, 0) == 1);
    CHECK(binomial(10, 3) == 120);
}

TEST_CASE("arithmetic") {
    const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
    const Polynomial p = (x + y) * (x - y);
    CHECK(p == x * x - y * y);
    CHECK(p.degree() == 2);
    CHECK(p.size() == 2);
    CHECK(p.coefficient({1, 1}) == 0.0);
    CHECK((p - p).is_zero());
    CHECK((2.0 * x).coefficient({1, 0}) == 2.0);
    CHECK((x * 0.0).is_zero());
    CHECK(((x + 1.0) - 1.0) == x);
    CHECK_THROWS_AS(x + Polynomial::variable(3, 0), Error);
}

TEST_CASE("evaluation matches direct expansion") {
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
        Polynomial p(3);
        for (const auto& e : graded_monomials(3, 4)) p.add_term(e, nd(rng));
        Eigen::Vector3d v(nd(rng), nd(rng), nd(rng));
        double direct = 0.0;
        for (const auto& [e, c] : p.terms()) {
            direct += c * std::pow(v(0), e[0]) * std::pow(v(1), e[1]) * std::pow(v(2), e[2]);
        }
        CHECK(p.evaluate(v) == doctest::Approx(direct).epsilon(1e-12));
        // product evaluates to product of values
        Polynomial q(3);
        for (const auto& e : graded_monomials(3, 2)) q.add_term(e, nd(rng));
        CHECK((p * q).evaluate(v) == doctest::Approx(p.evaluate(v) * q.evaluate(v)).epsilon(1e-10));
    }
}

TEST_CASE("moment index and functional") {
    const MomentIndex idx(3, 4);
    CHECK(idx.size() == 35);
    CHECK(idx.position({0, 0, 0}) == 0);
    CHECK(idx.linear_position(2) == 3);
    CHECK(idx.exponent(idx.position({1, 2, 1})) == Exponent{1, 2, 1});
    CHECK_THROWS_AS(idx.position({5, 0, 0}), Error);

    const Polynomial x = Polynomial::variable(3, 0), z = Polynomial::variable(3, 2);
    const Polynomial f = x * x * z - 0.5 * z + 3.0;
    const LinearExpr l = apply_functional(f, idx);
    CHECK(l.size() == 3);
    CHECK(l.coefficient(idx.position({2, 0, 1})) == 1.0);
    CHECK(l.coefficient(idx.position({0, 0, 1})) == -0.5);
    CHECK(l.coefficient(0) == 3.0);
    CHECK(l.to_string(idx) == "3*y_000 - 0.5*y_001 + y_201");
    CHECK_THROWS_AS(apply_functional(f * f, MomentIndex(3, 2)), Error);
}

TEST_CASE("lifted point turns the functional into evaluation") {
    std::mt19937 rng(5);
    std::normal_distribution<double> nd;
    const MomentIndex idx(4, 4);
    for (int t = 0; t < 20; ++t) {
        Eigen::Vector4d v(nd(rng), nd(rng), nd(rng), nd(rng));
        const Eigen::VectorXd y = lift_point(v, idx);
        CHECK(y(0) == 1.0);
        Polynomial p(4);
        for (const auto& e : graded_monomials(4, 4)) p.add_term(e, nd(rng));
        CHECK(apply_functional(p, idx).evaluate(y) == doctest::Approx(p.evaluate(v)).epsilon(1e-12));
    }
}

TEST_CASE("moment labels") {
    CHECK(moment_label({1, 2, 0}) == "y_120");
    CHECK(moment_label({10, 0}) == "y_10,0");
    CHECK(monomial_to_string({0, 0}) == "1");
}

}
