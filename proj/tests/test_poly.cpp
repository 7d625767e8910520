#include <doctest.h>

#include "polyctl/poly.hpp"
#include "test_util.hpp"

using namespace polyctl;
using testutil::mono2;

TEST_CASE("like terms merge and products add exponents") {
    Polynomial a = mono2(3, 0, 1.0);
    Polynomial s = a + a;
    CHECK(s.term_count() == 1);
    CHECK(s.coeff(Monomial({3, 0})) == doctest::Approx(2.0));

    Polynomial x1 = Polynomial::variable(2, 0);
    Polynomial x2sq = mono2(0, 2, 1.0);
    Polynomial p = x1 * x2sq;
    CHECK(p.term_count() == 1);
    CHECK(p.coeff(Monomial({1, 2})) == doctest::Approx(1.0));
}

TEST_CASE("product chain reproduces the benchmark drift component") {
    // f1(x) = -x1^3 + x1 x2^2 assembled from variable products
    Polynomial x1 = Polynomial::variable(2, 0);
    Polynomial x2 = Polynomial::variable(2, 1);
    Polynomial f1 = -(x1 * x1 * x1) + x1 * x2 * x2;
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        auto pt = testutil::random_point(2, 3.0, rng);
        double want = -pt[0] * pt[0] * pt[0] + pt[0] * pt[1] * pt[1];
        CHECK(f1.eval(pt) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(f1.eval(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("evaluation basics") {
    CHECK(mono2(2, 1, 1.0).eval(std::vector<double>{2.0, -2.0}) == doctest::Approx(-8.0));
    auto lib = testutil::cubic2d_library();
    std::vector<double> origin{0.0, 0.0};
    for (auto& z : lib.Z) CHECK(z.eval(origin) == 0.0);
    CHECK_THROWS_AS(mono2(1, 0, 1.0).eval(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("zero polynomial arithmetic identities") {
    Polynomial z = Polynomial::zero(2);
    Polynomial p = mono2(1, 1, 2.5);
    CHECK((p + z - p).is_zero());
    CHECK((p * z).is_zero());
    CHECK(z.degree() == 0);
    CHECK(z.nvars() == 2);
}

TEST_CASE("mul/eval compatibility on random pairs") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        Polynomial a = testutil::random_poly(2, 4, 6, rng);
        Polynomial b = testutil::random_poly(2, 4, 6, rng);
        auto pt = testutil::random_point(2, 2.0, rng);
        double lhs = (a * b).eval(pt);
        double rhs = a.eval(pt) * b.eval(pt);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
    }
}

TEST_CASE("jacobian closed forms") {
    std::vector<Polynomial> id{Polynomial::variable(2, 0), Polynomial::variable(2, 1)};
    PolyMatrix j1 = jacobian(id);
    CHECK(j1.at(0, 0).coeff(Monomial({0, 0})) == doctest::Approx(1.0));
    CHECK(j1.at(0, 1).is_zero());
    CHECK(j1.at(1, 0).is_zero());

    std::vector<Polynomial> sq{mono2(2, 0, 1.0), mono2(0, 2, 1.0)};
    PolyMatrix j2 = jacobian(sq);
    CHECK(j2.at(0, 0).coeff(Monomial({1, 0})) == doctest::Approx(2.0));
    CHECK(j2.at(1, 1).coeff(Monomial({0, 1})) == doctest::Approx(2.0));
    CHECK(j2.at(0, 1).is_zero());

    auto lib = testutil::cubic2d_library();
    PolyMatrix j3 = jacobian(lib.Z);
    CHECK(j3.rows == 4);
    CHECK(j3.cols == 2);
    // row 2 (x1^2 x2): (2 x1 x2, x1^2)
    CHECK(j3.at(1, 0).coeff(Monomial({1, 1})) == doctest::Approx(2.0));
    CHECK(j3.at(1, 1).coeff(Monomial({2, 0})) == doctest::Approx(1.0));
}

TEST_CASE("jacobian agrees with central finite differences") {
    std::mt19937_64 rng(17);
    std::vector<Polynomial> v;
    for (int i = 0; i < 3; ++i) v.push_back(testutil::random_poly(2, 4, 8, rng));
    PolyMatrix jac = jacobian(v);
    const double h = 1e-5;
    for (int t = 0; t < 50; ++t) {
        auto pt = testutil::random_point(2, 2.0, rng);
        for (int i = 0; i < 3; ++i)
            for (int var = 0; var < 2; ++var) {
                auto hi = pt, lo = pt;
                hi[var] += h;
                lo[var] -= h;
                double fd = (v[i].eval(hi) - v[i].eval(lo)) / (2 * h);
                double sym = jac.at(i, var).eval(pt);
                CHECK(std::abs(sym - fd) <= 1e-5 * (1.0 + std::abs(fd)));
            }
    }
}

TEST_CASE("gradient of quadratic form") {
    std::vector<Polynomial> zh{Polynomial::variable(2, 0), Polynomial::variable(2, 1)};
    auto g = gradient_of_quadratic_form(zh, Eigen::MatrixXd::Identity(2, 2));
    CHECK(g[0].coeff(Monomial({1, 0})) == doctest::Approx(2.0));
    CHECK(g[1].coeff(Monomial({0, 1})) == doctest::Approx(2.0));

    std::vector<Polynomial> zq{mono2(2, 0, 1.0), mono2(0, 2, 1.0)};
    auto gq = gradient_of_quadratic_form(zq, Eigen::MatrixXd::Identity(2, 2));
    CHECK(gq[0].coeff(Monomial({3, 0})) == doctest::Approx(4.0));
    CHECK(gq[1].coeff(Monomial({0, 3})) == doctest::Approx(4.0));

    // random positive definite P against finite differences of the evaluated form
    std::mt19937_64 rng(23);
    Eigen::MatrixXd R = Eigen::MatrixXd::Random(2, 2);
    Eigen::MatrixXd P = R * R.transpose() + 0.5 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Pinv = P.inverse();
    Pinv = 0.5 * (Pinv + Pinv.transpose()).eval();
    std::vector<Polynomial> zmix{testutil::mono2(1, 0, 1.0) + testutil::mono2(0, 2, 0.5),
                                 testutil::mono2(0, 1, 1.0)};
    auto grad = gradient_of_quadratic_form(zmix, Pinv);
    auto V = [&](const std::vector<double>& x) {
        Eigen::Vector2d z(zmix[0].eval(x), zmix[1].eval(x));
        return (z.transpose() * Pinv * z).value();
    };
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
        auto pt = testutil::random_point(2, 1.5, rng);
        for (int var = 0; var < 2; ++var) {
            auto hi = pt, lo = pt;
            hi[var] += h;
            lo[var] -= h;
            double fd = (V(hi) - V(lo)) / (2 * h);
            CHECK(std::abs(grad[var].eval(pt) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("library validation enforces the structural assumptions") {
    auto lib = testutil::cubic2d_library();
    CHECK_NOTHROW(lib.validate());

    auto bad = lib;
    bad.Z[0].add_term(Monomial({0, 0}), 0.5);  // constant term violates Z(0) = 0
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    auto zh = testutil::cubic2d_library_zhat_quadratic();
    CHECK_NOTHROW(zh.validate());  // H * Zhat reproduces Z coefficientwise

    auto broken = zh;
    broken.H->at(0, 0) = testutil::mono2(1, 0, 0.9);
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("graded lex ordering is total and deterministic") {
    Monomial a({2, 0}), b({0, 2}), c({1, 0}), unit({0, 0});
    CHECK(unit < c);
    CHECK(c < a);
    CHECK(b < a);      // same degree: lexicographic on exponents
    CHECK(!(a < a));
    Polynomial p = mono2(2, 0, 1.0) + mono2(0, 2, 1.0) + mono2(1, 0, 1.0);
    std::vector<int> degs;
    for (auto& [m, cc] : p.terms()) degs.push_back(m.degree());
    CHECK(std::is_sorted(degs.begin(), degs.end()));
}

TEST_CASE("lift and substitute") {
    Polynomial p = mono2(1, 2, 3.0);
    std::vector<int> map{0, 2};
    Polynomial q = p.lifted(4, map);
    CHECK(q.nvars() == 4);
    CHECK(q.coeff(Monomial({1, 0, 2, 0})) == doctest::Approx(3.0));
    Polynomial r = q.substituted(2, 2.0);
    CHECK(r.coeff(Monomial({1, 0, 0, 0})) == doctest::Approx(12.0));
}

TEST_CASE("norm square powers expand |x|^{2k}") {
    Polynomial s = norm_square_power(2, 0, 2, 2);  // (x1^2 + x2^2)^2
    CHECK(s.coeff(Monomial({4, 0})) == doctest::Approx(1.0));
    CHECK(s.coeff(Monomial({2, 2})) == doctest::Approx(2.0));
    CHECK(s.coeff(Monomial({0, 4})) == doctest::Approx(1.0));
}
