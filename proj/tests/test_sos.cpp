#include <doctest.h>

#include <random>

#include "polyctl/sos.hpp"
#include "test_util.hpp"

using namespace polyctl;

namespace {

Polynomial x_poly(int e, double c) { return Polynomial::monomial(Monomial({e}), c); }

}  // namespace

TEST_CASE("gram_basis_for enumerates half-degree monomials") {
    auto b1 = gram_basis_for(2, 1, BasisStructure::full);
    REQUIRE(b1.size() == 2);  // {1, x}
    CHECK(b1[0].degree() == 0);
    CHECK(b1[1].degree() == 1);

    auto b2 = gram_basis_for(4, 2, BasisStructure::full);
    CHECK(b2.size() == 6);  // {1, x1, x2, x1^2, x1 x2, x2^2}

    auto b3 = gram_basis_for(4, 2, BasisStructure::even_only);
    CHECK(b3.size() == 5);  // constant dropped
    for (auto& m : b3) CHECK(m.degree() >= 1);

    CHECK_THROWS_AS(gram_basis_for(3, 1, BasisStructure::full), std::invalid_argument);
}

TEST_CASE("x^2 is SOS with a one-element basis") {
    SosProgram prog;
    prog.add_scalar_sos("p", DecisionPoly(x_poly(2, 1.0)));
    auto res = prog.solve();
    REQUIRE(res.feasible());
    auto reports = prog.verify_all(res.sdp);
    CHECK(reports[0].pass);
}

TEST_CASE("(x-1)^2 has the expected hand Gram") {
    Polynomial target = x_poly(2, 1.0) + x_poly(1, -2.0) + x_poly(0, 1.0);

    SosCertificate hand;
    hand.name = "hand";
    hand.rows = 1;
    SosCertificate::GramBlock g;
    g.basis = {{0, Monomial({0})}, {0, Monomial({1})}};
    g.gram.resize(2, 2);
    g.gram << 1.0, -1.0, -1.0, 1.0;
    hand.grams.push_back(g);
    auto rep = verify_certificate(target, hand);
    CHECK(rep.pass);
    CHECK(rep.residual == doctest::Approx(0.0));
    CHECK(rep.gram_min_eig == doctest::Approx(0.0));

    // perturbing one off-diagonal Gram entry must be caught
    auto bad = hand;
    bad.grams[0].gram(0, 1) += 1e-3;
    bad.grams[0].gram(1, 0) += 1e-3;
    auto rep2 = verify_certificate(target, bad);
    CHECK(!rep2.pass);
    CHECK(rep2.residual == doctest::Approx(2e-3).epsilon(1e-6));

    SosProgram prog;
    prog.add_scalar_sos("p", DecisionPoly(target));
    auto res = prog.solve();
    REQUIRE(res.feasible());
    CHECK(prog.verify_all(res.sdp)[0].pass);
}

TEST_CASE("-x^2 compiles to an infeasible problem") {
    SosProgram prog;
    prog.add_scalar_sos("p", DecisionPoly(x_poly(2, -1.0)));
    auto res = prog.solve();
    CHECK(!res.feasible());
    CHECK(res.sdp.status == SdpSolution::Status::infeasible);
}

TEST_CASE("explicit Gram basis that cannot express a monomial is a compile error") {
    SosConstraint c;
    c.name = "p";
    c.scalar_target = DecisionPoly(x_poly(4, 1.0) + x_poly(0, 1.0));
    c.gram_basis = {Monomial({1})};  // products reach only x^2
    CHECK_THROWS_AS(compile_scalar_sos(c), CompileError);
}

TEST_CASE("matrix SOS feasibility cases") {
    const int nv = 1;
    auto dm = [&](std::initializer_list<std::initializer_list<Polynomial>> rows) {
        DecisionMatrix m;
        for (auto& r : rows) {
            std::vector<DecisionPoly> row;
            for (auto& p : r) row.push_back(DecisionPoly(p));
            m.push_back(std::move(row));
        }
        return m;
    };
    Polynomial zero(nv), one = x_poly(0, 1.0), x = x_poly(1, 1.0), x2 = x_poly(2, 1.0);

    {
        SosProgram prog;
        prog.add_matrix_sos("diag", dm({{x2, zero}, {zero, one}}));
        auto res = prog.solve();
        REQUIRE(res.feasible());
        CHECK(prog.verify_all(res.sdp)[0].pass);
    }
    {
        SosProgram prog;
        prog.add_matrix_sos("rank1", dm({{one, x}, {x, x2}}));
        auto res = prog.solve();
        REQUIRE(res.feasible());
        CHECK(prog.verify_all(res.sdp)[0].pass);
    }
    {
        SosProgram prog;
        prog.add_matrix_sos("offdiag", dm({{zero, one}, {one, zero}}));
        auto res = prog.solve();
        CHECK(!res.feasible());
    }
}

TEST_CASE("matrix scalarization matches the eigenvalue test on constant matrices") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Eigen::Matrix2d S;
        double a = u(rng), b = u(rng), c = u(rng);
        S << a, b, b, c;
        bool psd = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(S, Eigen::EigenvaluesOnly)
                       .eigenvalues()
                       .minCoeff() >= -1e-12;
        DecisionMatrix m(2, std::vector<DecisionPoly>(2, DecisionPoly(1)));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) m[i][j] = DecisionPoly(x_poly(0, S(i, j)));
        SosProgram prog;
        prog.add_matrix_sos("const", m);
        auto res = prog.solve();
        CHECK(res.feasible() == psd);
    }
}

TEST_CASE("round trip: compiling z^T Q z recovers a certificate with tiny residual") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto basis = gram_basis_for(4, 2, BasisStructure::full);
    const int B = static_cast<int>(basis.size());
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd R(B, B);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j) R(i, j) = u(rng);
        Eigen::MatrixXd Q = R * R.transpose();
        Polynomial target(2);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j)
                if (Q(i, j) != 0.0) target.add_term(basis[i] * basis[j], Q(i, j));
        SosProgram prog;
        prog.add_scalar_sos("rt", DecisionPoly(target));
        auto res = prog.solve();
        REQUIRE(res.feasible());
        auto rep = prog.verify_all(res.sdp)[0];
        CHECK(rep.residual <= 1e-8 * (1.0 + target.max_abs_coeff()));
    }
}

TEST_CASE("soundness: a PASS certificate implies pointwise nonnegativity") {
    std::mt19937_64 rng(53);
    Polynomial target =
        testutil::mono2(4, 0, 1.0) + testutil::mono2(0, 4, 2.0) + testutil::mono2(2, 2, -1.5) +
        testutil::mono2(2, 0, 0.3) + testutil::mono2(0, 0, 0.05);
    SosProgram prog;
    prog.add_scalar_sos("snd", DecisionPoly(target));
    auto res = prog.solve();
    REQUIRE(res.feasible());
    REQUIRE(prog.verify_all(res.sdp)[0].pass);
    int deg = target.degree();
    for (int t = 0; t < 1000; ++t) {
        auto pt = testutil::random_point(2, 3.0, rng);
        double nrm = std::hypot(pt[0], pt[1]);
        CHECK(target.eval(pt) >= -1e-5 * (1.0 + std::pow(nrm, deg)));
    }
}

TEST_CASE("decision coefficients link through the matching equalities") {
    // find c so that x^2 - c x + 1 is SOS and c is extremal: maximizing c gives 2
    SosProgram prog;
    int c = prog.new_scalar("c");
    DecisionPoly target(1);
    target.add_term(Monomial({2}), LinExpr(1.0));
    target.add_term(Monomial({1}), LinExpr::var(c, -1.0));
    target.add_term(Monomial({0}), LinExpr(1.0));
    prog.add_scalar_sos("p", target);
    prog.add_objective(LinExpr::var(c, -1.0));  // maximize c
    auto res = prog.solve();
    REQUIRE(res.feasible());
    CHECK(prog.value(LinExpr::var(c), res.sdp) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("multiplier positivity instance verifies end to end") {
    // lambda(x, w) - mu with the reported structure of the benchmark multiplier
    const int nv = 3;  // x1, x2, w
    auto mono3 = [](int a, int b, int c, double v) {
        return Polynomial::monomial(Monomial({a, b, c}), v);
    };
    Polynomial lam = mono3(0, 0, 0, 9.7939) + mono3(0, 2, 0, 0.8059) + mono3(2, 0, 0, 0.7872) +
                     mono3(1, 1, 0, -0.0111) + mono3(0, 1, 1, 0.0001) + mono3(0, 0, 2, 0.0059);
    Polynomial target = lam - Polynomial::constant(nv, 1e-3);
    SosProgram prog;
    prog.add_scalar_sos("s_lambda", DecisionPoly(target));
    auto res = prog.solve();
    REQUIRE(res.feasible());
    CHECK(prog.verify_all(res.sdp)[0].pass);
}
