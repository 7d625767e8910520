#include <doctest.h>

#include "polyctl/sdp.hpp"

using namespace polyctl;

namespace {

// minimize t subject to [[t, 1], [1, t]] >= 0
SdpProblem min_t_2x2() {
    SdpProblem p;
    int X = p.add_block("X", 2);
    int t = p.add_scalar("t");
    p.add_equality({{{X, 0, 0, 1.0}}, {{t, -1.0}}, 0.0});
    p.add_equality({{{X, 1, 1, 1.0}}, {{t, -1.0}}, 0.0});
    p.add_equality({{{X, 0, 1, 1.0}}, {}, 2.0});  // pair convention: X01 + X10 = 2
    p.obj_scalars.push_back({t, 1.0});
    return p;
}

}  // namespace

TEST_CASE("eigenvalue-constrained scalar minimization") {
    auto sol = solve(min_t_2x2());
    REQUIRE(sol.ok());
    CHECK(sol.scalar_values.at("t") == doctest::Approx(1.0).epsilon(1e-6));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.block_values.at("X"),
                                                      Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(sol.max_eq_residual <= 1e-6);
    CHECK(sol.min_block_eig >= -1e-7);
}

TEST_CASE("purely linear problems reduce to the forced solution") {
    SdpProblem p;
    int x = p.add_scalar("x");
    p.add_equality({{}, {{x, 1.0}}, 3.0});
    p.obj_scalars.push_back({x, 1.0});
    auto sol = solve(p);
    REQUIRE(sol.ok());
    CHECK(sol.scalar_values.at("x") == doctest::Approx(3.0));
    CHECK(sol.objective_value == doctest::Approx(3.0));
}

TEST_CASE("Gram feasibility of x^4 + 1 matches the brute-force oracle") {
    // oracle: basis (1, x^2), coefficient match forces Q11 = 1, Q22 = 1,
    // 2 Q12 = 0; scan the one free entry for a PSD witness
    bool oracle_exists = false;
    for (double q12 = -1.0; q12 <= 1.0; q12 += 0.01) {
        if (std::abs(2 * q12 - 0.0) > 1e-9) continue;
        Eigen::Matrix2d Q;
        Q << 1.0, q12, q12, 1.0;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Q, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() >= 0) oracle_exists = true;
    }
    REQUIRE(oracle_exists);

    SdpProblem p;
    int Q = p.add_block("Q", 2);
    p.add_equality({{{Q, 0, 0, 1.0}}, {}, 1.0});
    p.add_equality({{{Q, 0, 1, 1.0}}, {}, 0.0});
    p.add_equality({{{Q, 1, 1, 1.0}}, {}, 1.0});
    auto sol = solve(p);
    CHECK(sol.ok());
}

TEST_CASE("infeasibility is certified, not silently returned") {
    SdpProblem p;
    int X = p.add_block("X", 1);
    p.add_equality({{{X, 0, 0, 1.0}}, {}, -1.0});
    auto sol = solve(p);
    CHECK(sol.status == SdpSolution::Status::infeasible);

    SdpProblem p2;
    int x = p2.add_scalar("x", 0.0);
    p2.add_equality({{}, {{x, 1.0}}, -1.0});
    auto sol2 = solve(p2);
    CHECK(sol2.status == SdpSolution::Status::infeasible);
}

TEST_CASE("maxdet drives X to the identity under X <= I") {
    SdpProblem p;
    int X = p.add_block("X", 2);
    int S = p.add_block("S", 2);
    p.add_equality({{{X, 0, 0, 1.0}, {S, 0, 0, 1.0}}, {}, 1.0});
    p.add_equality({{{X, 1, 1, 1.0}, {S, 1, 1, 1.0}}, {}, 1.0});
    p.add_equality({{{X, 0, 1, 1.0}, {S, 0, 1, 1.0}}, {}, 0.0});
    p.maxdet_block = X;
    auto sol = solve_maxdet(p);
    REQUIRE(sol.ok());
    CHECK(sol.log_det == doctest::Approx(0.0).epsilon(1e-3));
    CHECK((sol.block_values.at("X") - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-2);
}

TEST_CASE("maxdet with a trace budget splits it evenly") {
    SdpProblem p;
    int X = p.add_block("X", 2);
    p.add_equality({{{X, 0, 0, 1.0}, {X, 1, 1, 1.0}}, {}, 2.0});
    p.maxdet_block = X;
    auto sol = solve_maxdet(p);
    REQUIRE(sol.ok());
    const auto& Xv = sol.block_values.at("X");
    CHECK(Xv(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(Xv(1, 1) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(Xv(0, 1)) <= 1e-3);
    CHECK(sol.log_det == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("maxdet propagates infeasibility") {
    SdpProblem p;
    int X = p.add_block("X", 2);
    p.add_equality({{{X, 0, 0, 1.0}}, {}, -2.0});
    p.maxdet_block = X;
    auto sol = solve_maxdet(p);
    CHECK(sol.status == SdpSolution::Status::infeasible);
}

TEST_CASE("identical problems solve to identical results") {
    auto a = solve(min_t_2x2());
    auto b = solve(min_t_2x2());
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(a.status == b.status);
    CHECK(std::abs(a.objective_value - b.objective_value) <= 1e-8);
}

TEST_CASE("problem dump lists every nonzero once") {
    auto p = min_t_2x2();
    std::ostringstream os;
    p.dump(os);
    std::string s = os.str();
    CHECK(s.find("b 0 2 X") != std::string::npos);
    CHECK(s.find("rhs") != std::string::npos);
}

TEST_CASE("validation rejects malformed problems") {
    SdpProblem p;
    CHECK_THROWS_AS(p.add_block("X", 0), std::invalid_argument);
    int X = p.add_block("X", 2);
    p.add_equality({{{X, 1, 0, 1.0}}, {}, 0.0});  // row > col
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
