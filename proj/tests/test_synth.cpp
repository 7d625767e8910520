#include <doctest.h>

#include "polyctl/synth.hpp"
#include "polyctl/verify.hpp"
#include "test_util.hpp"

using namespace polyctl;

namespace {

// scalar plant xdot = -x - 0.1 x^3 + u over the library (x, x^3), used as a
// fast end-to-end exercise of every synthesis path
struct ScalarBench {
    TrueSystem sys;
    EllipsoidModel model;
    Dataset dataset;
};

FunctionLibrary scalar_library() {
    FunctionLibrary lib;
    lib.nstate = 1;
    lib.ninput = 1;
    lib.Z = {Polynomial::variable(1, 0), Polynomial::monomial(Monomial({3}), 1.0)};
    lib.W = PolyMatrix(1, 1, 1);
    lib.W.at(0, 0) = Polynomial::constant(1, 1.0);
    lib.Zhat = {Polynomial::variable(1, 0)};
    PolyMatrix H(2, 1, 1);
    H.at(0, 0) = Polynomial::constant(1, 1.0);
    H.at(1, 0) = Polynomial::monomial(Monomial({2}), 1.0);
    lib.H = H;
    return lib;
}

const ScalarBench& scalar_bench() {
    static ScalarBench sb = [] {
        ScalarBench s;
        s.sys.library = scalar_library();
        s.sys.A_star.resize(1, 2);
        s.sys.A_star << -1.0, -0.1;
        s.sys.B_star.resize(1, 1);
        s.sys.B_star << 1.0;
        std::mt19937_64 rng(3);
        Signal u(SignalSpec::gaussian(1, 0.0, 1.0, 0.1), 1.0, rng);
        Signal d(SignalSpec::uniform_ball(1, 0.1, 0.1), 1.0, rng);
        Eigen::VectorXd x0(1);
        x0 << 1.5;
        auto traj = integrate_trajectory(s.sys, x0, u, d, 1.0, 1e-3);
        std::vector<double> times;
        for (int i = 0; i < 20; ++i) times.push_back(i * 0.05);
        s.dataset = collect_dataset(traj, s.sys, u, d, times, 0.01);
        auto quadrics = build_sample_quadrics(s.dataset, s.sys.library);
        s.model = solve_overapproximation(quadrics, 1);
        return s;
    }();
    return sb;
}

SynthConfig scalar_config() {
    SynthConfig cfg;
    cfg.initial_controller = {Polynomial::variable(1, 0) * -2.0 +
                              Polynomial::monomial(Monomial({3}), -1.0)};
    cfg.alternation_rounds = 2;
    return cfg;
}

}  // namespace

TEST_CASE("class K-infinity coefficient checks and monotonicity") {
    ClassKInfty a{{0.5, 0.0, 0.2}};
    CHECK(a.valid(1e-3));
    CHECK(a.eval(0.0) == 0.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int t = 0; t < 100; ++t) {
        double r1 = u(rng), r2 = u(rng);
        if (r1 > r2) std::swap(r1, r2);
        if (r2 - r1 < 1e-9) continue;
        CHECK(a.eval(r2) > a.eval(r1));
    }
    CHECK(!ClassKInfty{{-0.1, 0.5}}.valid(1e-3));   // negative coefficient
    CHECK(!ClassKInfty{{1e-6, 1e-6}}.valid(1e-3));  // sum below the floor
    Polynomial p = a.as_polynomial(2, 0, 2);
    CHECK(p.eval(std::vector<double>{1.0, 2.0}) == doctest::Approx(a.eval(std::sqrt(5.0))));
}

TEST_CASE("matrix comparison functions majorize w' Gamma(|w|) w") {
    MatrixComparison g;
    Eigen::Matrix2d C0, C1;
    C0 << 2.0, 0.3, 0.3, 1.0;
    C1 << 0.5, -0.1, -0.1, 0.8;
    g.C = {C0, C1};
    ClassKInfty a4 = g.to_alpha4();
    REQUIRE(a4.coeffs.size() == 2);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 1000; ++t) {
        Eigen::Vector2d w(u(rng), u(rng));
        double lhs = (w.transpose() * g.eval(w.norm()) * w).value();
        CHECK(lhs <= a4.eval(w.norm()) + 1e-9);
    }
}

TEST_CASE("sontag redesign formulas") {
    auto lib = testutil::cubic2d_library();
    Eigen::MatrixXd AB(2, 5);
    AB << -1, 0, 1, 0, 0, 0, -1, 1, 0, 1;

    // dV/dx * B W == 0 leaves the controller untouched
    {
        Eigen::MatrixXd AB0 = AB;
        AB0.col(4).setZero();  // B = 0
        Polynomial V = testutil::mono2(2, 0, 1.0) + testutil::mono2(0, 2, 1.0);
        std::vector<Polynomial> k{Polynomial::zero(2)};
        auto kt = sontag_redesign(AB0, lib, k, V);
        CHECK(kt[0].is_zero());
    }
    // single-input specialization: kt = k - (rho / 2) dV B W
    {
        Polynomial V = testutil::mono2(2, 0, 0.5) + testutil::mono2(0, 2, 0.5);
        std::vector<Polynomial> k{testutil::mono2(0, 3, -1.0)};
        auto kt = sontag_redesign(AB, lib, k, V);
        Polynomial x1 = Polynomial::variable(2, 0), x2 = Polynomial::variable(2, 1);
        // f = A Z + B W k, rho = -dV f, g = dV B W = x2
        std::vector<Polynomial> f{-(x1 * x1 * x1) + x1 * x2 * x2,
                                  x1 * x2 * x2 - x1 * x1 * x2 + k[0]};
        Polynomial rho = -(x1 * f[0] + x2 * f[1]);
        Polynomial expected = k[0] - rho * x2 * 0.5;
        CHECK((kt[0] - expected).max_abs_coeff() <= 1e-12);
        // degree bound: deg(ktilde) <= deg(rho) + deg(dV B W)
        CHECK(kt[0].degree() <= rho.degree() + x2.degree());
    }
}

TEST_CASE("biconvex ISS synthesis on the scalar plant") {
    auto& sb = scalar_bench();
    auto cfg = scalar_config();
    Certificate cert = synth_iss_actuator_biconvex(sb.model, sb.sys.library, cfg);
    CHECK(cert.kind == CertificateKind::iss_actuator_biconvex);
    CHECK(cert.all_reports_pass());
    CHECK(cert.V.coeff(Monomial({0})) == 0.0);
    CHECK(cert.k[0].coeff(Monomial({0})) == 0.0);
    CHECK(cert.alpha1.valid(cfg.mu));
    CHECK(cert.alpha4.valid(cfg.mu));
    CHECK(cert.stats.sdp_solves == 2 * cfg.alternation_rounds);

    // robust sampling over the uncertainty set
    RobustSampleConfig rcfg;
    rcfg.n_points = 300;
    rcfg.x_radius = 2.0;
    auto rep = robust_sample_check(cert, sb.model, sb.sys.library, rcfg);
    CHECK(rep.pass(1e-6));

    // the 0-GAS remark: frozen certificate satisfies the GAS constraint set
    auto reports = recheck_gas_frozen(cert, sb.model, sb.sys.library, cfg);
    for (auto& r : reports) CHECK(r.pass);
}

TEST_CASE("biconvex process-disturbance synthesis on the scalar plant") {
    auto& sb = scalar_bench();
    auto cfg = scalar_config();
    Certificate cert = synth_iss_process_biconvex(sb.model, sb.sys.library, cfg);
    CHECK(cert.all_reports_pass());
    CHECK(cert.nexo == 1);
    RobustSampleConfig rcfg;
    rcfg.n_points = 300;
    rcfg.x_radius = 2.0;
    auto rep = robust_sample_check(cert, sb.model, sb.sys.library, rcfg);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("GAS synthesis on the scalar plant") {
    auto& sb = scalar_bench();
    auto cfg = scalar_config();
    Certificate cert = synth_gas(sb.model, sb.sys.library, cfg);
    CHECK(cert.kind == CertificateKind::gas);
    CHECK(cert.alpha4.empty());
    CHECK(cert.all_reports_pass());
}

TEST_CASE("convex ISS synthesis on the scalar plant") {
    auto& sb = scalar_bench();
    SynthConfig cfg;
    Certificate cert = synth_iss_actuator_convex(sb.model, sb.sys.library, cfg);
    CHECK(cert.kind == CertificateKind::iss_actuator_convex);
    CHECK(cert.all_reports_pass());
    CHECK(cert.P.rows() == 1);
    CHECK(cert.P(0, 0) > 0.0);
    // V = Zhat' P^-1 Zhat and k = Y P^-1 Zhat at sampled points
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        auto pt = testutil::random_point(1, 2.0, rng);
        double z = pt[0];
        CHECK(cert.V.eval(pt) == doctest::Approx(z * z / cert.P(0, 0)).epsilon(1e-8));
    }
    // sandwich bounds hold on samples
    for (int t = 0; t < 1000; ++t) {
        auto pt = testutil::random_point(1, 3.0, rng);
        double r = std::abs(pt[0]);
        double v = cert.V.eval(pt);
        CHECK(cert.alpha1.eval(r) <= v + 1e-8);
        CHECK(v <= cert.alpha2.eval(r) + 1e-8);
    }
}

TEST_CASE("convex process-disturbance synthesis on the scalar plant") {
    auto& sb = scalar_bench();
    SynthConfig cfg;
    cfg.gamma_identity = true;
    Certificate cert = synth_iss_process_convex(sb.model, sb.sys.library, cfg);
    CHECK(cert.all_reports_pass());
    CHECK(cert.nexo == 1);
    CHECK(cert.Gamma.C.size() == 1);
}

TEST_CASE("model-based corollary on the scalar plant and an unstabilizable one") {
    auto& sb = scalar_bench();
    SynthConfig cfg;
    Certificate cert = synth_modelbased_convex(sb.sys, cfg);
    CHECK(cert.kind == CertificateKind::model_based);
    CHECK(cert.all_reports_pass());
    CHECK(cert.lambda.is_zero());  // no multiplier in the model-based program

    // xdot = x with no input authority cannot be stabilized
    TrueSystem bad;
    bad.library.nstate = 1;
    bad.library.ninput = 1;
    bad.library.Z = {Polynomial::variable(1, 0)};
    bad.library.W = PolyMatrix(1, 1, 1);
    bad.library.W.at(0, 0) = Polynomial::constant(1, 1.0);
    bad.library.Zhat = {Polynomial::variable(1, 0)};
    PolyMatrix H(1, 1, 1);
    H.at(0, 0) = Polynomial::constant(1, 1.0);
    bad.library.H = H;
    bad.A_star.resize(1, 1);
    bad.A_star << 1.0;
    bad.B_star.resize(1, 1);
    bad.B_star << 0.0;
    CHECK_THROWS_AS(synth_modelbased_convex(bad, cfg), SynthError);
}

TEST_CASE("comparison-function extraction reproduces the exact sandwich") {
    Certificate cert;
    cert.kind = CertificateKind::iss_actuator_convex;
    cert.nstate = 2;
    cert.nexo = 1;
    cert.V = testutil::mono2(2, 0, 1.0) + testutil::mono2(0, 2, 1.0);  // |x|^2
    cert.a_fun = cert.V;
    SynthConfig cfg;
    extract_comparison_functions(cert, cfg);
    REQUIRE(cert.alpha1.coeffs.size() >= 1);
    CHECK(cert.alpha1.coeffs[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(cert.alpha2.coeffs[0] == doctest::Approx(1.0).epsilon(1e-5));
    for (std::size_t k = 1; k < cert.alpha1.coeffs.size(); ++k)
        CHECK(cert.alpha1.coeffs[k] <= 1e-6);
}

TEST_CASE("infeasibility reporting: inflated noise bound breaks synthesis") {
    auto& sb = scalar_bench();
    // an ellipsoid blown up by vacuous data admits no common certificate
    EllipsoidModel loose = sb.model;
    loose.Abar *= 1e-12;  // a gigantic uncertainty set
    loose.Bbar *= 1e-12;
    loose.zeta_bar = -loose.Abar.llt().solve(loose.Bbar);
    auto cfg = scalar_config();
    cfg.alternation_rounds = 1;
    try {
        synth_iss_actuator_biconvex(loose, sb.sys.library, cfg);
        FAIL("expected SynthError");
    } catch (const SynthError& e) {
        CHECK(!std::string(e.diagnostics()).empty());
    }
}
