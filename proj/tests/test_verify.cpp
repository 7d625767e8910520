#include <doctest.h>

#include "polyctl/verify.hpp"
#include "test_util.hpp"

using namespace polyctl;
using testutil::mono2;

namespace {

// hand-made certificate for xdot1 = -x1^3 + x1 x2^2, xdot2 = ... + u with
// k = -x1 x2^2 - x2^3 - x2 and V = (x1^2 + x2^2) / 2
Certificate hand_certificate(CertificateKind kind) {
    Certificate c;
    c.kind = kind;
    c.nstate = 2;
    c.nexo = kind == CertificateKind::iss_process_biconvex ? 2 : 1;
    if (kind == CertificateKind::gas) c.nexo = 0;
    c.k = {mono2(1, 2, -1.0) + mono2(0, 3, -1.0) + mono2(0, 1, -1.0)};
    c.V = mono2(2, 0, 0.5) + mono2(0, 2, 0.5);
    c.alpha1 = {{0.25}};
    c.alpha2 = {{1.0}};
    c.alpha3 = {{1e-4}};
    c.alpha4 = {{10.0, 10.0}};
    return c;
}

}  // namespace

TEST_CASE("equilibrium stays put under zero disturbance") {
    TrueSystem sys = testutil::cubic2d_system();
    Certificate cert = hand_certificate(CertificateKind::iss_actuator_biconvex);
    std::mt19937_64 rng(1);
    Signal zero(SignalSpec::zero(1), 1.0, rng);
    auto traj = simulate_closed_loop(sys, cert, zero, Eigen::Vector2d(0, 0), 1.0, 1e-3);
    for (auto& x : traj.states) CHECK(x.norm() <= 1e-12);
}

TEST_CASE("V decreases along undisturbed closed-loop trajectories") {
    TrueSystem sys = testutil::cubic2d_system();
    Certificate cert = hand_certificate(CertificateKind::iss_actuator_biconvex);
    std::mt19937_64 rng(2);
    Signal zero(SignalSpec::zero(1), 3.0, rng);
    auto traj = simulate_closed_loop(sys, cert, zero, Eigen::Vector2d(1.5, -1.0), 3.0, 1e-3);
    CHECK(!traj.diverged);
    double prev = std::numeric_limits<double>::infinity();
    for (auto& x : traj.states) {
        double v = cert.V.eval(std::span<const double>(x.data(), 2));
        CHECK(v <= prev + 1e-9);
        prev = v;
    }
}

TEST_CASE("zero-disturbance dissipation bound reduces to -alpha3") {
    TrueSystem sys = testutil::cubic2d_system();
    Certificate cert = hand_certificate(CertificateKind::iss_actuator_biconvex);
    std::mt19937_64 rng(3);
    Signal zero(SignalSpec::zero(1), 1.0, rng);
    auto traj = simulate_closed_loop(sys, cert, zero, Eigen::Vector2d(1.0, 1.0), 1.0, 1e-3);
    auto tr = dissipation_trace(traj, sys, cert, zero);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& x = traj.states[i];
        CHECK(tr.bound[i] == doctest::Approx(-cert.alpha3.eval(x.norm())));
        CHECK(tr.bound[i] <= 0.0);
    }
}

TEST_CASE("dissipation trace catches a corrupted Lyapunov function") {
    TrueSystem sys = testutil::cubic2d_system();
    Certificate good = hand_certificate(CertificateKind::iss_actuator_biconvex);
    std::mt19937_64 rng(4);
    Signal w(SignalSpec::uniform_ball(1, 1.0, 0.5), 5.0, rng);
    auto traj = simulate_closed_loop(sys, good, w, Eigen::Vector2d(2.0, -2.0), 5.0, 1e-3);
    auto tr = dissipation_trace(traj, sys, good, w);
    CHECK(tr.min_margin() >= -1e-6);

    Certificate bad = good;
    bad.V = mono2(2, 0, -0.5) + mono2(0, 2, 0.5);  // flipped coefficient sign
    auto tr2 = dissipation_trace(traj, sys, bad, w);
    CHECK(tr2.min_margin() < -1e-3);
}

TEST_CASE("symbolic dV/dt matches finite differences of V along the trajectory") {
    TrueSystem sys = testutil::cubic2d_system();
    Certificate cert = hand_certificate(CertificateKind::iss_actuator_biconvex);
    std::mt19937_64 rng(5);
    Signal w(SignalSpec::uniform_ball(1, 0.5, 0.25), 2.0, rng);
    double step = 1e-3;
    auto traj = simulate_closed_loop(sys, cert, w, Eigen::Vector2d(1.0, -1.5), 2.0, step);
    auto tr = dissipation_trace(traj, sys, cert, w);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < traj.states.size(); ++i) {
        double vp = cert.V.eval(std::span<const double>(traj.states[i + 1].data(), 2));
        double vm = cert.V.eval(std::span<const double>(traj.states[i - 1].data(), 2));
        double fd = (vp - vm) / (2 * step);
        worst = std::max(worst, std::abs(fd - tr.Vdot[i]));
    }
    CHECK(worst <= 1e-3);  // O(step^2) plus interpolation kinks of the knots
}

TEST_CASE("robust sampling covers the uncertainty set and flags violations") {
    auto ex = testutil::cubic2d_experiment(19);
    auto model = solve_overapproximation(build_sample_quadrics(ex.dataset, ex.sys.library), 2);
    Certificate cert = hand_certificate(CertificateKind::iss_actuator_biconvex);
    // plain -x2-ish feedback cannot dominate every consistent cubic: expect a
    // clearly negative worst margin, reported rather than hidden
    RobustSampleConfig rcfg;
    rcfg.n_points = 400;
    auto rep = robust_sample_check(cert, model, ex.sys.library, rcfg);
    CHECK(rep.samples == 400);
    CHECK(std::isfinite(rep.worst_margin));

    // the center member evaluated directly agrees with a fresh single sample
    RobustSampleConfig one;
    one.n_points = 1;  // first sample is the center Upsilon = 0
    auto rep1 = robust_sample_check(cert, model, ex.sys.library, one);
    CHECK(rep1.samples == 1);
}

TEST_CASE("pd/ru check: quartic norm form passes via the SOS route") {
    auto lib = testutil::cubic2d_library_zhat_linear();
    Eigen::Matrix2d P;
    P << 0.9, -0.02, -0.02, 0.6;
    PolyMatrix Xi(2, 2, 2);  // Zhat Zhat^T
    Xi.at(0, 0) = mono2(2, 0, 1.0);
    Xi.at(0, 1) = Xi.at(1, 0) = mono2(1, 1, 1.0);
    Xi.at(1, 1) = mono2(0, 2, 1.0);
    auto rep = check_pd_ru(lib.Zhat, P, Xi);
    CHECK(rep.pass);
    CHECK(rep.method == PdRuReport::Method::sos_sufficient);
    CHECK(rep.epsilon_found >= 1e-6);
}

TEST_CASE("pd/ru check: zero Xi fails") {
    auto lib = testutil::cubic2d_library_zhat_linear();
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    PolyMatrix Xi(2, 2, 2);
    auto rep = check_pd_ru(lib.Zhat, P, Xi);
    CHECK(!rep.pass);
}

TEST_CASE("pd/ru check: diagonal quadratic Xi with the quadratic library passes") {
    auto lib = testutil::cubic2d_library_zhat_quadratic();
    Eigen::Matrix2d P;
    P << 0.28, 0.01, 0.01, 0.03;
    PolyMatrix Xi(2, 2, 2);
    Xi.at(0, 0) = mono2(2, 0, 1.0);
    Xi.at(1, 1) = mono2(0, 2, 1.0);
    auto rep = check_pd_ru(lib.Zhat, P, Xi);
    CHECK(rep.pass);
    CHECK(rep.method == PdRuReport::Method::sos_sufficient);
}

TEST_CASE("pd/ru check rejects indefinite P") {
    auto lib = testutil::cubic2d_library_zhat_linear();
    Eigen::Matrix2d P;
    P << 1.0, 0.0, 0.0, -1.0;
    PolyMatrix Xi = PolyMatrix::identity(2, 2);
    CHECK_THROWS_AS(check_pd_ru(lib.Zhat, P, Xi), std::invalid_argument);
}

TEST_CASE("trajectories under out-of-set dynamics may violate without failing the check") {
    // members beyond ||Upsilon|| = 1 are outside the certified set; the
    // check's own sampling never leaves the unit ball, so its verdict is
    // independent of such violations
    auto ex = testutil::cubic2d_experiment(19);
    auto model = solve_overapproximation(build_sample_quadrics(ex.dataset, ex.sys.library), 2);
    Eigen::MatrixXd ups = Eigen::MatrixXd::Zero(5, 2);
    ups(0, 0) = 1.5;  // operator norm 1.5, outside the set
    Eigen::MatrixXd zeta = model.zeta_bar + model.Abar_inv_sqrt() * ups * model.Qbar;
    CHECK(!membership_ellipsoid(zeta.transpose(), model));
}
