#include <doctest.h>

#include "polyctl/data.hpp"
#include "test_util.hpp"

using namespace polyctl;

TEST_CASE("zero vector field keeps the state constant") {
    TrueSystem sys = testutil::cubic2d_system();
    sys.A_star.setZero();
    sys.B_star.setZero();
    std::mt19937_64 rng(1);
    Signal u(SignalSpec::zero(1), 1.0, rng), d(SignalSpec::zero(2), 1.0, rng);
    Eigen::VectorXd x0(2);
    x0 << 1.5, -0.5;
    auto traj = integrate_trajectory(sys, x0, u, d, 1.0, 1e-3);
    CHECK(!traj.diverged);
    CHECK((traj.states.back() - x0).norm() == doctest::Approx(0.0));
}

TEST_CASE("scalar linear decay matches the exponential") {
    TrueSystem sys;
    sys.library.nstate = 1;
    sys.library.ninput = 1;
    sys.library.Z = {Polynomial::variable(1, 0)};
    sys.library.W = PolyMatrix(1, 1, 1);
    sys.library.W.at(0, 0) = Polynomial::constant(1, 1.0);
    sys.A_star.resize(1, 1);
    sys.A_star << -1.0;
    sys.B_star.resize(1, 1);
    sys.B_star << 0.0;
    std::mt19937_64 rng(1);
    Signal u(SignalSpec::zero(1), 1.0, rng), d(SignalSpec::zero(1), 1.0, rng);
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    auto traj = integrate_trajectory(sys, x0, u, d, 1.0, 1e-3);
    CHECK(traj.states.back()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("benchmark data-collection run stays bounded") {
    auto ex = testutil::cubic2d_experiment(1);
    CHECK(!ex.trajectory.diverged);
    for (auto& x : ex.trajectory.states) CHECK(x.norm() <= 10.0);
    CHECK(ex.dataset.T() == 50);
}

TEST_CASE("derivative samples are the exact right-hand side plus noise") {
    auto ex = testutil::cubic2d_experiment(3, 10, 1e6);  // huge delta, noise still unit ball
    for (auto& s : ex.dataset.samples) {
        Eigen::VectorXd rhs = ex.sys.rhs(std::span<const double>(s.x.data(), s.x.size()),
                                         std::span<const double>(s.u.data(), s.u.size()));
        CHECK((s.xdot - rhs).norm() <= 1.0 + 1e-12);  // injected noise within the ball
    }
}

TEST_CASE("noise at the exact energy bound is accepted, beyond it rejected") {
    TrueSystem sys = testutil::cubic2d_system();
    std::mt19937_64 rng(5);
    Signal u(SignalSpec::zero(1), 1.0, rng);
    Eigen::VectorXd x0(2);
    x0 << 1.0, 1.0;
    double delta = 0.25;
    {
        Signal d(SignalSpec::constant({0.5, 0.0}), 1.0, rng);  // |d|^2 = 0.25 = delta
        auto traj = integrate_trajectory(sys, x0, u, d, 0.1, 1e-3);
        auto ds = collect_dataset(traj, sys, u, d, {0.0, 0.05}, delta);
        CHECK(ds.T() == 2);
    }
    {
        Signal d(SignalSpec::constant({0.6, 0.0}), 1.0, rng);  // |d|^2 = 0.36 > delta
        auto traj = integrate_trajectory(sys, x0, u, d, 0.1, 1e-3);
        CHECK_THROWS_AS(collect_dataset(traj, sys, u, d, {0.0}, delta), std::runtime_error);
    }
}

TEST_CASE("interpolated ball signals respect the radius everywhere") {
    std::mt19937_64 rng(7);
    Signal d(SignalSpec::uniform_ball(2, 1.0, 0.1), 5.0, rng);
    std::uniform_real_distribution<double> t(0.0, 5.0);
    for (int i = 0; i < 1000; ++i) CHECK(d(t(rng)).norm() <= 1.0 + 1e-12);
}

TEST_CASE("RK4 exhibits fourth-order convergence on the benchmark system") {
    TrueSystem sys = testutil::cubic2d_system();
    std::mt19937_64 rng(11);
    // knots aligned with every step size so the interpolated input is smooth
    // inside each step
    Signal u(SignalSpec::gaussian(1, 0.0, 1.0, 0.1), 1.0, rng);
    Signal d(SignalSpec::zero(2), 1.0, rng);
    Eigen::VectorXd x0(2);
    x0 << 2.0, -2.0;
    double h = 4e-3;
    auto ref = integrate_trajectory(sys, x0, u, d, 1.0, h / 16);
    auto c1 = integrate_trajectory(sys, x0, u, d, 1.0, h);
    auto c2 = integrate_trajectory(sys, x0, u, d, 1.0, h / 2);
    double e1 = (c1.states.back() - ref.states.back()).norm();
    double e2 = (c2.states.back() - ref.states.back()).norm();
    double ratio = e1 / e2;
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 32.0);
}

TEST_CASE("divergence guard truncates exploding trajectories") {
    TrueSystem sys;
    sys.library.nstate = 1;
    sys.library.ninput = 1;
    sys.library.Z = {Polynomial::monomial(Monomial({3}), 1.0)};
    sys.library.W = PolyMatrix(1, 1, 1);
    sys.library.W.at(0, 0) = Polynomial::constant(1, 1.0);
    sys.A_star.resize(1, 1);
    sys.A_star << 1.0;  // xdot = x^3 blows up in finite time
    sys.B_star.resize(1, 1);
    sys.B_star << 0.0;
    std::mt19937_64 rng(1);
    Signal u(SignalSpec::zero(1), 1.0, rng), d(SignalSpec::zero(1), 1.0, rng);
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    auto traj = integrate_trajectory(sys, x0, u, d, 1.0, 1e-3);
    CHECK(traj.diverged);
    CHECK(traj.times.size() < 1001);
}

TEST_CASE("regressor matrices stack Z and W u columns") {
    {
        FunctionLibrary lib;
        lib.nstate = 1;
        lib.ninput = 1;
        lib.Z = {Polynomial::variable(1, 0)};
        lib.W = PolyMatrix(1, 1, 1);
        lib.W.at(0, 0) = Polynomial::constant(1, 1.0);
        Dataset ds;
        ds.delta = 1.0;
        DataSample s;
        s.t = 0;
        s.x = Eigen::VectorXd::Constant(1, 3.0);
        s.u = Eigen::VectorXd::Zero(1);
        s.xdot = Eigen::VectorXd::Zero(1);
        ds.samples.push_back(s);
        auto [Z0, W0] = regressor_matrices(ds, lib);
        CHECK(Z0(0, 0) == doctest::Approx(3.0));
        CHECK(W0(0, 0) == doctest::Approx(0.0));
    }
    {
        auto lib = testutil::cubic2d_library();
        Dataset ds;
        ds.delta = 1.0;
        DataSample s;
        s.t = 0;
        s.x = Eigen::VectorXd::Ones(2);
        s.u = Eigen::VectorXd::Constant(1, 2.0);
        s.xdot = Eigen::VectorXd::Zero(2);
        ds.samples.push_back(s);
        auto [Z0, W0] = regressor_matrices(ds, lib);
        for (int i = 0; i < 4; ++i) CHECK(Z0(i, 0) == doctest::Approx(1.0));
        CHECK(W0(0, 0) == doctest::Approx(2.0));
    }
}

TEST_CASE("SVD rank of the stacked regressors matches the Gram-rank oracle") {
    auto ex = testutil::cubic2d_experiment(13, 20);
    auto [Z0, W0] = regressor_matrices(ex.dataset, ex.sys.library);
    Eigen::MatrixXd R(Z0.rows() + W0.rows(), Z0.cols());
    R << Z0, W0;
    Eigen::MatrixXd G = R * R.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    double emax = es.eigenvalues().maxCoeff();
    int gram_rank = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > 1e-12 * emax) ++gram_rank;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
    int svd_rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-8 * svd.singularValues()(0)) ++svd_rank;
    CHECK(svd_rank == gram_rank);
}

TEST_CASE("multiple trajectories concatenate into one dataset") {
    auto ex1 = testutil::cubic2d_experiment(21, 10);
    auto ex2 = testutil::cubic2d_experiment(22, 10);
    Dataset merged = ex1.dataset;
    for (auto& s : ex2.dataset.samples) merged.samples.push_back(s);
    merged.multi_trajectory = true;
    CHECK(merged.T() == 20);
    CHECK_NOTHROW(merged.validate());
}
