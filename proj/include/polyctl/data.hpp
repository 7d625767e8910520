#ifndef POLYCTL_DATA_HPP
#define POLYCTL_DATA_HPP

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyctl/poly.hpp"

namespace polyctl {

/// Known ground truth xdot = A* Z(x) + B* W(x) u used to generate data and to
/// verify certificates afterwards.
struct TrueSystem {
    Eigen::MatrixXd A_star;  // n x N
    Eigen::MatrixXd B_star;  // n x M
    FunctionLibrary library;

    void validate() const;
    int n() const { return static_cast<int>(A_star.rows()); }

    Eigen::VectorXd rhs(std::span<const double> x, std::span<const double> u) const;
};

/// Piecewise-linear interpolation of random or fixed knots.
struct SignalSpec {
    enum class Kind { interpolated_gaussian, interpolated_uniform_ball, constant, custom_samples, zero };
    Kind kind = Kind::zero;
    int dim = 1;
    double mean = 0.0;
    double stddev = 1.0;
    double radius = 1.0;
    double knot_spacing = 0.1;
    std::vector<double> constant_value;
    std::vector<double> sample_times;                 // custom_samples
    std::vector<std::vector<double>> sample_values;   // custom_samples

    static SignalSpec zero(int dim) {
        SignalSpec s;
        s.kind = Kind::zero;
        s.dim = dim;
        return s;
    }
    static SignalSpec gaussian(int dim, double mean, double stddev, double knot_spacing) {
        SignalSpec s;
        s.kind = Kind::interpolated_gaussian;
        s.dim = dim;
        s.mean = mean;
        s.stddev = stddev;
        s.knot_spacing = knot_spacing;
        return s;
    }
    static SignalSpec uniform_ball(int dim, double radius, double knot_spacing) {
        SignalSpec s;
        s.kind = Kind::interpolated_uniform_ball;
        s.dim = dim;
        s.radius = radius;
        s.knot_spacing = knot_spacing;
        return s;
    }
    static SignalSpec constant(std::vector<double> v) {
        SignalSpec s;
        s.kind = Kind::constant;
        s.dim = static_cast<int>(v.size());
        s.constant_value = std::move(v);
        return s;
    }
};

/// Realized signal: linear interpolation of knots. Interpolating knots inside
/// a norm ball stays inside the ball, so the declared bound is preserved.
class Signal {
public:
    Signal() = default;
    Signal(const SignalSpec& spec, double horizon, std::mt19937_64& rng);

    Eigen::VectorXd operator()(double t) const;
    int dim() const { return dim_; }

private:
    int dim_ = 0;
    double knot_spacing_ = 0.0;
    std::vector<Eigen::VectorXd> knots_;
    std::vector<double> custom_times_;
    std::vector<Eigen::VectorXd> custom_values_;
    Eigen::VectorXd constant_;
    SignalSpec::Kind kind_ = SignalSpec::Kind::zero;
};

struct Trajectory {
    double step = 0.0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    bool diverged = false;

    Eigen::VectorXd state_at(double t) const;  // linear interpolation on the grid
};

struct DataSample {
    double t = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    Eigen::VectorXd xdot;
};

struct Dataset {
    std::vector<DataSample> samples;
    double delta = 0.0;  // noise-energy bound, |d|^2 <= delta
    std::uint64_t seed = 0;
    bool multi_trajectory = false;

    int T() const { return static_cast<int>(samples.size()); }
    void validate() const;
};

/// Fixed-step classical fourth-order Runge–Kutta integration of
/// xdot = A* Z(x) + B* W(x) u(t) + d(t). States exceeding the divergence
/// guard truncate the trajectory and set the diverged flag.
Trajectory integrate_trajectory(const TrueSystem& sys, const Eigen::VectorXd& x0, const Signal& u,
                                const Signal& d, double horizon, double step,
                                double divergence_guard = 1e6);

/// Same integration under closed-loop input u = k(x) (+ w through the input
/// channel when `actuator` is true, additive d otherwise).
Trajectory integrate_closed_loop(const TrueSystem& sys, std::span<const Polynomial> controller,
                                 const Eigen::VectorXd& x0, const Signal& exo, bool actuator,
                                 double horizon, double step, double divergence_guard = 1e6);

/// Derivative samples are the exact model right-hand side plus the injected
/// noise realization; any sample violating |d|^2 <= delta is rejected.
Dataset collect_dataset(const Trajectory& traj, const TrueSystem& sys, const Signal& u,
                        const Signal& d, const std::vector<double>& sample_times, double delta);

/// Z0 (N x T) and W0 (M x T) with columns Z(x(ti)) and W(x(ti)) u(ti).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> regressor_matrices(const Dataset& ds,
                                                               const FunctionLibrary& lib);

}  // namespace polyctl

#endif
