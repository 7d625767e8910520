#include "polyctl/data.hpp"

#include <cmath>
#include <stdexcept>

namespace polyctl {

void TrueSystem::validate() const {
    library.validate();
    if (A_star.rows() != library.nstate || A_star.cols() != library.N())
        throw std::invalid_argument("system: A* must be n x N");
    if (B_star.rows() != library.nstate || B_star.cols() != library.M())
        throw std::invalid_argument("system: B* must be n x M");
}

Eigen::VectorXd TrueSystem::rhs(std::span<const double> x, std::span<const double> u) const {
    return A_star * library.eval_Z(x) + B_star * (library.eval_W(x) * Eigen::Map<const Eigen::VectorXd>(
                                                      u.data(), static_cast<Eigen::Index>(u.size())));
}

Signal::Signal(const SignalSpec& spec, double horizon, std::mt19937_64& rng) {
    dim_ = spec.dim;
    kind_ = spec.kind;
    knot_spacing_ = spec.knot_spacing;
    switch (spec.kind) {
        case SignalSpec::Kind::zero:
            constant_ = Eigen::VectorXd::Zero(dim_);
            break;
        case SignalSpec::Kind::constant:
            constant_ = Eigen::Map<const Eigen::VectorXd>(spec.constant_value.data(),
                                                          static_cast<Eigen::Index>(spec.constant_value.size()));
            dim_ = static_cast<int>(constant_.size());
            break;
        case SignalSpec::Kind::interpolated_gaussian: {
            if (spec.knot_spacing <= 0) throw std::invalid_argument("signal: knot spacing must be positive");
            int nknots = static_cast<int>(std::ceil(horizon / spec.knot_spacing)) + 2;
            std::normal_distribution<double> g(spec.mean, spec.stddev);
            for (int k = 0; k < nknots; ++k) {
                Eigen::VectorXd v(dim_);
                for (int i = 0; i < dim_; ++i) v(i) = g(rng);
                knots_.push_back(std::move(v));
            }
            break;
        }
        case SignalSpec::Kind::interpolated_uniform_ball: {
            if (spec.knot_spacing <= 0) throw std::invalid_argument("signal: knot spacing must be positive");
            int nknots = static_cast<int>(std::ceil(horizon / spec.knot_spacing)) + 2;
            std::normal_distribution<double> g(0.0, 1.0);
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            for (int k = 0; k < nknots; ++k) {
                Eigen::VectorXd v(dim_);
                for (int i = 0; i < dim_; ++i) v(i) = g(rng);
                double nrm = v.norm();
                if (nrm < 1e-300) nrm = 1.0;
                double r = spec.radius * std::pow(u01(rng), 1.0 / dim_);
                v *= r / nrm;
                knots_.push_back(std::move(v));
            }
            break;
        }
        case SignalSpec::Kind::custom_samples: {
            if (spec.sample_times.size() != spec.sample_values.size() || spec.sample_times.empty())
                throw std::invalid_argument("signal: custom samples need matching times and values");
            custom_times_ = spec.sample_times;
            for (auto& v : spec.sample_values)
                custom_values_.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                                           static_cast<Eigen::Index>(v.size())));
            dim_ = static_cast<int>(custom_values_.front().size());
            break;
        }
    }
}

Eigen::VectorXd Signal::operator()(double t) const {
    switch (kind_) {
        case SignalSpec::Kind::zero:
        case SignalSpec::Kind::constant:
            return constant_;
        case SignalSpec::Kind::interpolated_gaussian:
        case SignalSpec::Kind::interpolated_uniform_ball: {
            double s = std::max(t, 0.0) / knot_spacing_;
            int k = static_cast<int>(std::floor(s));
            if (k >= static_cast<int>(knots_.size()) - 1) return knots_.back();
            double a = s - k;
            return (1.0 - a) * knots_[k] + a * knots_[k + 1];
        }
        case SignalSpec::Kind::custom_samples: {
            if (t <= custom_times_.front()) return custom_values_.front();
            if (t >= custom_times_.back()) return custom_values_.back();
            auto it = std::upper_bound(custom_times_.begin(), custom_times_.end(), t);
            int k = static_cast<int>(it - custom_times_.begin()) - 1;
            double a = (t - custom_times_[k]) / (custom_times_[k + 1] - custom_times_[k]);
            return (1.0 - a) * custom_values_[k] + a * custom_values_[k + 1];
        }
    }
    return Eigen::VectorXd::Zero(dim_);
}

Eigen::VectorXd Trajectory::state_at(double t) const {
    if (times.empty()) throw std::runtime_error("empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    double s = (t - times.front()) / step;
    int k = static_cast<int>(std::floor(s));
    k = std::min(k, static_cast<int>(times.size()) - 2);
    double a = (t - times[k]) / step;
    return (1.0 - a) * states[k] + a * states[k + 1];
}

void Dataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset: T must be >= 1");
    if (delta <= 0) throw std::invalid_argument("dataset: delta must be positive");
    const auto& s0 = samples.front();
    for (auto& s : samples)
        if (s.x.size() != s0.x.size() || s.u.size() != s0.u.size() || s.xdot.size() != s0.xdot.size())
            throw std::invalid_argument("dataset: inconsistent sample dimensions");
}

namespace {

template <typename Rhs>
Trajectory rk4(const Eigen::VectorXd& x0, double horizon, double step, double guard, Rhs&& f) {
    if (step <= 0 || horizon < step) throw std::invalid_argument("integration: need step > 0, horizon >= step");
    Trajectory traj;
    traj.step = step;
    int nsteps = static_cast<int>(std::llround(horizon / step));
    Eigen::VectorXd x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (int k = 0; k < nsteps; ++k) {
        double t = k * step;
        Eigen::VectorXd k1 = f(t, x);
        Eigen::VectorXd k2 = f(t + step / 2, x + (step / 2) * k1);
        Eigen::VectorXd k3 = f(t + step / 2, x + (step / 2) * k2);
        Eigen::VectorXd k4 = f(t + step, x + step * k3);
        x = x + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        if (!x.allFinite() || x.norm() > guard) {
            traj.diverged = true;
            break;
        }
        traj.times.push_back((k + 1) * step);
        traj.states.push_back(x);
    }
    return traj;
}

}  // namespace

Trajectory integrate_trajectory(const TrueSystem& sys, const Eigen::VectorXd& x0, const Signal& u,
                                const Signal& d, double horizon, double step, double divergence_guard) {
    sys.validate();
    return rk4(x0, horizon, step, divergence_guard, [&](double t, const Eigen::VectorXd& x) {
        Eigen::VectorXd ut = u(t);
        Eigen::VectorXd r = sys.rhs(std::span<const double>(x.data(), x.size()),
                                    std::span<const double>(ut.data(), ut.size()));
        return (r + d(t)).eval();
    });
}

Trajectory integrate_closed_loop(const TrueSystem& sys, std::span<const Polynomial> controller,
                                 const Eigen::VectorXd& x0, const Signal& exo, bool actuator,
                                 double horizon, double step, double divergence_guard) {
    sys.validate();
    const int m = sys.library.ninput;
    if (static_cast<int>(controller.size()) != m)
        throw std::invalid_argument("closed loop: controller dimension mismatch");
    return rk4(x0, horizon, step, divergence_guard, [&](double t, const Eigen::VectorXd& x) {
        std::span<const double> xs(x.data(), x.size());
        Eigen::VectorXd u(m);
        for (int i = 0; i < m; ++i) u(i) = controller[i].eval(xs);
        Eigen::VectorXd e = exo(t);
        if (actuator) u += e;
        Eigen::VectorXd r = sys.rhs(xs, std::span<const double>(u.data(), u.size()));
        if (!actuator) r += e;
        return r;
    });
}

Dataset collect_dataset(const Trajectory& traj, const TrueSystem& sys, const Signal& u,
                        const Signal& d, const std::vector<double>& sample_times, double delta) {
    if (delta <= 0) throw std::invalid_argument("collect: delta must be positive");
    if (traj.times.empty()) throw std::invalid_argument("collect: empty trajectory");
    Dataset ds;
    ds.delta = delta;
    for (double t : sample_times) {
        if (t < traj.times.front() || t > traj.times.back())
            throw std::invalid_argument("collect: sample time outside trajectory support");
        DataSample s;
        s.t = t;
        s.x = traj.state_at(t);
        s.u = u(t);
        Eigen::VectorXd noise = d(t);
        if (noise.squaredNorm() > delta * (1.0 + 1e-12))
            throw std::runtime_error("collect: noise sample violates |d|^2 <= delta");
        s.xdot = sys.rhs(std::span<const double>(s.x.data(), s.x.size()),
                         std::span<const double>(s.u.data(), s.u.size())) +
                 noise;
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> regressor_matrices(const Dataset& ds,
                                                               const FunctionLibrary& lib) {
    ds.validate();
    const int T = ds.T();
    Eigen::MatrixXd Z0(lib.N(), T), W0(lib.M(), T);
    for (int i = 0; i < T; ++i) {
        const auto& s = ds.samples[i];
        Z0.col(i) = lib.eval_Z(std::span<const double>(s.x.data(), s.x.size()));
        W0.col(i) = lib.eval_W(std::span<const double>(s.x.data(), s.x.size())) * s.u;
    }
    return {Z0, W0};
}

}  // namespace polyctl
