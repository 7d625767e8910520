#ifndef POLYCTL_VERIFY_HPP
#define POLYCTL_VERIFY_HPP

#include <random>

#include "polyctl/synth.hpp"

namespace polyctl {

/// Pointwise evaluation of the certified dissipation inequality along a
/// closed-loop trajectory of the true system: Vdot against
/// -alpha3(|x|) + alpha4(|exo|).
struct DissipationTrace {
    std::vector<double> times;
    std::vector<double> Vdot;
    std::vector<double> bound;
    std::vector<double> margin;  // bound - Vdot

    double min_margin() const;
};

/// RK4 simulation of the certificate's controller on the true system; the
/// disturbance enters the input channel for actuator certificates and
/// additively for process certificates.
Trajectory simulate_closed_loop(const TrueSystem& sys, const Certificate& cert,
                                const Signal& disturbance, const Eigen::VectorXd& x0,
                                double horizon, double step, double divergence_guard = 1e6);

DissipationTrace dissipation_trace(const Trajectory& traj, const TrueSystem& sys,
                                   const Certificate& cert, const Signal& disturbance);

struct RobustSampleConfig {
    int n_points = 1000;
    double x_radius = 3.0;
    double exo_radius = 1.0;
    std::uint64_t seed = 2024;
};

struct RobustSampleReport {
    double worst_margin = 0.0;
    int samples = 0;
    bool pass(double tol = 1e-6) const { return worst_margin >= -tol; }
};

/// Samples (x, exogenous input, Upsilon with ||Upsilon|| <= 1), instantiates
/// zeta = zeta_bar + Abar^{-1/2} Upsilon Qbar^{1/2} and evaluates the
/// certificate's dissipation inequality. For model-based certificates the true
/// pair is used and no Upsilon is sampled.
RobustSampleReport robust_sample_check(const Certificate& cert, const EllipsoidModel& model,
                                       const FunctionLibrary& lib, const RobustSampleConfig& cfg);
RobustSampleReport robust_sample_check_modelbased(const Certificate& cert, const TrueSystem& sys,
                                                  const RobustSampleConfig& cfg);

struct PdRuReport {
    enum class Method { sos_sufficient, sampling_fallback };
    bool pass = false;
    Method method = Method::sos_sufficient;
    double epsilon_found = 0.0;
    std::string note;
};

/// Positive-definiteness and radial unboundedness of
/// b(x) = Zhat^T P^{-1} Xi P^{-1} Zhat. Sufficient SOS test: b minus a class
/// K-infinity minorant built from even power sums (the quartic |Zhat|^4 form is
/// tried first when degrees permit) is SOS; dense shell sampling is the
/// inconclusive-but-sampled fallback.
PdRuReport check_pd_ru(std::span<const Polynomial> zhat, const Eigen::MatrixXd& P,
                       const PolyMatrix& Xi, const SolverConfig& scfg = {});

}  // namespace polyctl

#endif
