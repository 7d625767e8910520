#include "polyctl/verify.hpp"

#include <cmath>

namespace polyctl {

double DissipationTrace::min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : margin) m = std::min(m, v);
    return m;
}

namespace {

bool actuator_channel(CertificateKind k) {
    return k == CertificateKind::iss_actuator_biconvex ||
           k == CertificateKind::iss_actuator_convex || k == CertificateKind::model_based ||
           k == CertificateKind::gas;
}

Eigen::VectorXd sample_in_ball(int dim, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = g(rng);
    double nrm = v.norm();
    if (nrm < 1e-300) nrm = 1.0;
    return v * (radius * std::pow(u01(rng), 1.0 / dim) / nrm);
}

}  // namespace

Trajectory simulate_closed_loop(const TrueSystem& sys, const Certificate& cert,
                                const Signal& disturbance, const Eigen::VectorXd& x0,
                                double horizon, double step, double divergence_guard) {
    bool act = actuator_channel(cert.kind);
    if (act && cert.kind != CertificateKind::gas && disturbance.dim() != sys.library.ninput)
        throw std::invalid_argument("closed loop: actuator disturbance dimension mismatch");
    if (!act && disturbance.dim() != sys.library.nstate)
        throw std::invalid_argument("closed loop: process disturbance dimension mismatch");
    return integrate_closed_loop(sys, cert.k, x0, disturbance, act, horizon, step, divergence_guard);
}

DissipationTrace dissipation_trace(const Trajectory& traj, const TrueSystem& sys,
                                   const Certificate& cert, const Signal& disturbance) {
    const int n = sys.library.nstate;
    const int m = sys.library.ninput;
    bool act = actuator_channel(cert.kind);
    std::vector<Polynomial> dV;
    for (int v = 0; v < n; ++v) dV.push_back(cert.V.derivative(v));

    DissipationTrace tr;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        double t = traj.times[i];
        const Eigen::VectorXd& x = traj.states[i];
        std::span<const double> xs(x.data(), x.size());
        Eigen::VectorXd e = disturbance(t);
        Eigen::VectorXd u(m);
        for (int j = 0; j < m; ++j) u(j) = cert.k[j].eval(xs);
        if (act && cert.kind != CertificateKind::gas) u += e;
        Eigen::VectorXd f = sys.rhs(xs, std::span<const double>(u.data(), u.size()));
        if (!act) f += e;
        double vdot = 0.0;
        for (int v = 0; v < n; ++v) vdot += dV[v].eval(xs) * f(v);
        double bound = -cert.alpha3.eval(x.norm());
        if (cert.kind != CertificateKind::gas) bound += cert.alpha4.eval(e.norm());
        tr.times.push_back(t);
        tr.Vdot.push_back(vdot);
        tr.bound.push_back(bound);
        tr.margin.push_back(bound - vdot);
    }
    return tr;
}

namespace {

double dissipation_margin_at(const Certificate& cert, const FunctionLibrary& lib,
                             const Eigen::MatrixXd& AB, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& e, std::span<const Polynomial> dV) {
    const int m = lib.ninput;
    std::span<const double> xs(x.data(), x.size());
    Eigen::VectorXd u(m);
    for (int j = 0; j < m; ++j) u(j) = cert.k[j].eval(xs);
    bool act = actuator_channel(cert.kind);
    if (act && cert.kind != CertificateKind::gas) u += e;
    Eigen::VectorXd f = AB * lib.stacked_regressor(xs, std::span<const double>(u.data(), u.size()));
    if (!act) f += e;
    double vdot = 0.0;
    for (int v = 0; v < lib.nstate; ++v) vdot += dV[v].eval(xs) * f(v);
    double bound = -cert.alpha3.eval(x.norm());
    if (cert.kind != CertificateKind::gas) bound += cert.alpha4.eval(e.norm());
    return bound - vdot;
}

}  // namespace

RobustSampleReport robust_sample_check(const Certificate& cert, const EllipsoidModel& model,
                                       const FunctionLibrary& lib, const RobustSampleConfig& cfg) {
    model.validate();
    const int n = lib.nstate;
    const int q = model.q();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Eigen::MatrixXd Ais = model.Abar_inv_sqrt();
    std::vector<Polynomial> dV;
    for (int v = 0; v < n; ++v) dV.push_back(cert.V.derivative(v));

    RobustSampleReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.n_points; ++s) {
        Eigen::VectorXd x = sample_in_ball(n, cfg.x_radius, rng);
        Eigen::VectorXd e = cert.nexo > 0 ? sample_in_ball(cert.nexo, cfg.exo_radius, rng)
                                          : Eigen::VectorXd::Zero(0);
        Eigen::MatrixXd ups;
        if (s == 0) {
            ups = Eigen::MatrixXd::Zero(q, n);  // center member
        } else {
            Eigen::MatrixXd G(q, n);
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < n; ++j) G(i, j) = g(rng);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
            double smax = svd.singularValues()(0);
            double scale = s % 10 == 1 ? 1.0 : u01(rng);  // revisit the boundary often
            ups = G * (scale / std::max(smax, 1e-300));
        }
        Eigen::MatrixXd zeta = model.zeta_bar + Ais * ups * model.Qbar;  // Qbar^{1/2} = I
        Eigen::MatrixXd AB = zeta.transpose();
        double margin = dissipation_margin_at(cert, lib, AB, x, e, dV);
        rep.worst_margin = std::min(rep.worst_margin, margin);
        ++rep.samples;
    }
    return rep;
}

RobustSampleReport robust_sample_check_modelbased(const Certificate& cert, const TrueSystem& sys,
                                                  const RobustSampleConfig& cfg) {
    const int n = sys.library.nstate;
    std::mt19937_64 rng(cfg.seed);
    Eigen::MatrixXd AB(n, sys.library.N() + sys.library.M());
    AB << sys.A_star, sys.B_star;
    std::vector<Polynomial> dV;
    for (int v = 0; v < n; ++v) dV.push_back(cert.V.derivative(v));

    RobustSampleReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.n_points; ++s) {
        Eigen::VectorXd x = sample_in_ball(n, cfg.x_radius, rng);
        Eigen::VectorXd e = cert.nexo > 0 ? sample_in_ball(cert.nexo, cfg.exo_radius, rng)
                                          : Eigen::VectorXd::Zero(0);
        double margin = dissipation_margin_at(cert, sys.library, AB, x, e, dV);
        rep.worst_margin = std::min(rep.worst_margin, margin);
        ++rep.samples;
    }
    return rep;
}

PdRuReport check_pd_ru(std::span<const Polynomial> zhat, const Eigen::MatrixXd& P,
                       const PolyMatrix& Xi, const SolverConfig& scfg) {
    const int nh = static_cast<int>(zhat.size());
    if (nh == 0) throw std::invalid_argument("check_pd_ru: empty Zhat");
    const int n = zhat.front().nvars();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("check_pd_ru: P must be positive definite");
    Eigen::MatrixXd Pinv = P.llt().solve(Eigen::MatrixXd::Identity(nh, nh));
    Pinv = 0.5 * (Pinv + Pinv.transpose()).eval();

    Polynomial b(n);
    for (int c = 0; c < nh; ++c)
        for (int e = 0; e < nh; ++e) {
            Polynomial inner(n);
            for (int r1 = 0; r1 < nh; ++r1)
                for (int r2 = 0; r2 < nh; ++r2) {
                    double w = Pinv(c, r1) * Pinv(r2, e);
                    if (w != 0.0) inner += Xi.at(r1, r2) * w;
                }
            b += zhat[c] * inner * zhat[e];
        }

    PdRuReport rep;
    const double eps_floor = 1e-6;

    // first candidate minorant: |Zhat|^4 when its degree fits inside b
    Polynomial z2(n);
    for (auto& z : zhat) z2 += z * z;
    Polynomial z4 = z2 * z2;
    if (!b.is_zero() && z4.degree() <= b.degree()) {
        SosProgram prog;
        LinExpr eps = LinExpr::var(prog.new_scalar("eps", eps_floor));
        prog.add_scalar_sos("b_minus", DecisionPoly(b) - scale_poly(z4, eps));
        prog.add_objective(-eps);
        auto res = prog.solve(scfg);
        if (res.feasible() && prog.verify_all(res.sdp).front().pass) {
            rep.pass = true;
            rep.method = PdRuReport::Method::sos_sufficient;
            rep.epsilon_found = prog.value(eps, res.sdp);
            rep.note = "b - eps |Zhat|^4 is SOS";
            return rep;
        }
    }
    // general sufficient test: b dominates a class K-infinity power-sum minorant
    if (!b.is_zero() && b.degree() >= 2) {
        SosProgram prog;
        int K = b.degree() / 2;
        std::vector<LinExpr> eps;
        LinExpr sum;
        for (int k = 1; k <= K; ++k) {
            eps.push_back(LinExpr::var(prog.new_scalar("eps" + std::to_string(k), 0.0)));
            sum += eps.back();
        }
        prog.add_ge(sum, eps_floor);
        DecisionPoly target(b);
        for (int k = 1; k <= K; ++k) {
            Polynomial ps(n);
            for (int v = 0; v < n; ++v) {
                Monomial m = Monomial::unit(n);
                m.exponents[v] = 2 * k;
                ps.add_term(m, 1.0);
            }
            target = target - scale_poly(ps, eps[k - 1]);
        }
        prog.add_scalar_sos("b_minus_powersum", target);
        prog.add_objective(-sum);
        auto res = prog.solve(scfg);
        if (res.feasible() && prog.verify_all(res.sdp).front().pass) {
            rep.pass = true;
            rep.method = PdRuReport::Method::sos_sufficient;
            rep.epsilon_found = prog.value(sum, res.sdp);
            rep.note = "b minus an even power-sum minorant is SOS";
            return rep;
        }
    }

    // sampling fallback on norm shells; inconclusive but sampled
    rep.method = PdRuReport::Method::sampling_fallback;
    std::mt19937_64 rng(7);
    bool positive = !b.is_zero();
    double worst = std::numeric_limits<double>::infinity();
    for (double shell : {0.1, 1.0, 10.0}) {
        for (int s = 0; s < 500 && positive; ++s) {
            Eigen::VectorXd dir = sample_in_ball(n, 1.0, rng);
            if (dir.norm() < 1e-12) continue;
            dir *= shell / dir.norm();
            double v = b.eval(std::span<const double>(dir.data(), dir.size()));
            worst = std::min(worst, v);
            if (v <= 0.0) positive = false;
        }
    }
    rep.pass = positive;
    rep.epsilon_found = positive ? worst : 0.0;
    rep.note = positive ? "positive on sampled shells (inconclusive)" : "nonpositive sample found";
    return rep;
}

}  // namespace polyctl
