#include "polyctl/consistency.hpp"

#include <cmath>
#include <sstream>

#include "polyctl/sos.hpp"

namespace polyctl {

void EllipsoidModel::validate() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Abar, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0)
        throw std::runtime_error("ellipsoid model: Abar is not positive definite");
    if ((Qbar - Eigen::MatrixXd::Identity(n(), n())).cwiseAbs().maxCoeff() > 1e-12)
        throw std::runtime_error("ellipsoid model: Qbar must be the identity");
    Eigen::MatrixXd zrec = -Abar.llt().solve(Bbar);
    if ((zrec - zeta_bar).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + zeta_bar.cwiseAbs().maxCoeff()))
        throw std::runtime_error("ellipsoid model: zeta_bar does not reproduce -Abar^{-1} Bbar");
    if (taus.size() && taus.minCoeff() < -1e-12)
        throw std::runtime_error("ellipsoid model: negative multiplier");
}

namespace {

Eigen::MatrixXd sym_power(const Eigen::MatrixXd& A, double expo) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    Eigen::VectorXd d = es.eigenvalues();
    for (int i = 0; i < d.size(); ++i) d(i) = std::pow(std::max(d(i), 1e-12), expo);
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd EllipsoidModel::Abar_inv_sqrt() const { return sym_power(Abar, -0.5); }
Eigen::MatrixXd EllipsoidModel::Abar_sqrt() const { return sym_power(Abar, 0.5); }

std::vector<SampleQuadric> build_sample_quadrics(const Dataset& ds, const FunctionLibrary& lib) {
    ds.validate();
    const int n = lib.nstate;
    std::vector<SampleQuadric> out;
    out.reserve(ds.samples.size());
    for (auto& s : ds.samples) {
        SampleQuadric sq;
        Eigen::VectorXd z = lib.stacked_regressor(std::span<const double>(s.x.data(), s.x.size()),
                                                  std::span<const double>(s.u.data(), s.u.size()));
        sq.Ci = s.xdot * s.xdot.transpose() - ds.delta * Eigen::MatrixXd::Identity(n, n);
        sq.Bi = -z * s.xdot.transpose();
        sq.Ai = z * z.transpose();
        out.push_back(std::move(sq));
    }
    return out;
}

EllipsoidModel solve_overapproximation(const std::vector<SampleQuadric>& quadrics, int nstate,
                                       const SolverConfig& cfg) {
    if (quadrics.empty()) throw std::invalid_argument("overapproximation: no sample quadrics");
    const int n = nstate;
    const int q = static_cast<int>(quadrics.front().Ai.rows());
    const int T = static_cast<int>(quadrics.size());

    // per-sample scaling keeps the multiplier columns well conditioned; the
    // returned taus are expressed against the original quadrics
    std::vector<SampleQuadric> scaled = quadrics;
    std::vector<double> qscale(T, 1.0);
    for (int i = 0; i < T; ++i) {
        double s = std::max({scaled[i].Ci.cwiseAbs().maxCoeff(), scaled[i].Bi.cwiseAbs().maxCoeff(),
                             scaled[i].Ai.cwiseAbs().maxCoeff(), 1e-12});
        qscale[i] = s;
        scaled[i].Ci /= s;
        scaled[i].Bi /= s;
        scaled[i].Ai /= s;
    }

    SosProgram prog;
    auto abar = prog.new_psd_matrix("Abar", q);
    std::vector<std::vector<LinExpr>> bbar(q, std::vector<LinExpr>(n));
    for (int a = 0; a < q; ++a)
        for (int c = 0; c < n; ++c) {
            std::ostringstream os;
            os << "Bbar[" << a << "," << c << "]";
            bbar[a][c] = LinExpr::var(prog.new_scalar(os.str()));
        }
    std::vector<LinExpr> tau(T);
    for (int i = 0; i < T; ++i) {
        std::ostringstream os;
        os << "tau[" << i << "]";
        tau[i] = LinExpr::var(prog.new_scalar(os.str(), 0.0));
    }

    // LMI entries; the slack block F satisfies F = -(LMI) entrywise
    const int dim = n + 2 * q;
    auto F = prog.new_psd_matrix("lmi_slack", dim);
    auto entry = [&](int r, int c) -> LinExpr {
        LinExpr e;
        auto in1 = [&](int k) { return k < n; };
        auto in2 = [&](int k) { return k >= n && k < n + q; };
        if (in1(r) && in1(c)) {
            e += LinExpr(r == c ? -1.0 : 0.0);
            for (int i = 0; i < T; ++i) e += LinExpr(tau[i]) *= -scaled[i].Ci(r, c);
        } else if (in2(r) && in1(c)) {
            int a = r - n;
            e += bbar[a][c];
            for (int i = 0; i < T; ++i) e += LinExpr(tau[i]) *= -scaled[i].Bi(a, c);
        } else if (in2(r) && in2(c)) {
            int a = r - n, b = c - n;
            e += abar.entries[a][b];
            for (int i = 0; i < T; ++i) e += LinExpr(tau[i]) *= -scaled[i].Ai(a, b);
        } else if (!in1(r) && !in2(r) && in1(c)) {
            int a = r - n - q;
            e += bbar[a][c];
        } else if (!in1(r) && !in2(r) && in2(c)) {
            // zero block
        } else {
            int a = r - n - q, b = c - n - q;
            e -= abar.entries[a][b];
        }
        return e;
    };
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c <= r; ++c) {
            LinExpr e = F.entries[std::min(r, c)][std::max(r, c)];
            e += entry(r, c);
            prog.add_eq(e, 0.0);
        }

    prog.problem().maxdet_block = abar.block;
    SdpSolution sol = solve_maxdet(prog.problem(), cfg);
    if (sol.status == SdpSolution::Status::infeasible)
        throw OverapproximationError(
            "overapproximation program infeasible; collect more data so that the stacked "
            "regressor matrix [Z0; W0] has full row rank");
    if (!sol.ok())
        throw OverapproximationError("overapproximation solve failed: " + sol.message);

    EllipsoidModel model;
    model.Abar = sol.block_values.at("Abar");
    model.Abar = 0.5 * (model.Abar + model.Abar.transpose()).eval();
    {
        // a numerically singular Abar means the consistency set is unbounded
        // in some direction; the positive-definiteness the program requires
        // cannot hold
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.Abar, Eigen::EigenvaluesOnly);
        double lmin = es.eigenvalues().minCoeff();
        double lmax = es.eigenvalues().maxCoeff();
        if (lmin <= 1e-9 * std::max(1.0, lmax))
            throw OverapproximationError(
                "overapproximation degenerate: Abar is numerically singular; collect more data "
                "so that the stacked regressor matrix [Z0; W0] has full row rank");
    }
    model.Bbar.resize(q, n);
    for (int a = 0; a < q; ++a)
        for (int c = 0; c < n; ++c) model.Bbar(a, c) = prog.value(bbar[a][c], sol);
    model.taus.resize(T);
    for (int i = 0; i < T; ++i) model.taus(i) = std::max(0.0, prog.value(tau[i], sol) / qscale[i]);
    model.zeta_bar = -model.Abar.llt().solve(model.Bbar);
    model.Qbar = Eigen::MatrixXd::Identity(n, n);
    model.log_det = sol.log_det;
    model.validate();
    return model;
}

bool membership_exact(const Eigen::MatrixXd& AB, const Dataset& ds, const FunctionLibrary& lib) {
    ds.validate();
    if (AB.rows() != lib.nstate || AB.cols() != lib.N() + lib.M())
        throw std::invalid_argument("membership: AB must be n x (N+M)");
    for (auto& s : ds.samples) {
        Eigen::VectorXd z = lib.stacked_regressor(std::span<const double>(s.x.data(), s.x.size()),
                                                  std::span<const double>(s.u.data(), s.u.size()));
        double r = (s.xdot - AB * z).squaredNorm();
        if (r > ds.delta + 1e-9) return false;
    }
    return true;
}

double membership_ellipsoid_margin(const Eigen::MatrixXd& AB, const EllipsoidModel& model) {
    if (AB.rows() != model.n() || AB.cols() != model.q())
        throw std::invalid_argument("membership: AB must be n x (N+M)");
    Eigen::MatrixXd zeta = AB.transpose();
    Eigen::MatrixXd lhs = model.Bbar.transpose() * model.Abar.llt().solve(model.Bbar) +
                          model.Bbar.transpose() * zeta + zeta.transpose() * model.Bbar +
                          zeta.transpose() * model.Abar * zeta -
                          Eigen::MatrixXd::Identity(model.n(), model.n());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (lhs + lhs.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

bool membership_ellipsoid(const Eigen::MatrixXd& AB, const EllipsoidModel& model) {
    double scale = 1.0 + std::max(model.Abar.cwiseAbs().maxCoeff(), model.Bbar.cwiseAbs().maxCoeff());
    return membership_ellipsoid_margin(AB, model) <= 1e-6 * scale;
}

RankReport rank_check(const Dataset& ds, const FunctionLibrary& lib) {
    auto [Z0, W0] = regressor_matrices(ds, lib);
    Eigen::MatrixXd R(Z0.rows() + W0.rows(), Z0.cols());
    R << Z0, W0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
    RankReport rep;
    rep.singular_values = svd.singularValues();
    if (R.cols() < R.rows()) {
        rep.full_row_rank = false;
        return rep;
    }
    double smax = rep.singular_values(0);
    double smin = rep.singular_values(rep.singular_values.size() - 1);
    rep.full_row_rank = smax > 0 && smin > 1e-8 * smax;
    return rep;
}

}  // namespace polyctl
