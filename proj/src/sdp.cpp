#include "polyctl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <Eigen/Sparse>
#include <cstdio>
#include <cstdlib>

namespace polyctl {

void SdpProblem::validate() const {
    auto check_block_term = [&](const BlockTerm& t) {
        if (t.block < 0 || t.block >= static_cast<int>(blocks.size()))
            throw std::invalid_argument("equality references undeclared PSD block");
        int d = blocks[t.block].dim;
        if (t.row < 0 || t.col < 0 || t.row >= d || t.col >= d || t.row > t.col)
            throw std::invalid_argument("block term index out of range (need row <= col)");
    };
    auto check_scalar_term = [&](const ScalarTerm& t) {
        if (t.var < 0 || t.var >= static_cast<int>(scalars.size()))
            throw std::invalid_argument("equality references undeclared scalar");
    };
    for (auto& b : blocks)
        if (b.dim < 1) throw std::invalid_argument("PSD block dimension must be >= 1");
    for (auto& eq : equalities) {
        for (auto& t : eq.blocks) check_block_term(t);
        for (auto& t : eq.scalars) check_scalar_term(t);
    }
    for (auto& t : obj_blocks) check_block_term(t);
    for (auto& t : obj_scalars) check_scalar_term(t);
    if (maxdet_block && (*maxdet_block < 0 || *maxdet_block >= static_cast<int>(blocks.size())))
        throw std::invalid_argument("maxdet block out of range");
}

void SdpProblem::dump(std::ostream& os) const {
    os << "# blocks\n";
    for (std::size_t b = 0; b < blocks.size(); ++b)
        os << "b " << b << " " << blocks[b].dim << " " << blocks[b].name << "\n";
    os << "# scalars\n";
    for (std::size_t s = 0; s < scalars.size(); ++s) {
        os << "s " << s;
        if (scalars[s].lower) os << " " << *scalars[s].lower;
        else os << " free";
        os << " " << scalars[s].name << "\n";
    }
    auto line = [&](int con, int blk, int r, int c, double v) {
        os << con << " " << blk << " " << r << " " << c << " " << v << "\n";
    };
    for (auto& t : obj_blocks) line(0, t.block, t.row, t.col, t.coef);
    for (auto& t : obj_scalars) line(0, -1, t.var, 0, t.coef);
    for (std::size_t i = 0; i < equalities.size(); ++i) {
        int id = static_cast<int>(i) + 1;
        for (auto& t : equalities[i].blocks) line(id, t.block, t.row, t.col, t.coef);
        for (auto& t : equalities[i].scalars) line(id, -1, t.var, 0, t.coef);
        os << id << " rhs " << equalities[i].rhs << "\n";
    }
}

const char* to_string(SdpSolution::Status s) {
    switch (s) {
        case SdpSolution::Status::optimal: return "optimal";
        case SdpSolution::Status::feasible: return "feasible";
        case SdpSolution::Status::infeasible: return "infeasible";
        case SdpSolution::Status::numerical_failure: return "numerical_failure";
    }
    return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BTerm {
    int con;
    int r, c;
    double v;
};

// Problem in internal cone form after scalar splitting, lower-bound shifting,
// free-variable elimination and row equilibration.
struct Instance {
    std::vector<int> dims;                    // PSD block dims
    std::vector<std::vector<BTerm>> blk_terms;  // per block, sorted by con
    std::vector<std::vector<std::pair<int, double>>> lp_cons;  // per LP var: (con, coef)
    MatrixXd Gf;        // m x p free coefficients
    VectorXd b;         // m
    std::vector<MatrixXd> C;  // per block objective
    VectorXd c_lp, c_f;
    double obj_offset = 0.0;
    double obj_scale = 1.0;   // objective was divided by this
    VectorXd row_scale;       // equality i was divided by row_scale(i)

    int nblocks() const { return static_cast<int>(dims.size()); }
    int m() const { return static_cast<int>(b.size()); }
    int q() const { return static_cast<int>(c_lp.size()); }
    int p() const { return static_cast<int>(c_f.size()); }
};

struct Iterate {
    std::vector<MatrixXd> X, S;
    VectorXd l, z, f, y;
};

struct RawResult {
    SdpSolution::Status status = SdpSolution::Status::numerical_failure;
    Iterate it;
    int iterations = 0;
    std::string message;
};

double sym_dot(const std::vector<BTerm>& terms, int first, int last, const MatrixXd& V) {
    double s = 0.0;
    for (int k = first; k < last; ++k) {
        const BTerm& t = terms[k];
        s += t.r == t.c ? t.v * V(t.r, t.r) : 2.0 * t.v * V(t.r, t.c);
    }
    return s;
}

// <A_i, X> over all blocks for constraint i requires per-constraint term
// lists; we instead accumulate constraint-major sweeps where needed.

class Ipm {
public:
    Ipm(const Instance& inst, const SolverConfig& cfg) : P(inst), cfg_(cfg) {
        // per-block constraint ranges: consecutive runs of equal `con`
        for (auto& terms : P.blk_terms) {
            std::vector<std::pair<int, std::pair<int, int>>> runs;
            int k = 0, n = static_cast<int>(terms.size());
            while (k < n) {
                int j = k;
                while (j < n && terms[j].con == terms[k].con) ++j;
                runs.push_back({terms[k].con, {k, j}});
                k = j;
            }
            runs_.push_back(std::move(runs));
        }
    }

    RawResult run() {
        RawResult res;
        const int m = P.m();
        if (m == 0) {
            res.message = "no equality constraints";
            return res;
        }
        init_point();
        const double bnorm = std::max(1.0, P.b.lpNorm<Eigen::Infinity>());
        double cnorm = 1.0;
        for (auto& Cb : P.C) if (Cb.size()) cnorm = std::max(cnorm, Cb.cwiseAbs().maxCoeff());
        if (P.q()) cnorm = std::max(cnorm, P.c_lp.cwiseAbs().maxCoeff());
        if (P.p()) cnorm = std::max(cnorm, P.c_f.cwiseAbs().maxCoeff());

        int ntot = P.q();
        for (int d : P.dims) ntot += d;
        ntot = std::max(ntot, 1);

        int stall = 0;
        Iterate best = it_;
        double best_score = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < cfg_.max_iters; ++iter) {
            res.iterations = iter;
            compute_residuals();
            double mu = complementarity() / ntot;
            double pinf = rp_.size() ? rp_.lpNorm<Eigen::Infinity>() / bnorm : 0.0;
            double dinf = dual_inf_norm() / cnorm;
            double pobj = primal_obj(), dobj = P.b.dot(it_.y);
            // two complementarity measures: the strict one decides optimality
            // (objective precision), the iterate-scaled one only classifies
            // stalled-but-feasible endpoints
            double compl_ = complementarity();
            double gap_strict = compl_ / (1.0 + std::abs(pobj) + std::abs(dobj));
            double gap = compl_ / (1.0 + std::abs(pobj) + std::abs(dobj) + iterate_trace());
            double score = pinf + 1e-4 * dinf + 1e-5 * gap + 1e-7 * gap_strict;
            if (score < best_score) {
                best_score = score;
                best = it_;
            }
            if (cfg_.verbose) {
                std::ostringstream os;
                os << "it " << iter << " mu " << mu << " pinf " << pinf << " dinf " << dinf
                   << " gap " << gap;
                res.message += os.str() + "\n";
            }
            if (pinf <= cfg_.feas_tol && dinf <= cfg_.feas_tol && gap_strict <= cfg_.gap_tol) {
                res.status = SdpSolution::Status::optimal;
                res.it = it_;
                return res;
            }
            if (iter >= 3 && pinf > 100 * cfg_.feas_tol && primal_infeasibility_certificate()) {
                res.status = SdpSolution::Status::infeasible;
                res.it = it_;
                res.message += "primal infeasibility certificate found";
                return res;
            }
            if (mu < 1e-15) {
                break;  // complementarity exhausted; classify the best iterate
            }

            if (!prepare_scaling_objects()) {
                res.message += "scaling factorization failed";
                break;
            }
            if (!build_schur()) {
                res.message += "Schur factorization failed";
                break;
            }

            // predictor
            Step aff;
            if (!solve_newton(0.0, mu, nullptr, aff)) {
                res.message += "Newton solve failed";
                break;
            }
            double ap = std::min(1.0, 0.98 * max_primal_step(aff));
            double ad = std::min(1.0, 0.98 * max_dual_step(aff));
            double mu_aff = complementarity_after(aff, ap, ad) / ntot;
            double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3.0);
            sigma = std::min(1.0, std::max(sigma, 1e-8));

            // corrector
            Step dir;
            if (!solve_newton(sigma, mu, &aff, dir)) {
                res.message += "corrector solve failed";
                break;
            }
            ap = std::min(1.0, 0.98 * max_primal_step(dir));
            ad = std::min(1.0, 0.98 * max_dual_step(dir));
            if (cfg_.verbose) {
                std::ostringstream os;
                os << "   sigma " << sigma << " ap " << ap << " ad " << ad << " ridge " << last_ridge_;
                res.message += os.str() + "\n";
            }
            apply_step(dir, ap, ad);

            if (ap < 1e-4 && ad < 1e-4) {
                if (++stall >= 8) {
                    res.message += "step sizes stalled";
                    break;
                }
            } else {
                stall = 0;
            }
        }
        if (std::getenv("POLYCTL_DEBUG_BLOCKS")) {
            for (int b = 0; b < P.nblocks(); ++b) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> ex(it_.X[b], Eigen::EigenvaluesOnly);
                Eigen::SelfAdjointEigenSolver<MatrixXd> es2(it_.S[b], Eigen::EigenvaluesOnly);
                std::fprintf(stderr, "[blk %d dim %d] X eig [%.2e, %.2e] S eig [%.2e, %.2e]\n", b,
                             P.dims[b], ex.eigenvalues().minCoeff(), ex.eigenvalues().maxCoeff(),
                             es2.eigenvalues().minCoeff(), es2.eigenvalues().maxCoeff());
            }
        }
        // final classification of the best iterate seen
        it_ = best;
        compute_residuals();
        if (std::getenv("POLYCTL_DEBUG_ROWS")) {
            std::vector<int> idx(P.m());
            for (int i = 0; i < P.m(); ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](int a, int b2) { return std::abs(rp_(a)) > std::abs(rp_(b2)); });
            for (int k = 0; k < std::min(6, P.m()); ++k)
                std::fprintf(stderr, "[row] %d residual %.3e rhs %.3e\n", idx[k], rp_(idx[k]),
                             P.b(idx[k]));
        }
        double pinf = rp_.size() ? rp_.lpNorm<Eigen::Infinity>() / bnorm : 0.0;
        double dinf = dual_inf_norm() / cnorm;
        double pobj = primal_obj(), dobj = P.b.dot(it_.y);
        double gap = complementarity() / (1.0 + std::abs(pobj) + std::abs(dobj) + iterate_trace());
        if (pinf > 100 * cfg_.feas_tol && primal_infeasibility_certificate()) {
            res.status = SdpSolution::Status::infeasible;
            res.message += "primal infeasibility certificate found";
        } else if (pinf <= 1e-5 && dinf <= 1e-2 && gap <= 1e-3) {
            // near-optimal but numerically stalled: the point is still handed
            // to the independent residual recheck before being accepted
            res.status = SdpSolution::Status::feasible;
        } else {
            res.status = SdpSolution::Status::numerical_failure;
            std::ostringstream os;
            os << " (pinf " << pinf << " dinf " << dinf << " gap " << gap << ")";
            res.message += os.str();
        }
        res.it = it_;
        return res;
    }

private:
    struct Step {
        std::vector<MatrixXd> dX, dS;
        VectorXd dl, dz, df, dy;
    };

    const Instance& P;
    SolverConfig cfg_;
    std::vector<std::vector<std::pair<int, std::pair<int, int>>>> runs_;
    Iterate it_;
    VectorXd rp_, rz_, rf_;
    std::vector<MatrixXd> Rd_, Sinv_;
    MatrixXd schur_;
    Eigen::LLT<MatrixXd> schur_llt_;
    MatrixXd schur_U_;              // M^{-1} Gf
    Eigen::LDLT<MatrixXd> w_ldlt_;  // Gf^T M^{-1} Gf (PSD)
    double last_ridge_ = 0.0;

    void init_point() {
        double s0 = std::max(10.0, 2.0 * P.b.lpNorm<Eigen::Infinity>());
        it_.X.clear();
        it_.S.clear();
        for (int d : P.dims) {
            it_.X.push_back(MatrixXd::Identity(d, d) * s0);
            it_.S.push_back(MatrixXd::Identity(d, d) * s0);
        }
        it_.l = VectorXd::Constant(P.q(), s0);
        it_.z = VectorXd::Constant(P.q(), s0);
        it_.f = VectorXd::Zero(P.p());
        it_.y = VectorXd::Zero(P.m());
    }

    double complementarity() const {
        double s = it_.l.dot(it_.z);
        for (int b = 0; b < P.nblocks(); ++b) s += it_.X[b].cwiseProduct(it_.S[b]).sum();
        return s;
    }

    double iterate_trace() const {
        double t = it_.l.size() ? it_.l.sum() : 0.0;
        for (auto& X : it_.X) t += X.trace();
        return t;
    }

    double complementarity_after(const Step& st, double ap, double ad) const {
        double s = (it_.l + ap * st.dl).dot(it_.z + ad * st.dz);
        for (int b = 0; b < P.nblocks(); ++b)
            s += (it_.X[b] + ap * st.dX[b]).cwiseProduct(it_.S[b] + ad * st.dS[b]).sum();
        return s;
    }

    double primal_obj() const {
        double s = it_.l.size() ? P.c_lp.dot(it_.l) : 0.0;
        if (it_.f.size()) s += P.c_f.dot(it_.f);
        for (int b = 0; b < P.nblocks(); ++b) s += P.C[b].cwiseProduct(it_.X[b]).sum();
        return s;
    }

    void compute_residuals() {
        rp_ = P.b;
        for (int b = 0; b < P.nblocks(); ++b)
            for (auto& t : P.blk_terms[b])
                rp_(t.con) -= t.r == t.c ? t.v * it_.X[b](t.r, t.r) : 2.0 * t.v * it_.X[b](t.r, t.c);
        for (int k = 0; k < P.q(); ++k)
            for (auto& [con, coef] : P.lp_cons[k]) rp_(con) -= coef * it_.l(k);
        if (P.p()) rp_ -= P.Gf * it_.f;

        Rd_.assign(P.nblocks(), MatrixXd());
        for (int b = 0; b < P.nblocks(); ++b) {
            Rd_[b] = P.C[b] - it_.S[b];
            for (auto& t : P.blk_terms[b]) {
                Rd_[b](t.r, t.c) -= t.v * it_.y(t.con);
                if (t.r != t.c) Rd_[b](t.c, t.r) -= t.v * it_.y(t.con);
            }
        }
        rz_ = P.c_lp - it_.z;
        for (int k = 0; k < P.q(); ++k)
            for (auto& [con, coef] : P.lp_cons[k]) rz_(k) -= coef * it_.y(con);
        rf_ = P.c_f;
        if (P.p()) rf_ -= P.Gf.transpose() * it_.y;
    }

    double dual_inf_norm() const {
        double s = 0.0;
        for (auto& R : Rd_) if (R.size()) s = std::max(s, R.cwiseAbs().maxCoeff());
        if (rz_.size()) s = std::max(s, rz_.lpNorm<Eigen::Infinity>());
        if (rf_.size()) s = std::max(s, rf_.lpNorm<Eigen::Infinity>());
        return s;
    }

    // Farkas ray: y with A^T(y) <= 0 on every cone, G_f^T y = 0 and b^T y > 0.
    // The ray is normalized by its own size so the violation is compared
    // against the certified positive value, never against a blown-up scale.
    bool primal_infeasibility_certificate() const {
        double ynorm = it_.y.size() ? it_.y.lpNorm<Eigen::Infinity>() : 0.0;
        if (ynorm <= 0.0) return false;
        VectorXd yh = it_.y / ynorm;
        double val = P.b.dot(yh);
        if (val <= 1e-6) return false;
        double viol = 0.0;
        for (int b = 0; b < P.nblocks(); ++b) {
            MatrixXd Ay = MatrixXd::Zero(P.dims[b], P.dims[b]);
            for (auto& t : P.blk_terms[b]) {
                Ay(t.r, t.c) += t.v * yh(t.con);
                if (t.r != t.c) Ay(t.c, t.r) += t.v * yh(t.con);
            }
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(Ay, Eigen::EigenvaluesOnly);
            viol = std::max(viol, es.eigenvalues().maxCoeff());
        }
        for (int k = 0; k < P.q(); ++k) {
            double g = 0.0;
            for (auto& [con, coef] : P.lp_cons[k]) g += coef * yh(con);
            viol = std::max(viol, g);
        }
        if (P.p()) viol = std::max(viol, (P.Gf.transpose() * yh).lpNorm<Eigen::Infinity>());
        if (const char* dbg = std::getenv("POLYCTL_DEBUG_CERT"); dbg && viol <= 1e-5 * val)
            std::fprintf(stderr, "[cert] val %.3e viol %.3e ynorm %.3e\n", val, viol, ynorm);
        // a ray certifies emptiness only up to solutions of size val/viol;
        // certificate cones legitimately hold solutions of very large scale
        return viol <= 1e-10 * val && val >= 1e-5;
    }

    bool prepare_scaling_objects() {
        Sinv_.assign(P.nblocks(), MatrixXd());
        for (int b = 0; b < P.nblocks(); ++b) {
            const int n = P.dims[b];
            double jitter = 0.0;
            double base = std::max(it_.S[b].trace() / n, 1e-300);
            bool done = false;
            for (int attempt = 0; attempt < 8 && !done; ++attempt) {
                MatrixXd Sreg = it_.S[b];
                if (jitter > 0.0) Sreg.diagonal().array() += jitter;
                Eigen::LLT<MatrixXd> llt(Sreg);
                if (llt.info() == Eigen::Success) {
                    Sinv_[b] = llt.solve(MatrixXd::Identity(n, n));
                    done = true;
                } else {
                    jitter = jitter == 0.0 ? 1e-14 * base : jitter * 100;
                }
            }
            if (!done) return false;
        }
        return true;
    }

    bool build_schur() {
        const int m = P.m();
        schur_ = MatrixXd::Zero(m, m);
        for (int b = 0; b < P.nblocks(); ++b) {
            const auto& terms = P.blk_terms[b];
            const auto& runs = runs_[b];
            const MatrixXd& X = it_.X[b];
            const MatrixXd& Si = Sinv_[b];
            const int n = P.dims[b];
            MatrixXd U(n, n), V(n, n);
            for (std::size_t jj = 0; jj < runs.size(); ++jj) {
                int j = runs[jj].first;
                auto [jf, jl] = runs[jj].second;
                U.setZero();
                for (int k = jf; k < jl; ++k) {
                    const BTerm& t = terms[k];
                    U.noalias() += t.v * X.col(t.r) * Si.row(t.c);
                    if (t.r != t.c) U.noalias() += t.v * X.col(t.c) * Si.row(t.r);
                }
                V = 0.5 * (U + U.transpose());
                for (std::size_t ii = 0; ii <= jj; ++ii) {
                    int i = runs[ii].first;
                    auto [ifirst, ilast] = runs[ii].second;
                    double vdot = sym_dot(terms, ifirst, ilast, V);
                    if (i <= j) schur_(i, j) += vdot;
                    else schur_(j, i) += vdot;
                }
            }
        }
        for (int k = 0; k < P.q(); ++k) {
            double w = it_.l(k) / it_.z(k);
            const auto& cons = P.lp_cons[k];
            for (std::size_t a = 0; a < cons.size(); ++a)
                for (std::size_t bb = a; bb < cons.size(); ++bb) {
                    int i = cons[a].first, j = cons[bb].first;
                    double v = w * cons[a].second * cons[bb].second;
                    if (i <= j) schur_(i, j) += v;
                    else schur_(j, i) += v;
                }
        }
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) schur_(j, i) = schur_(i, j);

        double ridge = 0.0;
        last_ridge_ = 0.0;
        double base = std::max(schur_.diagonal().maxCoeff(), 1.0);
        for (int attempt = 0; attempt < 6; ++attempt) {
            MatrixXd Mreg = schur_;
            if (ridge > 0.0) Mreg.diagonal().array() += ridge;
            schur_llt_.compute(Mreg);
            if (schur_llt_.info() == Eigen::Success) {
                if (P.p()) {
                    schur_U_ = schur_llt_.solve(P.Gf);
                    MatrixXd W = P.Gf.transpose() * schur_U_;
                    W.diagonal().array() += 1e-13 * std::max(1.0, W.diagonal().maxCoeff());
                    w_ldlt_.compute(W);
                    if (w_ldlt_.info() != Eigen::Success) {
                        ridge = ridge == 0.0 ? 1e-12 * base : ridge * 100;
                        continue;
                    }
                }
                last_ridge_ = ridge;
                return true;
            }
            ridge = ridge == 0.0 ? 1e-12 * base : ridge * 100;
        }
        return false;
    }

    // rhs(i) = rp(i) - sum_b <A_i, sigma mu Sinv - X - Sym(X Rd Sinv) [- Sym(dXa dSa Sinv)]>
    //        - g_i' [ (sigma mu e - l.z [- dla.dza]) / z - (l/z) rz ]
    bool solve_newton(double sigma, double mu, const Step* aff, Step& out) {
        const int m = P.m();
        VectorXd rhs = rp_;
        for (int b = 0; b < P.nblocks(); ++b) {
            const int n = P.dims[b];
            MatrixXd D = sigma * mu * Sinv_[b] - it_.X[b];
            MatrixXd T = it_.X[b] * Rd_[b] * Sinv_[b];
            D -= 0.5 * (T + T.transpose());
            if (aff) {
                MatrixXd Tc = aff->dX[b] * aff->dS[b] * Sinv_[b];
                D -= 0.5 * (Tc + Tc.transpose());
            }
            const auto& terms = P.blk_terms[b];
            for (auto& t : terms) {
                double add = t.r == t.c ? t.v * D(t.r, t.r) : 2.0 * t.v * D(t.r, t.c);
                rhs(t.con) -= add;
            }
            (void)n;
        }
        VectorXd dl_const;
        if (P.q()) {
            VectorXd comp = sigma * mu * VectorXd::Ones(P.q()) - it_.l.cwiseProduct(it_.z);
            if (aff) comp -= aff->dl.cwiseProduct(aff->dz);
            dl_const = comp.cwiseQuotient(it_.z) - it_.l.cwiseQuotient(it_.z).cwiseProduct(rz_);
            for (int k = 0; k < P.q(); ++k)
                for (auto& [con, coef] : P.lp_cons[k]) rhs(con) -= coef * dl_const(k);
        }

        out.dy.resize(m);
        auto saddle_solve = [&](const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& df) {
            if (P.p()) {
                VectorXd t1 = schur_llt_.solve(r1);
                df = w_ldlt_.solve(P.Gf.transpose() * t1 - r2);
                dy = t1 - schur_U_ * df;
            } else {
                df.resize(0);
                dy = schur_llt_.solve(r1);
            }
        };
        saddle_solve(rhs, rf_, out.dy, out.df);
        for (int round = 0; round < 2; ++round) {
            VectorXd res1 = rhs - schur_ * out.dy;
            if (last_ridge_ > 0) res1 -= last_ridge_ * out.dy;
            if (P.p()) res1 -= P.Gf * out.df;
            VectorXd res2 = P.p() ? (rf_ - P.Gf.transpose() * out.dy).eval() : VectorXd();
            double rel = res1.lpNorm<Eigen::Infinity>() / (1.0 + rhs.lpNorm<Eigen::Infinity>());
            if (rel < 1e-13 || !res1.allFinite()) break;
            VectorXd cy, cf;
            saddle_solve(res1, res2, cy, cf);
            out.dy += cy;
            if (P.p()) out.df += cf;
        }
        if (!out.dy.allFinite() || (P.p() && !out.df.allFinite())) return false;

        out.dS.assign(P.nblocks(), MatrixXd());
        out.dX.assign(P.nblocks(), MatrixXd());
        for (int b = 0; b < P.nblocks(); ++b) {
            MatrixXd AdY = MatrixXd::Zero(P.dims[b], P.dims[b]);
            for (auto& t : P.blk_terms[b]) {
                AdY(t.r, t.c) += t.v * out.dy(t.con);
                if (t.r != t.c) AdY(t.c, t.r) += t.v * out.dy(t.con);
            }
            out.dS[b] = Rd_[b] - AdY;
            MatrixXd D = sigma * mu * Sinv_[b] - it_.X[b];
            MatrixXd T = it_.X[b] * out.dS[b] * Sinv_[b];
            D -= 0.5 * (T + T.transpose());
            if (aff) {
                MatrixXd Tc = aff->dX[b] * aff->dS[b] * Sinv_[b];
                D -= 0.5 * (Tc + Tc.transpose());
            }
            out.dX[b] = D;
            if (!out.dX[b].allFinite() || !out.dS[b].allFinite()) return false;
        }
        if (P.q()) {
            out.dz = rz_;
            for (int k = 0; k < P.q(); ++k)
                for (auto& [con, coef] : P.lp_cons[k]) out.dz(k) -= coef * out.dy(con);
            out.dl = dl_const - it_.l.cwiseQuotient(it_.z).cwiseProduct(out.dz - rz_);
            // dl = dl_const - (l/z) .* (dz - rz) accounts for dz = rz - G' dy
            if (!out.dl.allFinite() || !out.dz.allFinite()) return false;
        } else {
            out.dl.resize(0);
            out.dz.resize(0);
        }
        return true;
    }

    static double max_step_psd(const MatrixXd& X, const MatrixXd& dX) {
        Eigen::LLT<MatrixXd> llt(X);
        if (llt.info() != Eigen::Success) return 0.0;
        MatrixXd L = llt.matrixL();
        MatrixXd W = L.triangularView<Eigen::Lower>().solve(dX);
        W = L.triangularView<Eigen::Lower>().solve(W.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
        double lmin = es.eigenvalues().minCoeff();
        if (lmin >= -1e-13) return std::numeric_limits<double>::infinity();
        return -1.0 / lmin;
    }

    double max_primal_step(const Step& st) const {
        double a = std::numeric_limits<double>::infinity();
        for (int b = 0; b < P.nblocks(); ++b) a = std::min(a, max_step_psd(it_.X[b], st.dX[b]));
        for (int k = 0; k < P.q(); ++k)
            if (st.dl(k) < 0) a = std::min(a, -it_.l(k) / st.dl(k));
        return a;
    }
    double max_dual_step(const Step& st) const {
        double a = std::numeric_limits<double>::infinity();
        for (int b = 0; b < P.nblocks(); ++b) a = std::min(a, max_step_psd(it_.S[b], st.dS[b]));
        for (int k = 0; k < P.q(); ++k)
            if (st.dz(k) < 0) a = std::min(a, -it_.z(k) / st.dz(k));
        return a;
    }

    void apply_step(const Step& st, double ap, double ad) {
        for (int b = 0; b < P.nblocks(); ++b) {
            it_.X[b] += ap * st.dX[b];
            it_.X[b] = 0.5 * (it_.X[b] + it_.X[b].transpose()).eval();
            it_.S[b] += ad * st.dS[b];
            it_.S[b] = 0.5 * (it_.S[b] + it_.S[b].transpose()).eval();
        }
        if (P.q()) {
            it_.l += ap * st.dl;
            it_.z += ad * st.dz;
        }
        if (P.p()) it_.f += ap * st.df;
        it_.y += ad * st.dy;
    }
};

// ---------------------------------------------------------------------------
// conversion from the public problem form

struct Scaling {
    std::vector<Eigen::VectorXd> blk;  // per block, per-row basis scale d
    Eigen::VectorXd lp, fr;            // column scales
    bool active = false;
};

struct Conversion {
    Instance inst;
    Scaling scaling;
    // scalar index -> (kind, internal index); kind 0 = LP (with shift), 1 = free
    std::vector<std::pair<int, int>> scalar_map;
    std::vector<double> lp_shift;
    // free-variable elimination: f_orig = f0 + K * f_red
    MatrixXd K;
    VectorXd f0;
    bool eliminated = false;
    bool trivially_infeasible = false;
    std::string message;
};

// Symmetric diagonal scaling of every PSD block (X -> D X D keeps the cone)
// plus column scaling of scalar variables and row re-equilibration; a few
// rounds tame data whose natural scales span many orders of magnitude.
void equilibrate(Instance& I, Scaling& sc) {
    const int m = I.m();
    sc.blk.clear();
    for (int b = 0; b < I.nblocks(); ++b) sc.blk.push_back(VectorXd::Ones(I.dims[b]));
    sc.lp = VectorXd::Ones(I.q());
    sc.fr = VectorXd::Ones(I.p());
    sc.active = true;

    auto clip = [](double v) { return std::min(1e6, std::max(1e-6, v)); };
    for (int round = 0; round < 3; ++round) {
        // column pass
        for (int b = 0; b < I.nblocks(); ++b) {
            VectorXd mx = VectorXd::Zero(I.dims[b]);
            for (auto& t : I.blk_terms[b]) {
                double a = std::abs(t.v);
                mx(t.r) = std::max(mx(t.r), a);
                mx(t.c) = std::max(mx(t.c), a);
            }
            VectorXd d(I.dims[b]);
            for (int r = 0; r < I.dims[b]; ++r) d(r) = mx(r) > 0 ? clip(1.0 / std::sqrt(mx(r))) : 1.0;
            for (auto& t : I.blk_terms[b]) t.v *= d(t.r) * d(t.c);
            MatrixXd D = d.asDiagonal();
            I.C[b] = D * I.C[b] * D;
            sc.blk[b] = sc.blk[b].cwiseProduct(d);
        }
        for (int k = 0; k < I.q(); ++k) {
            double mx = 0.0;
            for (auto& [con, coef] : I.lp_cons[k]) mx = std::max(mx, std::abs(coef));
            double e = mx > 0 ? clip(1.0 / mx) : 1.0;
            for (auto& [con, coef] : I.lp_cons[k]) coef *= e;
            I.c_lp(k) *= e;
            sc.lp(k) *= e;
        }
        for (int f = 0; f < I.p(); ++f) {
            double mx = I.Gf.col(f).cwiseAbs().maxCoeff();
            double e = mx > 0 ? clip(1.0 / mx) : 1.0;
            I.Gf.col(f) *= e;
            I.c_f(f) *= e;
            sc.fr(f) *= e;
        }
        // row pass
        VectorXd rmax = VectorXd::Zero(m);
        for (int b = 0; b < I.nblocks(); ++b)
            for (auto& t : I.blk_terms[b]) rmax(t.con) = std::max(rmax(t.con), std::abs(t.v));
        for (int k = 0; k < I.q(); ++k)
            for (auto& [con, coef] : I.lp_cons[k]) rmax(con) = std::max(rmax(con), std::abs(coef));
        for (int i = 0; i < m; ++i)
            rmax(i) = std::max(rmax(i), I.p() ? I.Gf.row(i).cwiseAbs().maxCoeff() : 0.0);
        VectorXd rs(m);
        for (int i = 0; i < m; ++i) rs(i) = rmax(i) > 0 ? 1.0 / rmax(i) : 1.0;
        for (int b = 0; b < I.nblocks(); ++b)
            for (auto& t : I.blk_terms[b]) t.v *= rs(t.con);
        for (int k = 0; k < I.q(); ++k)
            for (auto& [con, coef] : I.lp_cons[k]) coef *= rs(con);
        if (I.p())
            for (int i = 0; i < m; ++i) I.Gf.row(i) *= rs(i);
        I.b = I.b.cwiseProduct(rs);
    }
    // keep the objective O(1) as well
    double omax = 0.0;
    for (auto& Cb : I.C) if (Cb.size()) omax = std::max(omax, Cb.cwiseAbs().maxCoeff());
    if (I.q()) omax = std::max(omax, I.c_lp.cwiseAbs().maxCoeff());
    if (I.p()) omax = std::max(omax, I.c_f.cwiseAbs().maxCoeff());
    if (omax > 1.0) {
        for (auto& Cb : I.C) Cb /= omax;
        I.c_lp /= omax;
        I.c_f /= omax;
        I.obj_scale *= omax;
    }
}

Conversion convert(const SdpProblem& prob) {
    Conversion cv;
    Instance& I = cv.inst;
    const int m = static_cast<int>(prob.equalities.size());
    for (auto& b : prob.blocks) I.dims.push_back(b.dim);
    I.blk_terms.resize(I.dims.size());

    int nlp = 0, nfree = 0;
    cv.scalar_map.resize(prob.scalars.size());
    for (std::size_t s = 0; s < prob.scalars.size(); ++s) {
        if (prob.scalars[s].lower) {
            cv.scalar_map[s] = {0, nlp++};
            cv.lp_shift.push_back(*prob.scalars[s].lower);
        } else {
            cv.scalar_map[s] = {1, nfree++};
        }
    }
    I.lp_cons.resize(nlp);
    I.b.resize(m);
    I.Gf = MatrixXd::Zero(m, nfree);
    I.c_lp = VectorXd::Zero(nlp);
    I.c_f = VectorXd::Zero(nfree);
    I.C.resize(I.dims.size());
    for (std::size_t b = 0; b < I.dims.size(); ++b) I.C[b] = MatrixXd::Zero(I.dims[b], I.dims[b]);

    // objective (with lower-bound shift folded into the offset)
    double obj_max = 0.0;
    for (auto& t : prob.obj_blocks) obj_max = std::max(obj_max, std::abs(t.coef));
    for (auto& t : prob.obj_scalars) obj_max = std::max(obj_max, std::abs(t.coef));
    I.obj_scale = std::max(1.0, obj_max);
    for (auto& t : prob.obj_blocks) {
        I.C[t.block](t.row, t.col) += t.coef / I.obj_scale;
        if (t.row != t.col) I.C[t.block](t.col, t.row) += t.coef / I.obj_scale;
    }
    for (auto& t : prob.obj_scalars) {
        auto [kind, idx] = cv.scalar_map[t.var];
        if (kind == 0) {
            I.c_lp(idx) += t.coef / I.obj_scale;
            I.obj_offset += t.coef * cv.lp_shift[idx] / I.obj_scale;
        } else {
            I.c_f(idx) += t.coef / I.obj_scale;
        }
    }

    // equalities with row equilibration
    I.row_scale = VectorXd::Ones(m);
    for (int i = 0; i < m; ++i) {
        const auto& eq = prob.equalities[i];
        double mx = 0.0;
        for (auto& t : eq.blocks) mx = std::max(mx, std::abs(t.coef));
        for (auto& t : eq.scalars) mx = std::max(mx, std::abs(t.coef));
        double sc = mx > 0 ? mx : 1.0;
        I.row_scale(i) = sc;
        double rhs = eq.rhs;
        for (auto& t : eq.blocks)
            I.blk_terms[t.block].push_back({i, std::min(t.row, t.col), std::max(t.row, t.col), t.coef / sc});
        for (auto& t : eq.scalars) {
            auto [kind, idx] = cv.scalar_map[t.var];
            if (kind == 0) {
                I.lp_cons[idx].push_back({i, t.coef / sc});
                rhs -= t.coef * cv.lp_shift[idx];
            } else {
                I.Gf(i, idx) += t.coef / sc;
            }
        }
        I.b(i) = rhs / sc;
    }
    for (auto& terms : I.blk_terms)
        std::stable_sort(terms.begin(), terms.end(),
                         [](const BTerm& a, const BTerm& b) { return a.con < b.con; });

    // presolve: eliminate equalities that touch only free scalars
    std::vector<int> pure;
    {
        std::vector<char> has_cone(m, 0);
        for (auto& terms : I.blk_terms)
            for (auto& t : terms) has_cone[t.con] = 1;
        for (auto& cons : I.lp_cons)
            for (auto& [con, coef] : cons) has_cone[con] = 1;
        for (int i = 0; i < m; ++i)
            if (!has_cone[i]) pure.push_back(i);
    }
    if (!pure.empty() && nfree > 0) {
        const int r = static_cast<int>(pure.size());
        MatrixXd F(r, nfree);
        VectorXd g(r);
        for (int k = 0; k < r; ++k) {
            F.row(k) = I.Gf.row(pure[k]);
            g(k) = I.b(pure[k]);
        }
        if (std::getenv("POLYCTL_DEBUG_PRESOLVE"))
            for (int k = 0; k < r; ++k) {
                std::ostringstream os;
                os << "[presolve] row " << pure[k] << " rhs " << g(k) << " coefs:";
                for (int v = 0; v < nfree; ++v)
                    if (F(k, v) != 0.0) os << " f" << v << "=" << F(k, v);
                std::fprintf(stderr, "%s\n", os.str().c_str());
            }
        Eigen::JacobiSVD<MatrixXd> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
        double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        double tol = std::max(r, nfree) * 1e-13 * std::max(smax, 1.0);
        int rank = 0;
        for (int k = 0; k < svd.singularValues().size(); ++k)
            if (svd.singularValues()(k) > tol) ++rank;
        VectorXd sol = VectorXd::Zero(nfree);
        {
            VectorXd ug = svd.matrixU().transpose() * g;
            for (int k = 0; k < rank; ++k) sol += svd.matrixV().col(k) * (ug(k) / svd.singularValues()(k));
        }
        double cons_res = (F * sol - g).lpNorm<Eigen::Infinity>();
        if (cons_res > 1e-7 * std::max(1.0, g.lpNorm<Eigen::Infinity>())) {
            cv.trivially_infeasible = true;
            std::ostringstream os;
            os << "linear coefficient constraints are inconsistent (residual " << cons_res
               << ", rows " << r << ", rank " << rank << ")";
            cv.message = os.str();
            return cv;
        }
        cv.eliminated = true;
        cv.f0 = sol;
        cv.K = svd.matrixV().rightCols(nfree - rank);  // orthonormal kernel basis
        int p_red = nfree - rank;

        // rewrite remaining rows and the objective in reduced coordinates
        std::vector<char> drop(m, 0);
        for (int i : pure) drop[i] = 1;
        std::vector<int> new_index(m, -1);
        int mm = 0;
        for (int i = 0; i < m; ++i)
            if (!drop[i]) new_index[i] = mm++;
        MatrixXd Gf2 = MatrixXd::Zero(mm, p_red);
        VectorXd b2(mm), rs2(mm);
        for (int i = 0; i < m; ++i) {
            if (drop[i]) continue;
            int ni = new_index[i];
            b2(ni) = I.b(i) - I.Gf.row(i).dot(cv.f0);
            Gf2.row(ni) = I.Gf.row(i) * cv.K;
            rs2(ni) = I.row_scale(i);
        }
        for (auto& terms : I.blk_terms)
            for (auto& t : terms) t.con = new_index[t.con];
        for (auto& cons : I.lp_cons)
            for (auto& [con, coef] : cons) con = new_index[con];
        I.obj_offset += I.c_f.dot(cv.f0);
        I.c_f = (cv.K.transpose() * I.c_f).eval();
        I.Gf = std::move(Gf2);
        I.b = std::move(b2);
        I.row_scale = std::move(rs2);
    }
    equilibrate(cv.inst, cv.scaling);
    return cv;
}

// final polish: alternate a least-squares projection onto the equality
// manifold with a PSD floor on every block; a couple of rounds turn a
// near-feasible interior-point iterate into one that passes the strict
// residual recheck without touching genuinely infeasible problems
void polish(const SdpProblem& prob, std::map<std::string, Eigen::MatrixXd>& blocks,
            std::map<std::string, double>& scalars) {
    const int m = static_cast<int>(prob.equalities.size());
    if (m == 0 || m > 4000) return;
    // variable layout: block upper triangles then scalars
    std::vector<int> boff(prob.blocks.size());
    int n = 0;
    for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
        boff[b] = n;
        n += prob.blocks[b].dim * (prob.blocks[b].dim + 1) / 2;
    }
    int soff = n;
    n += static_cast<int>(prob.scalars.size());
    auto tri = [&](int b, int r, int c) {
        int d = prob.blocks[b].dim;
        int rr = std::min(r, c), cc = std::max(r, c);
        return boff[b] + rr * d - rr * (rr - 1) / 2 + (cc - rr);
    };
    Eigen::SparseMatrix<double> A(m, n);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
        for (auto& t : prob.equalities[i].blocks)
            trips.emplace_back(i, tri(t.block, t.row, t.col),
                               t.row == t.col ? t.coef : 2.0 * t.coef);
        for (auto& t : prob.equalities[i].scalars) trips.emplace_back(i, soff + t.var, t.coef);
    }
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::MatrixXd AAt = Eigen::MatrixXd(A * A.transpose());
    AAt.diagonal().array() += 1e-12 * std::max(1.0, AAt.diagonal().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> ldlt(AAt);
    if (ldlt.info() != Eigen::Success) return;

    auto gather = [&](Eigen::VectorXd& v) {
        v.resize(n);
        for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
            const auto& X = blocks.at(prob.blocks[b].name);
            int d = prob.blocks[b].dim;
            for (int r = 0; r < d; ++r)
                for (int c = r; c < d; ++c) v(tri(static_cast<int>(b), r, c)) = X(r, c);
        }
        for (std::size_t sv = 0; sv < prob.scalars.size(); ++sv)
            v(soff + static_cast<int>(sv)) = scalars.at(prob.scalars[sv].name);
    };
    auto scatter = [&](const Eigen::VectorXd& v) {
        for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
            auto& X = blocks.at(prob.blocks[b].name);
            int d = prob.blocks[b].dim;
            for (int r = 0; r < d; ++r)
                for (int c = r; c < d; ++c) X(r, c) = X(c, r) = v(tri(static_cast<int>(b), r, c));
        }
        for (std::size_t sv = 0; sv < prob.scalars.size(); ++sv)
            scalars.at(prob.scalars[sv].name) = v(soff + static_cast<int>(sv));
    };
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) b(i) = prob.equalities[i].rhs;

    Eigen::VectorXd v;
    gather(v);
    for (int round = 0; round < 4; ++round) {
        Eigen::VectorXd r = b - A * v;
        if (r.lpNorm<Eigen::Infinity>() < 1e-13) break;
        v += A.transpose() * ldlt.solve(r);
        scatter(v);
        // PSD floor and bound floor come last so the cones hold exactly
        for (auto& blk : prob.blocks) {
            auto& X = blocks.at(blk.name);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
            if (es.eigenvalues().minCoeff() >= 0.0) continue;
            Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
            X = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
        }
        for (std::size_t sv = 0; sv < prob.scalars.size(); ++sv)
            if (prob.scalars[sv].lower)
                scalars.at(prob.scalars[sv].name) =
                    std::max(scalars.at(prob.scalars[sv].name), *prob.scalars[sv].lower);
        gather(v);
    }
}

SdpSolution finalize(const SdpProblem& prob, const Conversion& cv, const RawResult& raw,
                     const SolverConfig& cfg) {
    SdpSolution sol;
    sol.status = raw.status;
    sol.iterations = raw.iterations;
    sol.message = raw.message;
    if (raw.status != SdpSolution::Status::optimal && raw.status != SdpSolution::Status::feasible)
        return sol;

    for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
        MatrixXd X = raw.it.X[b];
        if (cv.scaling.active) {
            MatrixXd D = cv.scaling.blk[b].asDiagonal();
            X = D * X * D;
        }
        sol.block_values[prob.blocks[b].name] = X;
    }
    VectorXd l_orig = raw.it.l;
    if (cv.scaling.active && l_orig.size()) l_orig = l_orig.cwiseProduct(cv.scaling.lp);
    VectorXd f_scaled = raw.it.f;
    if (cv.scaling.active && f_scaled.size()) f_scaled = f_scaled.cwiseProduct(cv.scaling.fr);
    VectorXd f_orig;
    if (cv.eliminated)
        f_orig = cv.f0 + (cv.K.cols() ? (cv.K * f_scaled).eval() : VectorXd::Zero(cv.f0.size()));
    else
        f_orig = f_scaled;
    for (std::size_t s = 0; s < prob.scalars.size(); ++s) {
        auto [kind, idx] = cv.scalar_map[s];
        double v = kind == 0 ? cv.lp_shift[idx] + l_orig(idx) : f_orig(idx);
        sol.scalar_values[prob.scalars[s].name] = v;
    }

    {
        // keep the polished point only when it improves the recheck metrics
        auto metrics = [&](const std::map<std::string, Eigen::MatrixXd>& bv,
                           const std::map<std::string, double>& sv) {
            double res = 0.0;
            for (auto& eq : prob.equalities) {
                double v = -eq.rhs;
                for (auto& t : eq.blocks) {
                    const auto& X = bv.at(prob.blocks[t.block].name);
                    v += t.row == t.col ? t.coef * X(t.row, t.row) : 2.0 * t.coef * X(t.row, t.col);
                }
                for (auto& t : eq.scalars) v += t.coef * sv.at(prob.scalars[t.var].name);
                res = std::max(res, std::abs(v));
            }
            double eig = 0.0;
            for (auto& [name, X] : bv) {
                double nrm = std::max(1e-300, X.cwiseAbs().maxCoeff());
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X / nrm, Eigen::EigenvaluesOnly);
                eig = std::min(eig, es.eigenvalues().minCoeff());
            }
            return std::max(res / cfg.eq_tol, -eig / cfg.psd_tol);
        };
        double before = metrics(sol.block_values, sol.scalar_values);
        if (before > 0.8) {  // skip when the recheck already passes cleanly
            auto bv = sol.block_values;
            auto sv = sol.scalar_values;
            polish(prob, bv, sv);
            if (metrics(bv, sv) < before) {
                sol.block_values = std::move(bv);
                sol.scalar_values = std::move(sv);
            }
        }
    }

    // independent recheck against the original, unscaled data
    double obj = 0.0;
    for (auto& t : prob.obj_blocks) {
        const auto& X = sol.block_values.at(prob.blocks[t.block].name);
        obj += t.row == t.col ? t.coef * X(t.row, t.row) : 2.0 * t.coef * X(t.row, t.col);
    }
    for (auto& t : prob.obj_scalars) obj += t.coef * sol.scalar_values.at(prob.scalars[t.var].name);
    sol.objective_value = obj;

    double max_res = 0.0;
    int worst_eq = -1;
    for (std::size_t ei = 0; ei < prob.equalities.size(); ++ei) {
        const auto& eq = prob.equalities[ei];
        double v = -eq.rhs;
        for (auto& t : eq.blocks) {
            const auto& X = sol.block_values.at(prob.blocks[t.block].name);
            v += t.row == t.col ? t.coef * X(t.row, t.row) : 2.0 * t.coef * X(t.row, t.col);
        }
        for (auto& t : eq.scalars) v += t.coef * sol.scalar_values.at(prob.scalars[t.var].name);
        if (std::abs(v) > max_res) {
            max_res = std::abs(v);
            worst_eq = static_cast<int>(ei);
        }
    }
    sol.max_eq_residual = max_res;
    if (std::getenv("POLYCTL_DEBUG_WORST") && worst_eq >= 0) {
        const auto& eq = prob.equalities[worst_eq];
        std::ostringstream os;
        os << "[worst] eq " << worst_eq << " res " << max_res << " rhs " << eq.rhs << " |";
        for (auto& t : eq.blocks)
            os << " " << prob.blocks[t.block].name << "(" << t.row << "," << t.col << ")*" << t.coef;
        for (auto& t : eq.scalars) os << " " << prob.scalars[t.var].name << "*" << t.coef;
        std::fprintf(stderr, "%s\n", os.str().c_str());
    }

    double min_eig = std::numeric_limits<double>::infinity();
    for (auto& [name, X] : sol.block_values) {
        double nrm = std::max(1e-300, X.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(X / nrm, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    if (!prob.blocks.empty()) sol.min_block_eig = min_eig;

    if (sol.max_eq_residual > cfg.eq_tol || (!prob.blocks.empty() && sol.min_block_eig < -cfg.psd_tol)) {
        sol.status = SdpSolution::Status::numerical_failure;
        std::ostringstream os;
        os << "residual recheck failed: eq " << sol.max_eq_residual << ", min eig " << sol.min_block_eig;
        sol.message += os.str();
    }
    return sol;
}

// Degenerate problems without any cone variable reduce to a linear system.
SdpSolution solve_linear_only(const SdpProblem& prob, const Conversion& cv, const SolverConfig& cfg) {
    RawResult raw;
    raw.it.f = VectorXd::Zero(cv.inst.p());
    raw.it.y = VectorXd::Zero(cv.inst.m());
    if (cv.inst.m() > 0) {
        // remaining rows have no variables at all (presolve runs only when
        // free scalars exist); they are consistent iff every rhs vanishes
        if (cv.inst.p() == 0) {
            if (cv.inst.b.lpNorm<Eigen::Infinity>() > 1e-9) {
                SdpSolution s;
                s.status = SdpSolution::Status::infeasible;
                s.message = "inconsistent constant constraints";
                return s;
            }
        } else {
            Eigen::JacobiSVD<MatrixXd> svd(cv.inst.Gf, Eigen::ComputeThinU | Eigen::ComputeThinV);
            raw.it.f = svd.solve(cv.inst.b);
            if ((cv.inst.Gf * raw.it.f - cv.inst.b).lpNorm<Eigen::Infinity>() >
                1e-8 * std::max(1.0, cv.inst.b.lpNorm<Eigen::Infinity>())) {
                SdpSolution s;
                s.status = SdpSolution::Status::infeasible;
                s.message = "inconsistent linear constraints";
                return s;
            }
        }
    }
    // minimize over the remaining null space: bounded only if the reduced cost
    // is zero there; the presolve kernel coordinates carry cost c_f
    if (cv.inst.p() && cv.inst.c_f.lpNorm<Eigen::Infinity>() > 1e-12) {
        // project out: choose the minimum-norm point; objective unbounded
        // directions are not expected from the compiler, flag instead
        SdpSolution s;
        s.status = SdpSolution::Status::numerical_failure;
        s.message = "free objective direction in purely linear problem";
        return s;
    }
    raw.status = SdpSolution::Status::optimal;
    return finalize(prob, cv, raw, cfg);
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SolverConfig& cfg) {
    problem.validate();
    Conversion cv = convert(problem);
    if (cv.trivially_infeasible) {
        SdpSolution s;
        s.status = SdpSolution::Status::infeasible;
        s.message = cv.message;
        return s;
    }
    if (cv.inst.nblocks() == 0 && cv.inst.q() == 0) return solve_linear_only(problem, cv, cfg);
    if (cv.inst.m() == 0) {
        SdpSolution s;
        s.status = SdpSolution::Status::numerical_failure;
        s.message = "problem has no equality constraints after presolve";
        return s;
    }
    Ipm ipm(cv.inst, cfg);
    RawResult raw = ipm.run();
    return finalize(problem, cv, raw, cfg);
}

SdpSolution solve_maxdet(const SdpProblem& problem, const SolverConfig& cfg) {
    problem.validate();
    if (!problem.maxdet_block) throw std::invalid_argument("solve_maxdet requires a maxdet block");
    const int db = *problem.maxdet_block;
    const int dim = problem.blocks[db].dim;
    const std::string det_name = problem.blocks[db].name;

    auto log_det = [&](const Eigen::MatrixXd& X) {
        Eigen::LLT<MatrixXd> llt(X);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (int i = 0; i < X.rows(); ++i) s += std::log(llt.matrixL()(i, i));
        return 2.0 * s;
    };

    // phase 0: feasibility, maximizing trace of the det block; when the trace
    // push stalls numerically, retry as a plain feasibility solve — any
    // strictly feasible point serves as a linearization seed
    SdpProblem work = problem;
    work.maxdet_block.reset();
    work.obj_blocks.clear();
    work.obj_scalars.clear();
    for (int i = 0; i < dim; ++i) work.obj_blocks.push_back({db, i, i, -1.0});
    SdpSolution cur = solve(work, cfg);
    if (cur.status == SdpSolution::Status::infeasible) return cur;
    if (!cur.ok()) {
        work.obj_blocks.clear();
        cur = solve(work, cfg);
        if (cur.status == SdpSolution::Status::infeasible) return cur;
    }
    if (!cur.ok()) {
        cur.status = SdpSolution::Status::numerical_failure;
        cur.message += " (maxdet initialization failed)";
        return cur;
    }

    double ld = log_det(cur.block_values.at(det_name));
    int total_iters = cur.iterations;
    for (int k = 0; k < cfg.maxdet_max_iters; ++k) {
        const MatrixXd Xk = cur.block_values.at(det_name);
        Eigen::LLT<MatrixXd> llt(Xk);
        if (llt.info() != Eigen::Success) {
            cur.status = SdpSolution::Status::numerical_failure;
            cur.message += " (maxdet iterate lost positive definiteness)";
            return cur;
        }
        MatrixXd Xinv = llt.solve(MatrixXd::Identity(dim, dim));
        work.obj_blocks.clear();
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) work.obj_blocks.push_back({db, i, j, -Xinv(i, j)});
        SdpSolution cand = solve(work, cfg);
        if (!cand.ok()) {
            // keep the current feasible iterate; linearized subproblem failed
            break;
        }
        total_iters += cand.iterations;

        // backtracking on the segment between iterates keeps log det monotone
        double best_t = 0.0, best_ld = ld;
        for (double t = 1.0; t > 1.0 / 512; t *= 0.5) {
            MatrixXd Xt = (1.0 - t) * Xk + t * cand.block_values.at(det_name);
            double lt = log_det(Xt);
            if (lt > best_ld + 1e-15) {
                best_t = t;
                best_ld = lt;
                break;
            }
        }
        if (best_t == 0.0) break;  // stationary: no ascent along the segment
        if (best_ld < ld - 1e-12) {
            cur.status = SdpSolution::Status::numerical_failure;
            cur.message += " (log det decreased across a maxdet iteration)";
            return cur;
        }
        if (best_t == 1.0) {
            cur = cand;
        } else {
            for (auto& [name, X] : cur.block_values)
                X = (1.0 - best_t) * X + best_t * cand.block_values.at(name);
            for (auto& [name, v] : cur.scalar_values)
                v = (1.0 - best_t) * v + best_t * cand.scalar_values.at(name);
        }
        double prev = ld;
        ld = best_ld;
        if (std::abs(ld - prev) <= cfg.maxdet_tol) break;
    }

    cur.status = SdpSolution::Status::feasible;
    cur.log_det = ld;
    cur.objective_value = -ld;
    cur.iterations = total_iters;

    // independent residual recheck of the (possibly interpolated) point
    double max_res = 0.0;
    for (auto& eq : problem.equalities) {
        double v = -eq.rhs;
        for (auto& t : eq.blocks) {
            const auto& X = cur.block_values.at(problem.blocks[t.block].name);
            v += t.row == t.col ? t.coef * X(t.row, t.row) : 2.0 * t.coef * X(t.row, t.col);
        }
        for (auto& t : eq.scalars) v += t.coef * cur.scalar_values.at(problem.scalars[t.var].name);
        max_res = std::max(max_res, std::abs(v));
    }
    cur.max_eq_residual = max_res;
    if (max_res > cfg.eq_tol) {
        cur.status = SdpSolution::Status::numerical_failure;
        cur.message += " (maxdet residual recheck failed)";
    }
    return cur;
}

}  // namespace polyctl
