#include "polyctl/synth.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <cstdio>
#include <cstdlib>

#include "polyctl/verify.hpp"

namespace polyctl {

double ClassKInfty::eval(double r) const {
    double s = 0.0, r2 = r * r, p = 1.0;
    for (double c : coeffs) {
        p *= r2;
        s += c * p;
    }
    return s;
}

bool ClassKInfty::valid(double mu, double tol) const {
    if (coeffs.empty()) return false;
    double sum = 0.0;
    for (double c : coeffs) {
        if (c < -tol) return false;
        sum += c;
    }
    return sum >= mu - tol;
}

Polynomial ClassKInfty::as_polynomial(int nvars, int first, int count) const {
    Polynomial p(nvars);
    for (std::size_t k = 0; k < coeffs.size(); ++k)
        if (coeffs[k] != 0.0)
            p += norm_square_power(nvars, first, count, static_cast<int>(k) + 1) * coeffs[k];
    return p;
}

Eigen::MatrixXd MatrixComparison::eval(double r) const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim(), dim());
    double r2 = r * r, p = 1.0;
    for (auto& Ck : C) {
        s += p * Ck;
        p *= r2;
    }
    return s;
}

ClassKInfty MatrixComparison::to_alpha4() const {
    ClassKInfty a;
    for (auto& Ck : C) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ck, Eigen::EigenvaluesOnly);
        a.coeffs.push_back(std::max(0.0, es.eigenvalues().maxCoeff()));
    }
    return a;
}

const char* to_string(CertificateKind k) {
    switch (k) {
        case CertificateKind::gas: return "gas";
        case CertificateKind::iss_actuator_biconvex: return "iss_actuator_biconvex";
        case CertificateKind::iss_process_biconvex: return "iss_process_biconvex";
        case CertificateKind::iss_actuator_convex: return "iss_actuator_convex";
        case CertificateKind::iss_process_convex: return "iss_process_convex";
        case CertificateKind::model_based: return "model_based";
    }
    return "?";
}

bool Certificate::all_reports_pass() const {
    for (auto& r : sos_reports)
        if (!r.pass) return false;
    return !sos_reports.empty();
}

void Certificate::validate(double mu) const {
    if (V.coeff(Monomial::unit(V.nvars())) != 0.0) throw std::runtime_error("certificate: V(0) != 0");
    for (auto& ki : k)
        if (ki.coeff(Monomial::unit(ki.nvars())) != 0.0)
            throw std::runtime_error("certificate: k(0) != 0");
    if (!alpha1.valid(mu) || !alpha2.valid(mu) || !alpha3.valid(mu))
        throw std::runtime_error("certificate: comparison function coefficients invalid");
    // the biconvex programs constrain the alpha4 sum by mu; the convex path
    // only guarantees positivity through the Gamma coefficient condition
    if (kind != CertificateKind::gas && !alpha4.valid(is_convex_path() ? 1e-9 : mu))
        throw std::runtime_error("certificate: alpha4 invalid");
    if (!all_reports_pass()) throw std::runtime_error("certificate: an SOS report failed");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

enum class Channel { none, actuator, process };

int exo_dim(Channel ch, const FunctionLibrary& lib) {
    switch (ch) {
        case Channel::none: return 0;
        case Channel::actuator: return lib.ninput;
        case Channel::process: return lib.nstate;
    }
    return 0;
}

std::vector<int> identity_map(int n) {
    std::vector<int> m(n);
    for (int i = 0; i < n; ++i) m[i] = i;
    return m;
}

void enumerate_upto(int nvars, int maxdeg, std::vector<Monomial>& out) {
    std::vector<int> e(nvars, 0);
    std::function<void(int, int)> rec = [&](int pos, int rem) {
        if (pos == nvars) {
            out.emplace_back(e);
            return;
        }
        for (int k = 0; k <= rem; ++k) {
            e[pos] = k;
            rec(pos + 1, rem - k);
        }
        e[pos] = 0;
    };
    rec(0, maxdeg);
    std::sort(out.begin(), out.end());
}

// parity: -1 no filter, 0 even total degree, 1 odd
std::vector<Monomial> monomials_in_range(int nvars, int dmin, int dmax, int parity) {
    std::vector<Monomial> all;
    enumerate_upto(nvars, dmax, all);
    std::erase_if(all, [&](const Monomial& m) {
        int d = m.degree();
        if (d < dmin || d > dmax) return true;
        if (parity >= 0 && d % 2 != parity) return true;
        return false;
    });
    return all;
}

// parity of a polynomial's support: 0 even, 1 odd, -1 mixed, -2 zero
int poly_parity(const Polynomial& p) {
    int par = -2;
    for (auto& [m, c] : p.terms()) {
        int d = m.degree() % 2;
        if (par == -2) par = d;
        else if (par != d) return -1;
    }
    return par;
}

struct ParityPlan {
    bool on = false;
    int pH = 0;  // parity of H entries (convex path)
};

ParityPlan parity_plan(const FunctionLibrary& lib, const SynthConfig& cfg, bool convex,
                       const PolyMatrix* Xi) {
    ParityPlan plan;
    if (!cfg.use_parity) return plan;
    for (auto& z : lib.Z) {
        int p = poly_parity(z);
        if (p != 1 && p != -2) return plan;
    }
    for (auto& w : lib.W.entries) {
        int p = poly_parity(w);
        if (p != 0 && p != -2) return plan;
    }
    if (convex) {
        if (!lib.has_zhat()) return plan;
        int pZh = -2;
        for (auto& z : lib.Zhat) {
            int p = poly_parity(z);
            if (p == -1) return plan;
            if (p == -2) continue;
            if (pZh == -2) pZh = p;
            else if (pZh != p) return plan;
        }
        int pH = -2;
        for (auto& h : lib.H->entries) {
            int p = poly_parity(h);
            if (p == -1) return plan;
            if (p == -2) continue;
            if (pH == -2) pH = p;
            else if (pH != p) return plan;
        }
        if (pH == -2 || pZh == -2) return plan;
        if (Xi)
            for (auto& e : Xi->entries) {
                int p = poly_parity(e);
                if (p != 0 && p != -2) return plan;
            }
        plan.pH = pH;
    }
    plan.on = true;
    return plan;
}

DecisionPoly dp_mul(const DecisionPoly& a, const DecisionPoly& b) {
    if (b.is_numeric()) return a * b.to_polynomial();
    if (a.is_numeric()) return b * a.to_polynomial();
    throw std::logic_error("product of two decision polynomials is not affine");
}

DecisionMatrix dmat_zero(int r, int c, int nvars) {
    return DecisionMatrix(r, std::vector<DecisionPoly>(c, DecisionPoly(nvars)));
}

// ---------------------------------------------------------------------------
// shared pieces of the biconvex/GAS programs (Theorems 1-3)

struct RoundMode {
    bool solve_certificate = false;  // V, lambda, alpha1..4 decision
    bool solve_controller = false;   // k, alpha3, alpha4 decision
};

struct RoundBuild {
    SosProgram prog;
    DecisionPoly V_state;                 // over state vars (decision or numeric)
    DecisionPoly lam;                     // over nv
    std::vector<DecisionPoly> k_state;    // over state vars
    std::array<std::vector<LinExpr>, 4> alpha_c;
    int n = 0, ne = 0, q = 0;
};

Polynomial support_ones(int nvars, const std::vector<Monomial>& mons) {
    Polynomial p(nvars);
    for (auto& m : mons) p.add_term(m, 1.0);
    return p;
}

Polynomial abs_coeffs(const Polynomial& p) {
    Polynomial r(p.nvars());
    for (auto& [m, c] : p.terms()) r.add_term(m, std::abs(c));
    return r;
}

// Declared-shape support of the Theorem 1-3 dissipation block. Every data
// coefficient is replaced by its magnitude and every decision polynomial by
// the all-ones polynomial on its declared monomials, so the result's supports
// contain those of any round's instance. Alternation rounds compile against
// this shape: a frozen polynomial whose solved support collapsed must not
// shrink the Gram bases of later rounds.
PolyMatrix dissipation_support_hint(Channel ch, const EllipsoidModel& model,
                                    const FunctionLibrary& lib, const SynthConfig& cfg,
                                    int par_on) {
    const int n = lib.nstate;
    const int m = lib.ninput;
    const int ne = exo_dim(ch, lib);
    const int nv = n + ne;
    const int q = lib.N() + lib.M();
    std::vector<int> lift = identity_map(n);
    std::span<const int> lift_span(lift);

    Polynomial V_sup = support_ones(n, monomials_in_range(n, cfg.deg_V_min, cfg.deg_V_max,
                                                          par_on ? 0 : -1))
                           .lifted(nv, lift_span);
    Polynomial lam_sup = support_ones(
        nv, monomials_in_range(nv, cfg.deg_lambda_min, cfg.deg_lambda_max, par_on ? 0 : -1));
    Polynomial k_sup = support_ones(n, monomials_in_range(n, cfg.deg_k_min, cfg.deg_k_max,
                                                          par_on ? 1 : -1))
                           .lifted(nv, lift_span);

    std::vector<Polynomial> dV;
    for (int v = 0; v < n; ++v) dV.push_back(abs_coeffs(V_sup.derivative(v)));
    std::vector<Polynomial> libsup;
    for (auto& z : lib.Z) libsup.push_back(abs_coeffs(z.lifted(nv, lift_span)));
    for (int a = 0; a < lib.M(); ++a) {
        Polynomial row(nv);
        for (int j = 0; j < m; ++j) {
            Polynomial arg = k_sup;
            if (ch == Channel::actuator) {
                Monomial mm = Monomial::unit(nv);
                mm.exponents[n + j] = 1;
                arg.add_term(mm, 1.0);
            }
            row += abs_coeffs(lib.W.at(a, j).lifted(nv, lift_span)) * arg;
        }
        libsup.push_back(row);
    }
    std::vector<Polynomial> zl(n, Polynomial(nv));
    for (int v = 0; v < n; ++v)
        for (int a = 0; a < q; ++a) zl[v] += libsup[a] * std::abs(model.zeta_bar(a, v));

    auto alpha_sup = [&](int terms, int first, int count) {
        Polynomial s(nv);
        for (int k = 1; k <= terms; ++k) s += norm_square_power(nv, first, count, k);
        return s;
    };

    const int dim = 1 + n + q;
    PolyMatrix H(dim, dim, nv);
    Polynomial e00 = alpha_sup(cfg.N3, 0, n);
    if (ch != Channel::none) e00 += alpha_sup(cfg.N4, n, ne);
    for (int v = 0; v < n; ++v) e00 += dV[v] * zl[v];
    if (ch == Channel::process)
        for (int v = 0; v < n; ++v) {
            Monomial mm = Monomial::unit(nv);
            mm.exponents[n + v] = 1;
            e00 += dV[v] * Polynomial::monomial(mm, 1.0);
        }
    H.at(0, 0) = e00;
    for (int v = 0; v < n; ++v) H.at(1 + v, 0) = H.at(0, 1 + v) = dV[v];
    Eigen::MatrixXd Ais = model.Abar_inv_sqrt();
    for (int a = 0; a < q; ++a) {
        Polynomial s(nv);
        for (int b = 0; b < q; ++b) s += lam_sup * libsup[b] * std::abs(Ais(a, b));
        H.at(1 + n + a, 0) = H.at(0, 1 + n + a) = s;
    }
    for (int v = 0; v < n; ++v) H.at(1 + v, 1 + v) = lam_sup;
    for (int a = 0; a < q; ++a) H.at(1 + n + a, 1 + n + a) = lam_sup;
    return H;
}

RoundBuild build_round(Channel ch, const EllipsoidModel& model, const FunctionLibrary& lib,
                       const SynthConfig& cfg, RoundMode mode,
                       const std::vector<Polynomial>& k_fixed, const Polynomial& V_fixed,
                       const Polynomial& lam_fixed, const ClassKInfty& a1_fixed,
                       const ClassKInfty& a2_fixed, const ClassKInfty& a3_fixed,
                       const ClassKInfty& a4_fixed) {
    const int n = lib.nstate;
    const int m = lib.ninput;
    const int ne = exo_dim(ch, lib);
    const int nv = n + ne;
    const int q = lib.N() + lib.M();
    const int nalpha = ch == Channel::none ? 3 : 4;
    ParityPlan par = parity_plan(lib, cfg, false, nullptr);

    RoundBuild rb;
    rb.n = n;
    rb.ne = ne;
    rb.q = q;
    SosProgram& prog = rb.prog;
    prog.set_gram_trace_regularization(cfg.gram_regularization);
    std::vector<int> xmap = identity_map(n);

    // comparison-function coefficients (Lemma-1 form)
    auto make_alpha = [&](int i /*0-based*/, int Ni, bool decision, const ClassKInfty& fixed) {
        std::vector<LinExpr>& cs = rb.alpha_c[i];
        if (decision) {
            LinExpr sum;
            for (int kk = 1; kk <= Ni; ++kk) {
                std::ostringstream os;
                os << "alpha" << (i + 1) << ".c" << kk;
                cs.push_back(LinExpr::var(prog.new_scalar(os.str(), 0.0)));
                sum += cs.back();
            }
            prog.add_ge(sum, cfg.mu);
        } else {
            for (double c : fixed.coeffs) cs.push_back(LinExpr(c));
        }
    };
    const int Ns[4] = {cfg.N1, cfg.N2, cfg.N3, cfg.N4};
    const ClassKInfty* fixed_alpha[4] = {&a1_fixed, &a2_fixed, &a3_fixed, &a4_fixed};
    for (int i = 0; i < nalpha; ++i) {
        bool decision = (i < 2) ? mode.solve_certificate
                                : (mode.solve_certificate || mode.solve_controller);
        make_alpha(i, Ns[i], decision, *fixed_alpha[i]);
    }
    auto alpha_expr = [&](int i, int nvars, int first, int count) {
        DecisionPoly e(nvars);
        for (std::size_t kk = 0; kk < rb.alpha_c[i].size(); ++kk) {
            Polynomial pw = norm_square_power(nvars, first, count, static_cast<int>(kk) + 1);
            e = e + scale_poly(pw, rb.alpha_c[i][kk]);
        }
        return e;
    };

    // V and lambda
    if (mode.solve_certificate) {
        rb.V_state = prog.new_poly(
            "V", n, monomials_in_range(n, cfg.deg_V_min, cfg.deg_V_max, par.on ? 0 : -1));
        rb.lam = prog.new_poly(
            "lambda", nv,
            monomials_in_range(nv, cfg.deg_lambda_min, cfg.deg_lambda_max, par.on ? 0 : -1));
    } else {
        rb.V_state = DecisionPoly(V_fixed);
        std::vector<int> lift_nv = identity_map(n);
        Polynomial lam_nv = lam_fixed.nvars() == nv
                                ? lam_fixed
                                : lam_fixed.lifted(nv, std::span<const int>(lift_nv));
        rb.lam = DecisionPoly(lam_nv);
    }

    // controller over the state variables
    if (mode.solve_controller) {
        for (int j = 0; j < m; ++j) {
            std::ostringstream os;
            os << "k" << (j + 1);
            rb.k_state.push_back(prog.new_poly(
                os.str(), n, monomials_in_range(n, cfg.deg_k_min, cfg.deg_k_max, par.on ? 1 : -1)));
        }
    } else {
        for (auto& kj : k_fixed) rb.k_state.push_back(DecisionPoly(kj));
    }

    // scalar SOS constraints (V bounds and multiplier positivity)
    if (mode.solve_certificate) {
        prog.add_scalar_sos("s_alpha1", rb.V_state - alpha_expr(0, n, 0, n));
        prog.add_scalar_sos("s_alpha2", alpha_expr(1, n, 0, n) - rb.V_state);
        prog.add_scalar_sos("s_lambda", rb.lam - DecisionPoly(Polynomial::constant(nv, cfg.mu)));
    }

    // dissipation block, sizes 1 + n + q
    std::vector<int> lift = identity_map(n);
    std::span<const int> lift_span(lift);
    DecisionPoly V_nv = rb.V_state.lifted(nv, lift_span);
    std::vector<DecisionPoly> dV;
    for (int v = 0; v < n; ++v) dV.push_back(V_nv.derivative(v));

    std::vector<DecisionPoly> libvec;
    for (auto& z : lib.Z) libvec.push_back(DecisionPoly(z.lifted(nv, lift_span)));
    PolyMatrix W_nv(lib.M(), m, nv);
    for (int a = 0; a < lib.M(); ++a)
        for (int j = 0; j < m; ++j) W_nv.at(a, j) = lib.W.at(a, j).lifted(nv, lift_span);
    for (int a = 0; a < lib.M(); ++a) {
        DecisionPoly row(nv);
        for (int j = 0; j < m; ++j) {
            DecisionPoly arg = rb.k_state[j].lifted(nv, lift_span);
            if (ch == Channel::actuator) arg.add_term([&] {
                Monomial mm = Monomial::unit(nv);
                mm.exponents[n + j] = 1;
                return mm;
            }(), LinExpr(1.0));
            row = row + arg * W_nv.at(a, j);
        }
        libvec.push_back(std::move(row));
    }

    std::vector<DecisionPoly> zeta_lib(n, DecisionPoly(nv));
    for (int v = 0; v < n; ++v)
        for (int a = 0; a < q; ++a)
            if (model.zeta_bar(a, v) != 0.0) zeta_lib[v] = zeta_lib[v] + libvec[a] * model.zeta_bar(a, v);

    DecisionPoly e00(nv);
    e00 = e00 + alpha_expr(2, nv, 0, n);
    if (ch != Channel::none) e00 = e00 - alpha_expr(3, nv, n, ne);
    for (int v = 0; v < n; ++v) e00 = e00 + dp_mul(dV[v], zeta_lib[v]);
    if (ch == Channel::process)
        for (int v = 0; v < n; ++v) {
            Monomial mm = Monomial::unit(nv);
            mm.exponents[n + v] = 1;
            e00 = e00 + dp_mul(dV[v], DecisionPoly(Polynomial::monomial(mm, 1.0)));
        }

    const int dim = 1 + n + q;
    DecisionMatrix M = dmat_zero(dim, dim, nv);
    M[0][0] = e00;
    for (int v = 0; v < n; ++v) M[1 + v][0] = M[0][1 + v] = dV[v];  // Qbar^{1/2} = I
    Eigen::MatrixXd Ais = model.Abar_inv_sqrt();
    std::vector<DecisionPoly> lam_lib;
    for (int b = 0; b < q; ++b) lam_lib.push_back(dp_mul(rb.lam, libvec[b]));
    for (int a = 0; a < q; ++a) {
        DecisionPoly s(nv);
        for (int b = 0; b < q; ++b)
            if (Ais(a, b) != 0.0) s = s + lam_lib[b] * Ais(a, b);
        M[1 + n + a][0] = M[0][1 + n + a] = std::move(s);
    }
    for (int v = 0; v < n; ++v) M[1 + v][1 + v] = rb.lam * -2.0;
    for (int a = 0; a < q; ++a) M[1 + n + a][1 + n + a] = rb.lam * -2.0;

    DecisionMatrix S = dmat_zero(dim, dim, nv);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) S[i][j] = -M[i][j];
    PolyMatrix hint = dissipation_support_hint(ch, model, lib, cfg, par.on ? 1 : 0);
    prog.add_matrix_sos("S_grad", S, &hint);
    return rb;
}

struct StoredCert {
    std::string name;
    PolyMatrix target;
    SosCertificate cert;
};

void refresh_certs(std::vector<StoredCert>& store, const SosProgram& prog, const SdpSolution& sol) {
    for (int i = 0; i < prog.sos_count(); ++i) {
        StoredCert sc;
        sc.name = prog.sos_name(i);
        sc.target = prog.value(prog.target_of(i), sol);
        sc.cert = prog.certificate(i, sol);
        bool replaced = false;
        for (auto& ex : store)
            if (ex.name == sc.name) {
                ex = sc;
                replaced = true;
                break;
            }
        if (!replaced) store.push_back(std::move(sc));
    }
}

std::vector<SosReport> verify_stored(const std::vector<StoredCert>& store) {
    std::vector<SosReport> reports;
    for (auto& sc : store) reports.push_back(verify_certificate(sc.target, sc.cert));
    return reports;
}

Certificate run_biconvex(Channel ch, const EllipsoidModel& model, const FunctionLibrary& lib,
                         const SynthConfig& cfg) {
    auto t0 = Clock::now();
    lib.validate();
    model.validate();
    const int m = lib.ninput;
    if (static_cast<int>(cfg.initial_controller.size()) != m)
        throw std::invalid_argument("biconvex synthesis needs an initial controller guess");
    for (auto& kj : cfg.initial_controller) {
        if (kj.nvars() != lib.nstate)
            throw std::invalid_argument("initial controller must be over the state variables");
        if (kj.coeff(Monomial::unit(lib.nstate)) != 0.0)
            throw std::invalid_argument("initial controller must vanish at the origin");
    }

    Certificate cert;
    cert.kind = ch == Channel::none ? CertificateKind::gas
                : ch == Channel::actuator ? CertificateKind::iss_actuator_biconvex
                                          : CertificateKind::iss_process_biconvex;
    cert.nstate = lib.nstate;
    cert.nexo = exo_dim(ch, lib);

    std::vector<Polynomial> k_cur = cfg.initial_controller;
    Polynomial V_cur, lam_cur;
    ClassKInfty a1, a2, a3, a4;
    std::vector<StoredCert> store;
    Certificate::Stats stats;

    auto account = [&](const SosProgram& prog, const SdpSolution& sol) {
        stats.scalar_vars += static_cast<int>(prog.problem().scalars.size());
        stats.psd_blocks += static_cast<int>(prog.problem().blocks.size());
        stats.equalities += static_cast<int>(prog.problem().equalities.size());
        stats.sdp_solves += 1;
        (void)sol;
    };

    for (int round = 0; round < cfg.alternation_rounds; ++round) {
        // step A: fix k, solve for V, lambda, alphas
        RoundMode ma{.solve_certificate = true, .solve_controller = false};
        RoundBuild ra = build_round(ch, model, lib, cfg, ma, k_cur, {}, {}, {}, {}, {}, {});
        auto resA = ra.prog.solve(cfg.solver);
        account(ra.prog, resA.sdp);
        if (!resA.feasible()) {
            std::string diag = "alternation round " + std::to_string(round + 1) +
                               " step A: " + to_string(resA.sdp.status) + " " + resA.sdp.message;
            throw SynthError("biconvex synthesis infeasible", diag);
        }
        V_cur = ra.prog.value(ra.V_state, resA.sdp, cfg.prune_tol);
        lam_cur = ra.prog.value(ra.lam, resA.sdp, cfg.prune_tol);
        if (std::getenv("POLYCTL_DEBUG_SYNTH"))
            std::fprintf(stderr, "[synth] round %d A: V = %s ; lambda = %s\n", round + 1,
                         V_cur.str().c_str(), lam_cur.str().c_str());
        auto read_alpha = [&](int i) {
            ClassKInfty a;
            for (auto& e : ra.alpha_c[i]) a.coeffs.push_back(std::max(0.0, ra.prog.value(e, resA.sdp)));
            return a;
        };
        a1 = read_alpha(0);
        a2 = read_alpha(1);
        a3 = read_alpha(2);
        if (ch != Channel::none) a4 = read_alpha(3);
        refresh_certs(store, ra.prog, resA.sdp);
        for (auto& rep : verify_stored(store))
            if (!rep.pass)
                throw SynthError("alternation regression after step A",
                                 "constraint " + rep.name + " no longer verifies");

        // step B: fix V and lambda, solve for k and alpha3/alpha4
        RoundMode mb{.solve_certificate = false, .solve_controller = true};
        RoundBuild rbld = build_round(ch, model, lib, cfg, mb, {}, V_cur, lam_cur, a1, a2, a3, a4);
        auto resB = rbld.prog.solve(cfg.solver);
        account(rbld.prog, resB.sdp);
        if (!resB.feasible()) {
            std::string diag = "alternation round " + std::to_string(round + 1) +
                               " step B: " + to_string(resB.sdp.status) + " " + resB.sdp.message;
            throw SynthError("biconvex synthesis infeasible", diag);
        }
        for (int j = 0; j < m; ++j) k_cur[j] = rbld.prog.value(rbld.k_state[j], resB.sdp, cfg.prune_tol);
        auto read_alphaB = [&](int i) {
            ClassKInfty a;
            for (auto& e : rbld.alpha_c[i]) a.coeffs.push_back(std::max(0.0, rbld.prog.value(e, resB.sdp)));
            return a;
        };
        a3 = read_alphaB(2);
        if (ch != Channel::none) a4 = read_alphaB(3);
        refresh_certs(store, rbld.prog, resB.sdp);
        for (auto& rep : verify_stored(store))
            if (!rep.pass)
                throw SynthError("alternation regression after step B",
                                 "constraint " + rep.name + " no longer verifies");
    }

    cert.k = k_cur;
    cert.V = V_cur;
    cert.lambda = lam_cur;
    cert.alpha1 = a1;
    cert.alpha2 = a2;
    cert.alpha3 = a3;
    cert.alpha4 = a4;
    cert.sos_reports = verify_stored(store);
    stats.wall_seconds = seconds_since(t0);
    cert.stats = stats;
    cert.validate(cfg.mu);
    return cert;
}

// ---------------------------------------------------------------------------
// convex programs (Theorems 4-5, model-based corollary)

enum class ConvexKind { actuator, process, model_based };

PolyMatrix default_xi(const FunctionLibrary& lib) {
    // Zhat Zhat^T, the choice that makes the b-hypothesis automatic
    const int nh = lib.Nhat();
    PolyMatrix xi(nh, nh, lib.nstate);
    for (int i = 0; i < nh; ++i)
        for (int j = 0; j < nh; ++j) xi.at(i, j) = lib.Zhat[i] * lib.Zhat[j];
    return xi;
}

Certificate run_convex(ConvexKind kind, const EllipsoidModel* model, const TrueSystem* true_sys,
                       const FunctionLibrary& lib, const SynthConfig& cfg) {
    auto t0 = Clock::now();
    lib.validate();
    if (!lib.has_zhat())
        throw std::invalid_argument("convex synthesis requires the reduced library Zhat with factor H");
    const int n = lib.nstate;
    const int m = lib.ninput;
    const int nh = lib.Nhat();
    const int q = lib.N() + lib.M();
    const int ne = kind == ConvexKind::process ? n : m;
    const int nv = n + ne;
    const bool data_driven = kind != ConvexKind::model_based;
    if (data_driven) model->validate();

    PolyMatrix Xi = cfg.Xi ? *cfg.Xi : default_xi(lib);
    if (Xi.rows != nh || Xi.cols != nh || !Xi.is_symmetric(1e-12))
        throw std::invalid_argument("Xi must be a symmetric Nhat x Nhat polynomial matrix");
    ParityPlan par = parity_plan(lib, cfg, true, &Xi);

    SosProgram prog;
    // with the minimized feasibility slack as the objective, the Gram trace
    // term is only a determinism tiebreak; a stronger weight would let the
    // solver trade slack for smaller certificates
    prog.set_gram_trace_regularization(cfg.feasibility_slack ? 1e-12 : cfg.gram_regularization);
    std::vector<int> xmap = identity_map(n);
    std::span<const int> lift_span(xmap);

    auto P = prog.new_psd_matrix("P", nh, cfg.p_margin);
    LinExpr eta = LinExpr::var(prog.new_scalar("eta", cfg.eta_margin));

    // Y over the state variables, one decision polynomial per entry
    std::vector<std::vector<DecisionPoly>> Y(m, std::vector<DecisionPoly>(nh));
    for (int j = 0; j < m; ++j)
        for (int c = 0; c < nh; ++c) {
            std::ostringstream os;
            os << "Y[" << j << "," << c << "]";
            Y[j][c] = prog.new_poly(os.str(), n,
                                    monomials_in_range(n, 0, cfg.deg_Y_max, par.on ? par.pH : -1));
        }

    // Theta symmetric with polynomial entries
    int deg_theta = cfg.deg_Theta_max >= 0 ? cfg.deg_Theta_max : Xi.entries.empty() ? 2 : [&] {
        int d = 0;
        for (auto& e : Xi.entries) d = std::max(d, e.degree());
        return d + 2;
    }();
    std::vector<std::vector<DecisionPoly>> Theta(nh, std::vector<DecisionPoly>(nh));
    for (int i = 0; i < nh; ++i)
        for (int j = i; j < nh; ++j) {
            std::ostringstream os;
            os << "Theta[" << i << "," << j << "]";
            Theta[i][j] = prog.new_poly(
                os.str(), n, monomials_in_range(n, cfg.deg_Theta_min, deg_theta, par.on ? 0 : -1));
            if (i != j) Theta[j][i] = Theta[i][j];
        }

    // Gamma(r) = sum C_k r^{2k}; either free PSD coefficients or c1 * I
    std::vector<std::vector<std::vector<LinExpr>>> Cs;  // per k: ne x ne
    LinExpr gamma_c1;
    if (cfg.gamma_identity) {
        gamma_c1 = LinExpr::var(prog.new_scalar("gamma.c1", cfg.epsilon));
    } else {
        for (int kk = 0; kk <= cfg.gamma_terms; ++kk) {
            std::ostringstream os;
            os << "gamma.C" << kk;
            Cs.push_back(prog.new_psd_matrix(os.str(), ne).entries);
        }
        // sum of coefficients dominates epsilon I
        auto slack = prog.new_psd_matrix("gamma.sum_slack", ne);
        for (int i = 0; i < ne; ++i)
            for (int j = i; j < ne; ++j) {
                LinExpr e;
                for (auto& Ck : Cs) e += Ck[i][j];
                e -= slack.entries[i][j];
                prog.add_eq(e, i == j ? cfg.epsilon : 0.0);
            }
    }
    auto gamma_entry = [&](int i, int j) {
        DecisionPoly e(nv);
        if (cfg.gamma_identity) {
            if (i == j) e.add_term(Monomial::unit(nv), gamma_c1);
            return e;
        }
        for (std::size_t kk = 0; kk < Cs.size(); ++kk)
            e = e + scale_poly(norm_square_power(nv, n, ne, static_cast<int>(kk)), Cs[kk][i][j]);
        return e;
    };

    // lambda and its positivity certificate (data-driven programs only)
    DecisionPoly lam(nv);
    if (data_driven) {
        if (cfg.lambda_drop_exo) {
            lam = prog.new_poly("lambda", n,
                                monomials_in_range(n, cfg.deg_lambda_min, cfg.deg_lambda_max,
                                                   par.on ? 0 : -1))
                      .lifted(nv, lift_span);
        } else {
            lam = prog.new_poly("lambda", nv,
                                monomials_in_range(nv, cfg.deg_lambda_min, cfg.deg_lambda_max,
                                                   par.on ? 0 : -1));
        }
        prog.add_scalar_sos("s_lambda", lam - DecisionPoly(Polynomial::constant(nv, cfg.epsilon)));
    }

    // Theta - eta Xi is an SOS matrix
    int s_theta_idx = -1;
    {
        DecisionMatrix S = dmat_zero(nh, nh, n);
        for (int i = 0; i < nh; ++i)
            for (int j = 0; j < nh; ++j)
                S[i][j] = Theta[i][j] - scale_poly(Xi.at(i, j), eta);
        s_theta_idx = prog.add_matrix_sos("S_theta", S);
    }

    // G = [H P; W Y] over nv, the q x nh coefficient stack of the closed loop
    PolyMatrix H_nv(lib.N(), nh, nv), W_nv(lib.M(), m, nv);
    for (int i = 0; i < lib.N(); ++i)
        for (int c = 0; c < nh; ++c) H_nv.at(i, c) = lib.H->at(i, c).lifted(nv, lift_span);
    for (int a = 0; a < lib.M(); ++a)
        for (int j = 0; j < m; ++j) W_nv.at(a, j) = lib.W.at(a, j).lifted(nv, lift_span);
    DecisionMatrix G = dmat_zero(q, nh, nv);
    for (int i = 0; i < lib.N(); ++i)
        for (int c = 0; c < nh; ++c) {
            DecisionPoly s(nv);
            for (int e = 0; e < nh; ++e) s = s + scale_poly(H_nv.at(i, e), P.entries[e][c]);
            G[i][c] = std::move(s);
        }
    for (int a = 0; a < lib.M(); ++a)
        for (int c = 0; c < nh; ++c) {
            DecisionPoly s(nv);
            for (int j = 0; j < m; ++j) s = s + Y[j][c].lifted(nv, lift_span) * W_nv.at(a, j);
            G[lib.N() + a][c] = std::move(s);
        }

    // Jacobian of Zhat w.r.t. the state, over nv
    std::vector<Polynomial> zhat_nv;
    for (auto& z : lib.Zhat) zhat_nv.push_back(z.lifted(nv, lift_span));
    PolyMatrix Jx(nh, n, nv);
    for (int i = 0; i < nh; ++i)
        for (int v = 0; v < n; ++v) Jx.at(i, v) = zhat_nv[i].derivative(v);

    // [0; W] stack (q x m)
    PolyMatrix stack0W(q, m, nv);
    for (int a = 0; a < lib.M(); ++a)
        for (int j = 0; j < m; ++j) stack0W.at(lib.N() + a, j) = W_nv.at(a, j);

    auto theta_nv = [&](int i, int j) { return Theta[i][j].lifted(nv, lift_span); };

    DecisionMatrix M;
    if (kind == ConvexKind::model_based) {
        // 2x2 blocks of sizes nh and ne, true pair substituted
        Eigen::MatrixXd AB(n, q);
        AB << true_sys->A_star, true_sys->B_star;
        PolyMatrix JA(nh, q, nv);  // Jx * AB
        for (int i = 0; i < nh; ++i)
            for (int a = 0; a < q; ++a) {
                Polynomial s(nv);
                for (int v = 0; v < n; ++v)
                    if (AB(v, a) != 0.0) s += Jx.at(i, v) * AB(v, a);
                JA.at(i, a) = std::move(s);
            }
        const int dim = nh + ne;
        M = dmat_zero(dim, dim, nv);
        for (int i = 0; i < nh; ++i)
            for (int j = 0; j < nh; ++j) {
                DecisionPoly s(nv);
                for (int a = 0; a < q; ++a) {
                    s = s + dp_mul(G[a][j], JA.at(i, a));          // (Jx AB G)_{ij}
                    s = s + dp_mul(G[a][i], JA.at(j, a));          // transpose part
                }
                M[i][j] = s + theta_nv(i, j);
            }
        PolyMatrix lower = stack0W.transpose() * JA.transpose();  // ne x nh, numeric
        for (int j = 0; j < ne; ++j)
            for (int i = 0; i < nh; ++i) M[nh + j][i] = M[i][nh + j] = DecisionPoly(lower.at(j, i));
        for (int i2 = 0; i2 < ne; ++i2)
            for (int j2 = 0; j2 < ne; ++j2) M[nh + i2][nh + j2] = M[nh + i2][nh + j2] - gamma_entry(i2, j2);
    } else {
        // 3x3 blocks of sizes nh, ne, q
        PolyMatrix ZJ(q, nh, nv);  // zeta_bar * Jx^T
        for (int a = 0; a < q; ++a)
            for (int i = 0; i < nh; ++i) {
                Polynomial s(nv);
                for (int v = 0; v < n; ++v)
                    if (model->zeta_bar(a, v) != 0.0) s += Jx.at(i, v) * model->zeta_bar(a, v);
                ZJ.at(a, i) = std::move(s);
            }
        PolyMatrix JQJ(nh, nh, nv);  // Jx Qbar Jx^T with Qbar = I
        for (int i = 0; i < nh; ++i)
            for (int j = i; j < nh; ++j) {
                Polynomial s(nv);
                for (int v = 0; v < n; ++v) s += Jx.at(i, v) * Jx.at(j, v);
                JQJ.at(i, j) = s;
                if (i != j) JQJ.at(j, i) = std::move(s);
            }
        const int dim = nh + ne + q;
        M = dmat_zero(dim, dim, nv);
        for (int i = 0; i < nh; ++i)
            for (int j = 0; j < nh; ++j) {
                DecisionPoly s(nv);
                for (int a = 0; a < q; ++a) {
                    s = s + dp_mul(G[a][i], ZJ.at(a, j));  // (G^T zeta Jx^T)_{ij} transposed pair
                    s = s + dp_mul(G[a][j], ZJ.at(a, i));
                }
                s = s + theta_nv(i, j);
                s = s + dp_mul(lam, DecisionPoly(JQJ.at(i, j)));
                M[i][j] = std::move(s);
            }
        // (1,0): actuator [0;W]^T zeta Jx^T; process Jx^T (paper's dZhat/dx in
        // the off-diagonal position)
        if (kind == ConvexKind::actuator) {
            PolyMatrix lower = stack0W.transpose() * ZJ;  // ne x nh
            for (int j = 0; j < ne; ++j)
                for (int i = 0; i < nh; ++i) M[nh + j][i] = M[i][nh + j] = DecisionPoly(lower.at(j, i));
        } else {
            for (int v = 0; v < ne; ++v)
                for (int i = 0; i < nh; ++i) M[nh + v][i] = M[i][nh + v] = DecisionPoly(Jx.at(i, v));
        }
        for (int i2 = 0; i2 < ne; ++i2)
            for (int j2 = 0; j2 < ne; ++j2) M[nh + i2][nh + j2] = M[nh + i2][nh + j2] - gamma_entry(i2, j2);
        // (2,0) = G, (2,1) = [0;W] (actuator) or 0 (process), (2,2) = -lambda Abar
        for (int a = 0; a < q; ++a)
            for (int i = 0; i < nh; ++i) M[nh + ne + a][i] = M[i][nh + ne + a] = G[a][i];
        if (kind == ConvexKind::actuator)
            for (int a = 0; a < q; ++a)
                for (int j = 0; j < ne; ++j)
                    M[nh + ne + a][nh + j] = M[nh + j][nh + ne + a] = DecisionPoly(stack0W.at(a, j));
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b) {
                if (model->Abar(a, b) == 0.0) continue;
                DecisionPoly s = dp_mul(lam, DecisionPoly(Polynomial::constant(nv, -model->Abar(a, b))));
                M[nh + ne + a][nh + ne + b] = M[nh + ne + a][nh + ne + b] + s;
            }
    }
    LinExpr feas_slack;
    {
        const int dim = static_cast<int>(M.size());
        DecisionMatrix S = dmat_zero(dim, dim, nv);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) S[i][j] = -M[i][j];
        if (cfg.feasibility_slack) {
            feas_slack = LinExpr::var(prog.new_scalar("slack_feas", 0.0));
            for (int i = 0; i < dim; ++i)
                S[i][i].add_term(Monomial::unit(nv), feas_slack);
            prog.add_objective(feas_slack);
        }
        prog.add_matrix_sos("S_partial", S);
    }

    auto res = prog.solve(cfg.solver);
    if (res.feasible() && cfg.feasibility_slack) {
        // the minimized diagonal slack must stay below the certificate margin
        // scale; anything larger is an infeasible program wearing a slack
        double sigma = prog.value(feas_slack, res.sdp);
        if (sigma > cfg.slack_tol)
            throw SynthError("convex synthesis infeasible",
                             "dissipation block violated by " + std::to_string(sigma) +
                                 " even at the least-infeasible point");
    }
    Certificate cert;
    cert.kind = kind == ConvexKind::actuator ? CertificateKind::iss_actuator_convex
                : kind == ConvexKind::process ? CertificateKind::iss_process_convex
                                              : CertificateKind::model_based;
    cert.nstate = n;
    cert.nexo = ne;
    cert.stats.scalar_vars = static_cast<int>(prog.problem().scalars.size());
    cert.stats.psd_blocks = static_cast<int>(prog.problem().blocks.size());
    cert.stats.equalities = static_cast<int>(prog.problem().equalities.size());
    cert.stats.sdp_solves = 1;
    if (!res.feasible())
        throw SynthError("convex synthesis infeasible",
                         std::string("one-shot program: ") + to_string(res.sdp.status) + " " +
                             res.sdp.message);

    // extract P, Y, Theta, Gamma, lambda
    Eigen::MatrixXd Pv = res.sdp.block_values.at("P") +
                         cfg.p_margin * Eigen::MatrixXd::Identity(nh, nh);
    Pv = 0.5 * (Pv + Pv.transpose()).eval();
    cert.P = Pv;
    cert.Y = PolyMatrix(m, nh, n);
    for (int j = 0; j < m; ++j)
        for (int c = 0; c < nh; ++c) cert.Y.at(j, c) = prog.value(Y[j][c], res.sdp, cfg.prune_tol);
    cert.Theta = PolyMatrix(nh, nh, n);
    for (int i = 0; i < nh; ++i)
        for (int j = 0; j < nh; ++j) cert.Theta.at(i, j) = prog.value(Theta[i][j], res.sdp, cfg.prune_tol);
    cert.eta = prog.value(eta, res.sdp);
    if (cfg.gamma_identity) {
        cert.Gamma.C.push_back(prog.value(gamma_c1, res.sdp) * Eigen::MatrixXd::Identity(ne, ne));
    } else {
        for (auto& Ck : Cs) {
            Eigen::MatrixXd Cv(ne, ne);
            for (int i = 0; i < ne; ++i)
                for (int j = 0; j < ne; ++j) Cv(i, j) = prog.value(Ck[i][j], res.sdp);
            cert.Gamma.C.push_back(0.5 * (Cv + Cv.transpose()));
        }
    }
    if (data_driven) cert.lambda = prog.value(lam, res.sdp, cfg.prune_tol);
    cert.Xi = Xi;

    // controller and Lyapunov function from the parametrization
    Eigen::MatrixXd Pinv = Pv.llt().solve(Eigen::MatrixXd::Identity(nh, nh));
    Pinv = 0.5 * (Pinv + Pinv.transpose()).eval();
    cert.k.assign(m, Polynomial(n));
    for (int j = 0; j < m; ++j) {
        Polynomial s(n);
        for (int c = 0; c < nh; ++c)
            for (int e = 0; e < nh; ++e)
                if (Pinv(c, e) != 0.0) s += cert.Y.at(j, c) * lib.Zhat[e] * Pinv(c, e);
        cert.k[j] = s.pruned(cfg.prune_tol);
    }
    {
        // a is assembled from the certified expansion eta Xi + basis' Gram
        // basis of S_Theta, so a >= eta b holds exactly even though the solved
        // Theta matches it only to the verification tolerance
        PolyMatrix theta_cert =
            sos_expansion(prog.certificate(s_theta_idx, res.sdp), nh, n);
        for (int i = 0; i < nh; ++i)
            for (int j = 0; j < nh; ++j)
                theta_cert.at(i, j) += Xi.at(i, j) * cert.eta;
        Polynomial V(n), a(n), b(n);
        for (int c = 0; c < nh; ++c)
            for (int e = 0; e < nh; ++e) {
                if (Pinv(c, e) != 0.0) V += lib.Zhat[c] * lib.Zhat[e] * Pinv(c, e);
                Polynomial inner_theta(n), inner_xi(n);
                for (int r1 = 0; r1 < nh; ++r1)
                    for (int r2 = 0; r2 < nh; ++r2) {
                        double w = Pinv(c, r1) * Pinv(r2, e);
                        if (w == 0.0) continue;
                        inner_theta += theta_cert.at(r1, r2) * w;
                        inner_xi += Xi.at(r1, r2) * w;
                    }
                a += lib.Zhat[c] * inner_theta * lib.Zhat[e];
                b += lib.Zhat[c] * inner_xi * lib.Zhat[e];
            }
        cert.V = V.pruned(cfg.prune_tol);
        cert.a_fun = a.pruned(cfg.prune_tol);
        cert.b_fun = b.pruned(cfg.prune_tol);
    }
    cert.alpha4 = cert.Gamma.to_alpha4();
    cert.sos_reports = prog.verify_all(res.sdp);
    for (auto& rep : cert.sos_reports)
        if (!rep.pass)
            throw SynthError("convex synthesis produced a failing SOS certificate",
                             "constraint " + rep.name);

    // mandatory b-hypothesis check (Theorems 4-5 conclusions are conditional)
    PdRuReport pd = check_pd_ru(lib.Zhat, Pv, Xi, cfg.solver);
    if (!pd.pass)
        throw SynthError("convex synthesis rejected: b(x) failed the positive-definite/"
                         "radially-unbounded check",
                         "choose a different Xi; Xi = Zhat Zhat^T makes the hypothesis automatic");

    extract_comparison_functions(cert, cfg);
    cert.stats.wall_seconds = seconds_since(t0);
    cert.validate(cfg.mu);
    return cert;
}

}  // namespace

Certificate synth_gas(const EllipsoidModel& model, const FunctionLibrary& lib,
                      const SynthConfig& cfg) {
    return run_biconvex(Channel::none, model, lib, cfg);
}

Certificate synth_iss_actuator_biconvex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                        const SynthConfig& cfg) {
    return run_biconvex(Channel::actuator, model, lib, cfg);
}

Certificate synth_iss_process_biconvex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                       const SynthConfig& cfg) {
    return run_biconvex(Channel::process, model, lib, cfg);
}

Certificate synth_iss_actuator_convex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                      const SynthConfig& cfg) {
    return run_convex(ConvexKind::actuator, &model, nullptr, lib, cfg);
}

Certificate synth_iss_process_convex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                     const SynthConfig& cfg) {
    return run_convex(ConvexKind::process, &model, nullptr, lib, cfg);
}

Certificate synth_modelbased_convex(const TrueSystem& sys, const SynthConfig& cfg) {
    sys.validate();
    return run_convex(ConvexKind::model_based, nullptr, &sys, sys.library, cfg);
}

std::vector<Polynomial> sontag_redesign(const Eigen::MatrixXd& AB, const FunctionLibrary& lib,
                                        std::span<const Polynomial> k, const Polynomial& V) {
    lib.validate();
    const int n = lib.nstate;
    const int m = lib.ninput;
    if (AB.rows() != n || AB.cols() != lib.N() + lib.M())
        throw std::invalid_argument("sontag_redesign: AB must be n x (N+M)");
    if (static_cast<int>(k.size()) != m) throw std::invalid_argument("sontag_redesign: controller size");

    // W k as an M-vector, then f = A Z + B (W k)
    std::vector<Polynomial> wk(lib.M(), Polynomial(n));
    for (int a = 0; a < lib.M(); ++a)
        for (int j = 0; j < m; ++j) wk[a] += lib.W.at(a, j) * k[j];
    std::vector<Polynomial> f(n, Polynomial(n));
    for (int v = 0; v < n; ++v) {
        for (int i = 0; i < lib.N(); ++i)
            if (AB(v, i) != 0.0) f[v] += lib.Z[i] * AB(v, i);
        for (int a = 0; a < lib.M(); ++a)
            if (AB(v, lib.N() + a) != 0.0) f[v] += wk[a] * AB(v, lib.N() + a);
    }
    Polynomial rho(n);
    for (int v = 0; v < n; ++v) rho -= V.derivative(v) * f[v];

    // dV/dx * B W, a 1 x m polynomial row
    std::vector<Polynomial> g(m, Polynomial(n));
    for (int j = 0; j < m; ++j)
        for (int v = 0; v < n; ++v) {
            Polynomial bw(n);
            for (int a = 0; a < lib.M(); ++a)
                if (AB(v, lib.N() + a) != 0.0) bw += lib.W.at(a, j) * AB(v, lib.N() + a);
            g[j] += V.derivative(v) * bw;
        }

    std::vector<Polynomial> kt;
    for (int j = 0; j < m; ++j) kt.push_back(k[j] - rho * g[j] * (1.0 / (2.0 * m)));
    return kt;
}

void extract_comparison_functions(Certificate& cert, const SynthConfig& cfg) {
    if (!cert.is_convex_path())
        throw std::invalid_argument("comparison-function extraction applies to convex certificates");
    const int n = cert.nstate;
    const int degV = cert.V.degree();
    const int degA = cert.a_fun.degree();

    auto solve_bound = [&](const std::string& name, const Polynomial& fixed, bool fixed_minus_alpha,
                           int terms, bool maximize) -> ClassKInfty {
        // objective sense: tight bounds are preferable, but a plain feasible
        // Lemma-1 bound is always accepted as the fallback
        for (int attempt = 0; attempt < 2; ++attempt) {
            int Nt = terms + attempt;
            auto build_and_solve = [&](bool with_objective,
                                       ClassKInfty& out) -> bool {
                SosProgram prog;
                prog.set_gram_trace_regularization(cfg.gram_regularization);
                std::vector<LinExpr> cs;
                LinExpr sum;
                for (int kk = 1; kk <= Nt; ++kk) {
                    cs.push_back(LinExpr::var(prog.new_scalar(name + ".c" + std::to_string(kk), 0.0)));
                    sum += cs.back();
                }
                prog.add_ge(sum, cfg.mu);
                DecisionPoly alpha(n);
                for (int kk = 1; kk <= Nt; ++kk)
                    alpha = alpha + scale_poly(norm_square_power(n, 0, n, kk), cs[kk - 1]);
                DecisionPoly target = fixed_minus_alpha ? DecisionPoly(fixed) - alpha
                                                        : alpha - DecisionPoly(fixed);
                prog.add_scalar_sos("s_" + name, target);
                if (with_objective) prog.add_objective(maximize ? -sum : sum);
                auto res = prog.solve(cfg.solver);
                if (!res.feasible()) return false;
                ClassKInfty a;
                for (auto& e : cs) a.coeffs.push_back(std::max(0.0, prog.value(e, res.sdp)));
                if (!prog.verify_all(res.sdp).front().pass) return false;
                out = a;
                return true;
            };
            ClassKInfty a;
            if (build_and_solve(true, a)) return a;
            if (build_and_solve(false, a)) return a;
        }
        throw SynthError("comparison-function extraction failed for " + name,
                         "auxiliary SOS program infeasible after one degree raise");
    };

    if (std::getenv("POLYCTL_DEBUG_SYNTH"))
        std::fprintf(stderr, "[extract] V = %s\n[extract] a = %s\n", cert.V.str().c_str(),
                     cert.a_fun.str().c_str());
    cert.alpha1 = solve_bound("alpha1", cert.V, true, std::max(cfg.N1, degV / 2), true);
    cert.alpha2 = solve_bound("alpha2", cert.V, false, std::max(cfg.N2, (degV + 1) / 2), false);
    cert.alpha3 = solve_bound("alpha3", cert.a_fun, true, std::max(cfg.N3, degA / 2), true);
}

std::vector<SosReport> recheck_gas_frozen(const Certificate& cert, const EllipsoidModel& model,
                                          const FunctionLibrary& lib, const SynthConfig& cfg) {
    if (cert.kind != CertificateKind::iss_actuator_biconvex &&
        cert.kind != CertificateKind::iss_process_biconvex)
        throw std::invalid_argument("0-GAS recheck applies to the biconvex ISS certificates");
    const int n = lib.nstate;
    const int ne = cert.nexo;

    // freeze the exogenous input to zero in the multiplier
    Polynomial lam0 = cert.lambda;
    for (int v = 0; v < ne; ++v) lam0 = lam0.substituted(n + v, 0.0);
    Polynomial lam0_state(n);
    for (auto& [m, c] : lam0.terms()) {
        Monomial mm = Monomial::unit(n);
        for (int v = 0; v < n; ++v) mm.exponents[v] = m.exponents[v];
        lam0_state.add_term(mm, c);
    }

    if (!cert.alpha1.valid(cfg.mu) || !cert.alpha2.valid(cfg.mu) || !cert.alpha3.valid(cfg.mu))
        throw SynthError("0-GAS recheck failed", "comparison coefficients violate the Lemma-1 conditions");

    RoundMode frozen{.solve_certificate = false, .solve_controller = false};
    RoundBuild rb = build_round(Channel::none, model, lib, cfg, frozen, cert.k, cert.V, lam0_state,
                                cert.alpha1, cert.alpha2, cert.alpha3, {});
    // the frozen round fixes every polynomial, so only Gram feasibility remains;
    // the V-bound and multiplier constraints must be compiled explicitly since
    // build_round emits them only on the certificate side
    SosProgram& prog = rb.prog;
    Polynomial a1p = cert.alpha1.as_polynomial(n, 0, n);
    Polynomial a2p = cert.alpha2.as_polynomial(n, 0, n);
    prog.add_scalar_sos("s_alpha1", DecisionPoly(cert.V - a1p));
    prog.add_scalar_sos("s_alpha2", DecisionPoly(a2p - cert.V));
    prog.add_scalar_sos("s_lambda", DecisionPoly(lam0_state - Polynomial::constant(n, cfg.mu)));
    auto res = prog.solve(cfg.solver);
    if (!res.feasible())
        throw SynthError("0-GAS recheck failed",
                         std::string("frozen Theorem-1 program: ") + to_string(res.sdp.status));
    return prog.verify_all(res.sdp);
}

}  // namespace polyctl
