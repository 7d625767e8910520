#ifndef POLYCTL_SYNTH_HPP
#define POLYCTL_SYNTH_HPP

#include <optional>
#include <string>
#include <vector>

#include "polyctl/consistency.hpp"
#include "polyctl/data.hpp"
#include "polyctl/poly.hpp"
#include "polyctl/sos.hpp"

namespace polyctl {

/// alpha(r) = sum_{k=1}^{N} coeffs[k-1] r^{2k}; class K-infinity whenever all
/// coefficients are nonnegative and their sum is positive.
struct ClassKInfty {
    std::vector<double> coeffs;

    bool empty() const { return coeffs.empty(); }
    double eval(double r) const;
    /// nonnegativity (within tol) and coefficient sum >= mu
    bool valid(double mu, double tol = 1e-9) const;
    /// alpha(|x|) as a polynomial over vars [first, first+count)
    Polynomial as_polynomial(int nvars, int first, int count) const;
};

/// Gamma(r) = sum_{k=0}^{N} C_k r^{2k} with PSD coefficient matrices.
struct MatrixComparison {
    std::vector<Eigen::MatrixXd> C;

    bool empty() const { return C.empty(); }
    int dim() const { return C.empty() ? 0 : static_cast<int>(C.front().rows()); }
    Eigen::MatrixXd eval(double r) const;
    /// alpha4(r) = sum_{k=1}^{N+1} lambda_max(C_{k-1}) r^{2k}
    ClassKInfty to_alpha4() const;
};

struct SynthConfig {
    int deg_V_min = 2, deg_V_max = 4;
    int deg_k_min = 1, deg_k_max = 3;
    int deg_lambda_min = 0, deg_lambda_max = 4;
    int deg_Y_max = 2;
    int deg_Theta_min = 0;
    int deg_Theta_max = -1;  // -1: degree of Xi plus 2
    int N1 = 2, N2 = 2, N3 = 2, N4 = 2;
    double mu = 1e-3;        // fixed positivity scalar of the biconvex programs
    double epsilon = 1e-7;   // fixed positivity scalar of the convex programs
    double eta_margin = 1e-4;
    double p_margin = 1e-6;
    int gamma_terms = 1;          // N in Gamma(r) = sum_{k<=N} C_k r^{2k}
    bool gamma_identity = false;  // constrain Gamma to c1 * I
    bool lambda_drop_exo = true;  // convex path: lambda depends on x only
    bool use_parity = true;       // exploit odd-library sign symmetry
    // minimized diagonal slack on the convex dissipation block: restores a
    // strictly feasible interior, and its optimal value surfaces as the
    // certificate residual, still gated by the 1e-6-level verification
    bool feasibility_slack = true;
    double slack_tol = 1e-6;  // reject certificates whose minimized slack exceeds this
    int alternation_rounds = 3;
    std::vector<Polynomial> initial_controller;  // biconvex initial guess, state vars
    std::optional<PolyMatrix> Xi;                // convex-path design parameter
    double gram_regularization = 1e-6;
    double prune_tol = 1e-8;  // relative to each polynomial's magnitude
    SolverConfig solver;
};

enum class CertificateKind {
    gas,
    iss_actuator_biconvex,
    iss_process_biconvex,
    iss_actuator_convex,
    iss_process_convex,
    model_based
};

const char* to_string(CertificateKind k);

struct Certificate {
    CertificateKind kind = CertificateKind::gas;
    int nstate = 0;
    int nexo = 0;  // disturbance dimension (0 for gas)

    std::vector<Polynomial> k;  // controller, state variables
    Polynomial V;               // state variables
    ClassKInfty alpha1, alpha2, alpha3, alpha4;  // alpha4 absent for gas
    Polynomial lambda;          // multiplier over (x, exo) (data-driven programs)

    // convex-path extras
    Eigen::MatrixXd P;
    PolyMatrix Y;
    PolyMatrix Theta;
    MatrixComparison Gamma;
    double eta = 0.0;
    Polynomial a_fun, b_fun;
    std::optional<PolyMatrix> Xi;

    std::vector<SosReport> sos_reports;
    std::string dataset_hash, model_hash, config_hash;

    struct Stats {
        int scalar_vars = 0;
        int psd_blocks = 0;
        int equalities = 0;
        int sdp_solves = 0;
        double wall_seconds = 0.0;
    };
    Stats stats;

    bool all_reports_pass() const;
    bool is_convex_path() const {
        return kind == CertificateKind::iss_actuator_convex ||
               kind == CertificateKind::iss_process_convex || kind == CertificateKind::model_based;
    }
    /// structural invariants: V(0) = 0, k(0) = 0, every report PASS,
    /// comparison functions valid in the Lemma-1 sense
    void validate(double mu) const;
};

class SynthError : public std::runtime_error {
public:
    SynthError(const std::string& what, std::string diagnostics = {})
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

Certificate synth_gas(const EllipsoidModel& model, const FunctionLibrary& lib,
                      const SynthConfig& cfg);
Certificate synth_iss_actuator_biconvex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                        const SynthConfig& cfg);
Certificate synth_iss_process_biconvex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                       const SynthConfig& cfg);
Certificate synth_iss_actuator_convex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                      const SynthConfig& cfg);
Certificate synth_iss_process_convex(const EllipsoidModel& model, const FunctionLibrary& lib,
                                     const SynthConfig& cfg);
Certificate synth_modelbased_convex(const TrueSystem& sys, const SynthConfig& cfg);

/// Controller redesign from a known pair (A, B): with
/// rho = -dV/dx (A Z + B W k), returns k - (rho / 2m) (dV/dx B W)^T.
std::vector<Polynomial> sontag_redesign(const Eigen::MatrixXd& AB, const FunctionLibrary& lib,
                                        std::span<const Polynomial> k, const Polynomial& V);

/// Convex-path comparison functions: alpha1/alpha2 sandwich V, alpha3 minorizes
/// a(x), each solved as an auxiliary scalar SOS program in Lemma-1 form (degree
/// raised once on infeasibility); alpha4 comes from Gamma.
void extract_comparison_functions(Certificate& cert, const SynthConfig& cfg);

/// Re-verifies that a Theorem-2/3 certificate with the exogenous input frozen
/// to zero satisfies the full Theorem-1 constraint set (the 0-GAS remark):
/// every fixed polynomial identity is re-compiled and re-certified.
std::vector<SosReport> recheck_gas_frozen(const Certificate& cert, const EllipsoidModel& model,
                                          const FunctionLibrary& lib, const SynthConfig& cfg);

}  // namespace polyctl

#endif
