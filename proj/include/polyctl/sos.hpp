#ifndef POLYCTL_SOS_HPP
#define POLYCTL_SOS_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "polyctl/poly.hpp"
#include "polyctl/sdp.hpp"

namespace polyctl {

/// Affine expression in SDP decision variables: scalars and entries of
/// declared PSD blocks. Block references address the entry value X(r, c).
struct LinExpr {
    double c = 0.0;
    std::map<int, double> scalars;
    std::map<std::tuple<int, int, int>, double> blocks;  // (block, r, c) with r <= c

    LinExpr() = default;
    /*implicit*/ LinExpr(double v) : c(v) {}
    static LinExpr var(int id, double coef = 1.0) {
        LinExpr e;
        e.scalars[id] = coef;
        return e;
    }
    static LinExpr block_entry(int blk, int r, int c, double coef = 1.0) {
        LinExpr e;
        e.blocks[{blk, std::min(r, c), std::max(r, c)}] = coef;
        return e;
    }
    bool is_constant() const { return scalars.empty() && blocks.empty(); }
    bool is_zero() const { return is_constant() && c == 0.0; }

    LinExpr& operator+=(const LinExpr& o);
    LinExpr& operator-=(const LinExpr& o);
    LinExpr& operator*=(double s);
    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
    friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
    friend LinExpr operator-(LinExpr a) { return a *= -1.0; }
};

/// Polynomial whose coefficients are affine in decision variables.
class DecisionPoly {
public:
    DecisionPoly() : nvars_(0) {}
    explicit DecisionPoly(int nvars) : nvars_(nvars) {}
    /*implicit*/ DecisionPoly(const Polynomial& p) : nvars_(p.nvars()) {
        for (auto& [m, c] : p.terms()) terms_[m] = LinExpr(c);
    }

    int nvars() const { return nvars_; }
    const std::map<Monomial, LinExpr>& terms() const { return terms_; }
    bool is_zero() const;
    bool is_numeric() const;
    Polynomial to_polynomial() const;  // requires is_numeric()

    void add_term(const Monomial& m, const LinExpr& e);
    DecisionPoly derivative(int var) const;
    DecisionPoly lifted(int new_nvars, std::span<const int> var_map) const;

    DecisionPoly operator+(const DecisionPoly& o) const;
    DecisionPoly operator-(const DecisionPoly& o) const;
    DecisionPoly operator-() const;
    DecisionPoly operator*(double s) const;
    /// product with a fixed (numeric) polynomial — the only product that keeps
    /// coefficients affine
    DecisionPoly operator*(const Polynomial& p) const;

    int max_degree() const;

private:
    int nvars_;
    std::map<Monomial, LinExpr> terms_;
};

DecisionPoly scale_poly(const Polynomial& p, const LinExpr& e);  // e * p(x)

using DecisionMatrix = std::vector<std::vector<DecisionPoly>>;  // square, symmetric

/// Spec-level constraint description. A default-constructed gram_basis means
/// the compiler chooses the basis (parity classes plus degree filtering from
/// the target support).
struct SosConstraint {
    std::string name;
    DecisionPoly scalar_target;            // used when matrix_target is empty
    DecisionMatrix matrix_target;
    std::vector<Monomial> gram_basis;      // optional override (scalar case)
};

struct SosReport {
    std::string name;
    double residual = 0.0;      // max-abs coefficient mismatch
    double gram_min_eig = 0.0;  // min over the certificate's Gram blocks
    bool pass = false;
};

/// Gram certificate for one SOS constraint: one or more PSD Gram matrices over
/// row-tagged monomial bases (row index is 0 for scalar constraints).
struct SosCertificate {
    struct GramBlock {
        std::vector<std::pair<int, Monomial>> basis;
        Eigen::MatrixXd gram;
    };
    std::string name;
    int rows = 1;
    std::vector<GramBlock> grams;
};

/// All monomials usable in a Gram basis for an SOS target of the given even
/// degree. `even_only` drops the constant monomial, suited to targets whose
/// terms all have degree in [2, target_degree].
enum class BasisStructure { full, even_only };
std::vector<Monomial> gram_basis_for(int target_degree, int variables, BasisStructure structure);

class CompileError : public std::runtime_error {
public:
    explicit CompileError(const std::string& what) : std::runtime_error(what) {}
};

/// Incremental SOS-to-SDP compiler. Declares decision scalars, PSD matrices
/// and decision polynomials, turns SOS constraints into Gram blocks plus
/// coefficient-matching equalities, and extracts certificates after a solve.
class SosProgram {
public:
    int new_scalar(const std::string& name, std::optional<double> lower = std::nullopt) {
        return prob_.add_scalar(unique(name), lower);
    }
    /// one coefficient variable per monomial; all free
    DecisionPoly new_poly(const std::string& name, int nvars, const std::vector<Monomial>& monomials);

    struct PsdMatrixHandle {
        int block = -1;
        std::string name;
        std::vector<std::vector<LinExpr>> entries;
    };
    /// decision PSD matrix; returned expressions are X(i, j) + shift on the diagonal
    PsdMatrixHandle new_psd_matrix(const std::string& name, int dim, double diag_shift = 0.0);

    void add_eq(const LinExpr& e, double rhs);
    void add_ge(const LinExpr& e, double rhs);  // e >= rhs via LP slack

    int add_scalar_sos(const std::string& name, const DecisionPoly& target,
                       const std::vector<Monomial>& basis_override = {});
    /// `support_hint` widens the per-entry supports used for Gram basis
    /// selection; alternation passes the declared shape here so that a frozen
    /// polynomial with collapsed support still compiles against the bases the
    /// full program would use.
    int add_matrix_sos(const std::string& name, const DecisionMatrix& target,
                       const PolyMatrix* support_hint = nullptr);

    /// minimize the expression (on top of any Gram trace regularization)
    void add_objective(const LinExpr& e);
    /// add reg * sum of traces of every Gram block declared so far and later
    void set_gram_trace_regularization(double reg) { gram_reg_ = reg; }

    const SdpProblem& problem() const { return prob_; }
    SdpProblem& problem() { return prob_; }

    struct Result {
        SdpSolution sdp;
        bool feasible() const { return sdp.ok(); }
    };
    Result solve(const SolverConfig& cfg = {});

    // --- extraction from a solved program ---
    double value(const LinExpr& e, const SdpSolution& sol) const;
    Polynomial value(const DecisionPoly& p, const SdpSolution& sol, double prune_tol = 0.0) const;
    PolyMatrix value(const DecisionMatrix& m, const SdpSolution& sol, double prune_tol = 0.0) const;
    SosCertificate certificate(int sos_index, const SdpSolution& sol) const;
    /// numeric target instance of a compiled constraint under the solution
    DecisionMatrix target_of(int sos_index) const { return compiled_[sos_index].target; }
    const std::string& sos_name(int sos_index) const { return compiled_[sos_index].name; }
    int sos_count() const { return static_cast<int>(compiled_.size()); }
    /// verify every compiled constraint independently of solver claims
    std::vector<SosReport> verify_all(const SdpSolution& sol) const;

private:
    struct Compiled {
        std::string name;
        int rows = 1;
        DecisionMatrix target;
        struct Gram {
            int block = -1;
            std::vector<std::pair<int, Monomial>> basis;
        };
        std::vector<Gram> grams;
    };

    std::string unique(const std::string& base);
    void emit(const LinExpr& e, double rhs);  // equality e = rhs
    int compile_sos_internal(const std::string& name, const DecisionMatrix& target,
                             const std::vector<Monomial>& basis_override,
                             const PolyMatrix* support_hint = nullptr);

    SdpProblem prob_;
    std::vector<Compiled> compiled_;
    std::map<std::string, int> name_count_;
    LinExpr objective_;
    double gram_reg_ = 0.0;
};

/// Standalone compilation fragments in the shape the spec describes; both
/// return a self-contained problem consisting of the Gram block(s) and the
/// coefficient-matching equalities of this one constraint.
SdpProblem compile_scalar_sos(const SosConstraint& c);
SdpProblem compile_matrix_sos(const SosConstraint& c);

/// Exact re-expansion check of a certificate against a numeric target:
/// PASS iff residual <= 1e-6 * (1 + max-abs target coefficient) and the Gram
/// min eigenvalue is >= -1e-7.
SosReport verify_certificate(const Polynomial& target, const SosCertificate& cert);
SosReport verify_certificate(const PolyMatrix& target, const SosCertificate& cert);

/// basis^T Gram basis expanded back into a polynomial matrix (the certified
/// sum of squares the certificate actually proves)
PolyMatrix sos_expansion(const SosCertificate& cert, int rows, int nvars);

}  // namespace polyctl

#endif
