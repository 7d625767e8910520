#ifndef POLYCTL_SDP_HPP
#define POLYCTL_SDP_HPP

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polyctl {

/// Standard-form semidefinite program: minimize a linear objective over PSD
/// matrix blocks and scalar variables subject to sparse linear equalities.
/// Scalars are free unless a lower bound is declared.
struct SdpProblem {
    struct PsdBlock {
        std::string name;
        int dim = 0;
    };
    struct ScalarVar {
        std::string name;
        std::optional<double> lower;
    };
    /// Coefficient on a PSD block entry. (row, col) with row <= col refers to
    /// the symmetric pair: for row < col the term contributes
    /// coef * (X_rc + X_cr) = 2 coef * X_rc.
    struct BlockTerm {
        int block = 0;
        int row = 0, col = 0;
        double coef = 0.0;
    };
    struct ScalarTerm {
        int var = 0;
        double coef = 0.0;
    };
    struct Equality {
        std::vector<BlockTerm> blocks;
        std::vector<ScalarTerm> scalars;
        double rhs = 0.0;
    };

    std::vector<PsdBlock> blocks;
    std::vector<ScalarVar> scalars;
    std::vector<Equality> equalities;
    std::vector<BlockTerm> obj_blocks;   // minimized
    std::vector<ScalarTerm> obj_scalars;
    std::optional<int> maxdet_block;     // special log-det objective marker

    int add_block(const std::string& name, int dim) {
        if (dim < 1) throw std::invalid_argument("PSD block dimension must be >= 1");
        blocks.push_back({name, dim});
        return static_cast<int>(blocks.size()) - 1;
    }
    int add_scalar(const std::string& name, std::optional<double> lower = std::nullopt) {
        scalars.push_back({name, lower});
        return static_cast<int>(scalars.size()) - 1;
    }
    void add_equality(Equality eq) { equalities.push_back(std::move(eq)); }

    void validate() const;

    /// Sparse text dump, one line per nonzero:
    ///   constraint-id block-id row col value
    /// with constraint-id 0 for the objective and scalar terms under
    /// block-id -1 (row = scalar index).
    void dump(std::ostream& os) const;
};

struct SolverConfig {
    double eq_tol = 1e-6;        // absolute equality residual accepted on output
    double psd_tol = 1e-7;       // accepted min eigenvalue (normalized) on output
    double gap_tol = 1e-8;       // relative duality gap target
    double feas_tol = 1e-9;      // relative primal/dual residual target
    int max_iters = 100;
    double maxdet_tol = 1e-4;    // |log det| change stopping threshold
    int maxdet_max_iters = 30;
    bool verbose = false;
};

struct SdpSolution {
    enum class Status { optimal, feasible, infeasible, numerical_failure };
    Status status = Status::numerical_failure;
    std::map<std::string, Eigen::MatrixXd> block_values;
    std::map<std::string, double> scalar_values;
    double objective_value = 0.0;

    // independently recomputed diagnostics (never the solver's own claims)
    double max_eq_residual = 0.0;
    double min_block_eig = 0.0;   // after normalizing each block by its max-abs entry
    int iterations = 0;
    double log_det = 0.0;         // set by solve_maxdet
    std::string message;

    bool ok() const { return status == Status::optimal || status == Status::feasible; }
};

const char* to_string(SdpSolution::Status s);

/// Interior-point solve of the standard-form problem. The returned status is
/// certified against the configured tolerances by independent residual
/// recomputation.
SdpSolution solve(const SdpProblem& problem, const SolverConfig& cfg = {});

/// Stationary point of -log det over the named block, found by iteratively
/// maximizing the linearization trace(Xk^{-1} X); the initial point comes from
/// a feasibility solve maximizing trace(X). The log-det sequence is kept
/// non-decreasing by a backtracking line search between consecutive iterates.
SdpSolution solve_maxdet(const SdpProblem& problem, const SolverConfig& cfg = {});

}  // namespace polyctl

#endif
