#ifndef POLYCTL_CONSISTENCY_HPP
#define POLYCTL_CONSISTENCY_HPP

#include <vector>

#include <Eigen/Dense>

#include "polyctl/data.hpp"
#include "polyctl/sdp.hpp"

namespace polyctl {

/// Per-sample quadric data Ci = xdot xdot^T - delta I, Bi = -zi xdot^T,
/// Ai = zi zi^T for the stacked regressor zi = (Z(xi), W(xi) ui).
struct SampleQuadric {
    Eigen::MatrixXd Ci;  // n x n
    Eigen::MatrixXd Bi;  // (N+M) x n
    Eigen::MatrixXd Ai;  // (N+M) x (N+M), PSD rank <= 1
};

/// Matrix ellipsoid over-approximating the set of data-consistent (A, B):
/// all zeta with B^T A^-1 B + B^T zeta + zeta^T B + zeta^T A zeta <= I,
/// equivalently zeta = zeta_bar + Abar^{-1/2} Upsilon Qbar^{1/2}, |Upsilon| <= 1.
struct EllipsoidModel {
    Eigen::MatrixXd Abar;      // (N+M) x (N+M), positive definite
    Eigen::MatrixXd Bbar;      // (N+M) x n
    Eigen::MatrixXd zeta_bar;  // (N+M) x n
    Eigen::MatrixXd Qbar;      // n x n, identity
    Eigen::VectorXd taus;      // T multipliers, all >= 0
    double log_det = 0.0;
    std::string dataset_hash;
    std::string config_hash;

    int q() const { return static_cast<int>(Abar.rows()); }
    int n() const { return static_cast<int>(Qbar.rows()); }
    void validate() const;

    Eigen::MatrixXd Abar_inv_sqrt() const;
    Eigen::MatrixXd Abar_sqrt() const;
};

struct RankReport {
    bool full_row_rank = false;
    Eigen::VectorXd singular_values;
};

std::vector<SampleQuadric> build_sample_quadrics(const Dataset& ds, const FunctionLibrary& lib);

class OverapproximationError : public std::runtime_error {
public:
    explicit OverapproximationError(const std::string& w) : std::runtime_error(w) {}
};

/// Solve the max-det program for (Abar, Bbar, taus) and derive
/// zeta_bar = -Abar^{-1} Bbar, Qbar = I. Throws OverapproximationError when
/// the program is infeasible (rank-deficient regressors; collect more data so
/// that [Z0; W0] has full row rank) or the solver fails.
EllipsoidModel solve_overapproximation(const std::vector<SampleQuadric>& quadrics, int nstate,
                                       const SolverConfig& cfg = {});

/// Exact per-sample consistency: |xdot_i - AB zi|^2 <= delta + 1e-9 for all i.
bool membership_exact(const Eigen::MatrixXd& AB, const Dataset& ds, const FunctionLibrary& lib);

/// Ellipsoid membership of AB = zeta^T with tolerance scaled by the model
/// magnitude.
bool membership_ellipsoid(const Eigen::MatrixXd& AB, const EllipsoidModel& model);
double membership_ellipsoid_margin(const Eigen::MatrixXd& AB, const EllipsoidModel& model);

/// SVD rank diagnostic of the stacked regressor matrix [Z0; W0].
RankReport rank_check(const Dataset& ds, const FunctionLibrary& lib);

}  // namespace polyctl

#endif
