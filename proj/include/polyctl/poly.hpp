#ifndef POLYCTL_POLY_HPP
#define POLYCTL_POLY_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polyctl {

/// Exponent vector of a single monomial, one entry per variable.
/// Ordering is graded lexicographic so that term maps have a total,
/// deterministic order.
struct Monomial {
    std::vector<int> exponents;

    Monomial() = default;
    explicit Monomial(std::vector<int> e) : exponents(std::move(e)) {}
    static Monomial unit(int nvars) { return Monomial(std::vector<int>(nvars, 0)); }

    int nvars() const { return static_cast<int>(exponents.size()); }
    int degree() const {
        int d = 0;
        for (int e : exponents) d += e;
        return d;
    }
    bool is_constant() const { return degree() == 0; }

    Monomial operator*(const Monomial& o) const {
        if (nvars() != o.nvars()) throw std::invalid_argument("monomial variable count mismatch");
        Monomial r = *this;
        for (int i = 0; i < nvars(); ++i) r.exponents[i] += o.exponents[i];
        return r;
    }

    bool operator==(const Monomial& o) const = default;

    // graded lex: compare total degree first, then exponents left to right
    bool operator<(const Monomial& o) const {
        int da = degree(), db = o.degree();
        if (da != db) return da < db;
        return exponents < o.exponents;
    }

    std::string str(const std::vector<std::string>& names = {}) const;
};

/// Sparse multivariate polynomial with double coefficients over a fixed
/// number of variables. Zero coefficients are never stored; the zero
/// polynomial is an empty term map with a declared variable count.
class Polynomial {
public:
    Polynomial() : nvars_(0) {}
    explicit Polynomial(int nvars) : nvars_(nvars) {
        if (nvars < 0) throw std::invalid_argument("negative variable count");
    }

    static Polynomial zero(int nvars) { return Polynomial(nvars); }
    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        p.add_term(Monomial::unit(nvars), c);
        return p;
    }
    static Polynomial variable(int nvars, int i) {
        if (i < 0 || i >= nvars) throw std::invalid_argument("variable index out of range");
        Polynomial p(nvars);
        Monomial m = Monomial::unit(nvars);
        m.exponents[i] = 1;
        p.add_term(m, 1.0);
        return p;
    }
    static Polynomial monomial(Monomial m, double c) {
        Polynomial p(m.nvars());
        p.add_term(std::move(m), c);
        return p;
    }

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const {  // degree of the zero polynomial is 0 by convention
        return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
    }
    int min_degree() const {
        return terms_.empty() ? 0 : terms_.begin()->first.degree();
    }
    std::size_t term_count() const { return terms_.size(); }
    const std::map<Monomial, double>& terms() const { return terms_; }

    double coeff(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? 0.0 : it->second;
    }
    double max_abs_coeff() const {
        double r = 0.0;
        for (auto& [m, c] : terms_) r = std::max(r, std::abs(c));
        return r;
    }

    void add_term(Monomial m, double c) {
        if (m.nvars() != nvars_) throw std::invalid_argument("monomial variable count mismatch");
        if (c == 0.0) return;
        auto [it, fresh] = terms_.emplace(std::move(m), c);
        if (!fresh) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial operator-() const { return *this * -1.0; }
    Polynomial& operator+=(const Polynomial& o) { return *this = *this + o; }
    Polynomial& operator-=(const Polynomial& o) { return *this = *this - o; }

    double eval(std::span<const double> point) const;
    Polynomial derivative(int var) const;

    /// Drop terms with |coeff| <= tol (used when freezing solver output).
    Polynomial pruned(double tol) const;

    /// Reinterpret over a larger variable set; variable i maps to var_map[i].
    Polynomial lifted(int new_nvars, std::span<const int> var_map) const;

    /// Partial evaluation: variables with a set value are substituted and
    /// removed is not done -- the result keeps the same variable count.
    Polynomial substituted(int var, double value) const;

    std::string str(const std::vector<std::string>& names = {}) const;

private:
    int nvars_;
    std::map<Monomial, double> terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// Dense grid of polynomials.
struct PolyMatrix {
    int rows = 0, cols = 0;
    std::vector<Polynomial> entries;  // row-major

    PolyMatrix() = default;
    PolyMatrix(int r, int c, int nvars)
        : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c, Polynomial::zero(nvars)) {}

    static PolyMatrix identity(int n, int nvars) {
        PolyMatrix m(n, n, nvars);
        for (int i = 0; i < n; ++i) m.at(i, i) = Polynomial::constant(nvars, 1.0);
        return m;
    }
    static PolyMatrix from_numeric(const Eigen::MatrixXd& a, int nvars) {
        PolyMatrix m(static_cast<int>(a.rows()), static_cast<int>(a.cols()), nvars);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j)
                if (a(i, j) != 0.0) m.at(i, j) = Polynomial::constant(nvars, a(i, j));
        return m;
    }

    Polynomial& at(int i, int j) { return entries[static_cast<std::size_t>(i) * cols + j]; }
    const Polynomial& at(int i, int j) const { return entries[static_cast<std::size_t>(i) * cols + j]; }

    int nvars() const { return entries.empty() ? 0 : entries.front().nvars(); }

    PolyMatrix transpose() const;
    PolyMatrix operator+(const PolyMatrix& o) const;
    PolyMatrix operator-(const PolyMatrix& o) const;
    PolyMatrix operator*(const PolyMatrix& o) const;
    PolyMatrix scaled(const Polynomial& s) const;

    std::vector<Polynomial> apply(std::span<const Polynomial> v) const;
    Eigen::MatrixXd eval(std::span<const double> point) const;

    bool is_symmetric(double tol = 0.0) const;
    double max_abs_coeff() const;
};

/// Monomial libraries Z, W (and optionally Zhat with factor H) describing the
/// control-affine structure xdot = A Z(x) + B W(x) u. All entries are
/// polynomials in the state variables only.
struct FunctionLibrary {
    int nstate = 0;   // n
    int ninput = 0;   // m, number of input channels (columns of W)
    std::vector<Polynomial> Z;            // N entries
    PolyMatrix W;                         // M x m
    std::vector<Polynomial> Zhat;         // optional, Nhat entries
    std::optional<PolyMatrix> H;          // N x Nhat with Z = H * Zhat

    int N() const { return static_cast<int>(Z.size()); }
    int M() const { return W.rows; }
    int Nhat() const { return static_cast<int>(Zhat.size()); }
    bool has_zhat() const { return !Zhat.empty(); }

    /// Throws std::invalid_argument on any violated structural assumption:
    /// Z(0) = 0, consistent dimensions, and (when given) Z = H * Zhat
    /// coefficientwise within 1e-12.
    void validate() const;

    Eigen::VectorXd eval_Z(std::span<const double> x) const;
    Eigen::MatrixXd eval_W(std::span<const double> x) const;
    Eigen::VectorXd eval_Zhat(std::span<const double> x) const;

    /// Stacked regressor (Z(x), W(x) u) of size N + M.
    Eigen::VectorXd stacked_regressor(std::span<const double> x, std::span<const double> u) const;
};

/// Jacobian of a polynomial vector: entry (i, j) = d v_i / d x_j.
PolyMatrix jacobian(std::span<const Polynomial> v);

/// Gradient of V(x) = Zhat(x)^T Pinv Zhat(x), returned as the polynomial
/// vector 2 (dZhat/dx)^T Pinv Zhat.
std::vector<Polynomial> gradient_of_quadratic_form(std::span<const Polynomial> zhat,
                                                   const Eigen::MatrixXd& pinv);

/// (sum_i x_i^2)^k over the first `nsquared` of `nvars` variables; the
/// building block of the comparison functions alpha(|x|).
Polynomial norm_square_power(int nvars, int first, int count, int k);

}  // namespace polyctl

#endif
