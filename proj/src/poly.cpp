#include "polyctl/poly.hpp"

#include <algorithm>
#include <sstream>

namespace polyctl {

std::string Monomial::str(const std::vector<std::string>& names) const {
    std::ostringstream os;
    bool any = false;
    for (int i = 0; i < nvars(); ++i) {
        if (exponents[i] == 0) continue;
        if (any) os << "*";
        if (i < static_cast<int>(names.size()))
            os << names[i];
        else
            os << "x" << (i + 1);
        if (exponents[i] > 1) os << "^" << exponents[i];
        any = true;
    }
    if (!any) os << "1";
    return os.str();
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial variable count mismatch");
    Polynomial r = *this;
    for (auto& [m, c] : o.terms_) r.add_term(m, c);
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial variable count mismatch");
    Polynomial r = *this;
    for (auto& [m, c] : o.terms_) r.add_term(m, -c);
    return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("polynomial variable count mismatch");
    Polynomial r(nvars_);
    for (auto& [ma, ca] : terms_)
        for (auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r(nvars_);
    if (s == 0.0) return r;
    for (auto& [m, c] : terms_) r.add_term(m, c * s);
    return r;
}

double Polynomial::eval(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != nvars_)
        throw std::invalid_argument("evaluation point dimension mismatch");
    double total = 0.0;
    for (auto& [m, c] : terms_) {
        double v = c;
        for (int i = 0; i < nvars_; ++i) {
            int e = m.exponents[i];
            if (e == 0) continue;
            double xi = point[i];
            // small integer powers dominate here; keep it branch-simple
            double p = 1.0;
            for (int k = 0; k < e; ++k) p *= xi;
            v *= p;
        }
        total += v;
    }
    return total;
}

Polynomial Polynomial::derivative(int var) const {
    if (var < 0 || var >= nvars_) throw std::invalid_argument("derivative variable out of range");
    Polynomial r(nvars_);
    for (auto& [m, c] : terms_) {
        int e = m.exponents[var];
        if (e == 0) continue;
        Monomial d = m;
        d.exponents[var] -= 1;
        r.add_term(std::move(d), c * e);
    }
    return r;
}

Polynomial Polynomial::pruned(double tol) const {
    Polynomial r(nvars_);
    for (auto& [m, c] : terms_)
        if (std::abs(c) > tol) r.add_term(m, c);
    return r;
}

Polynomial Polynomial::lifted(int new_nvars, std::span<const int> var_map) const {
    if (static_cast<int>(var_map.size()) != nvars_) throw std::invalid_argument("lift map size mismatch");
    Polynomial r(new_nvars);
    for (auto& [m, c] : terms_) {
        Monomial nm = Monomial::unit(new_nvars);
        for (int i = 0; i < nvars_; ++i) {
            if (m.exponents[i] == 0) continue;
            int j = var_map[i];
            if (j < 0 || j >= new_nvars) throw std::invalid_argument("lift map entry out of range");
            nm.exponents[j] += m.exponents[i];
        }
        r.add_term(std::move(nm), c);
    }
    return r;
}

Polynomial Polynomial::substituted(int var, double value) const {
    if (var < 0 || var >= nvars_) throw std::invalid_argument("substitution variable out of range");
    Polynomial r(nvars_);
    for (auto& [m, c] : terms_) {
        int e = m.exponents[var];
        double f = 1.0;
        for (int k = 0; k < e; ++k) f *= value;
        if (f == 0.0 && e > 0) continue;
        Monomial nm = m;
        nm.exponents[var] = 0;
        r.add_term(std::move(nm), c * f);
    }
    return r;
}

std::string Polynomial::str(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        double c = it->second;
        if (!first) os << (c >= 0 ? " + " : " - ");
        else if (c < 0) os << "-";
        double a = std::abs(c);
        if (it->first.is_constant())
            os << a;
        else {
            if (a != 1.0) os << a << "*";
            os << it->first.str(names);
        }
        first = false;
    }
    return os.str();
}

PolyMatrix PolyMatrix::transpose() const {
    PolyMatrix r(cols, rows, nvars());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) r.at(j, i) = at(i, j);
    return r;
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& o) const {
    if (rows != o.rows || cols != o.cols) throw std::invalid_argument("matrix dimension mismatch");
    PolyMatrix r = *this;
    for (std::size_t i = 0; i < entries.size(); ++i) r.entries[i] += o.entries[i];
    return r;
}

PolyMatrix PolyMatrix::operator-(const PolyMatrix& o) const {
    if (rows != o.rows || cols != o.cols) throw std::invalid_argument("matrix dimension mismatch");
    PolyMatrix r = *this;
    for (std::size_t i = 0; i < entries.size(); ++i) r.entries[i] -= o.entries[i];
    return r;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& o) const {
    if (cols != o.rows) throw std::invalid_argument("matrix dimension mismatch");
    PolyMatrix r(rows, o.cols, nvars());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < o.cols; ++j) {
            Polynomial s(nvars());
            for (int k = 0; k < cols; ++k) s += at(i, k) * o.at(k, j);
            r.at(i, j) = std::move(s);
        }
    return r;
}

PolyMatrix PolyMatrix::scaled(const Polynomial& s) const {
    PolyMatrix r = *this;
    for (auto& e : r.entries) e = e * s;
    return r;
}

std::vector<Polynomial> PolyMatrix::apply(std::span<const Polynomial> v) const {
    if (static_cast<int>(v.size()) != cols) throw std::invalid_argument("matrix-vector dimension mismatch");
    std::vector<Polynomial> r(rows, Polynomial::zero(nvars()));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) r[i] += at(i, j) * v[j];
    return r;
}

Eigen::MatrixXd PolyMatrix::eval(std::span<const double> point) const {
    Eigen::MatrixXd r(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) r(i, j) = at(i, j).eval(point);
    return r;
}

bool PolyMatrix::is_symmetric(double tol) const {
    if (rows != cols) return false;
    for (int i = 0; i < rows; ++i)
        for (int j = i + 1; j < cols; ++j) {
            Polynomial d = at(i, j) - at(j, i);
            if (d.max_abs_coeff() > tol) return false;
        }
    return true;
}

double PolyMatrix::max_abs_coeff() const {
    double r = 0.0;
    for (auto& e : entries) r = std::max(r, e.max_abs_coeff());
    return r;
}

void FunctionLibrary::validate() const {
    if (nstate <= 0) throw std::invalid_argument("library: state dimension must be positive");
    if (Z.empty()) throw std::invalid_argument("library: Z must be nonempty");
    for (auto& z : Z) {
        if (z.nvars() != nstate) throw std::invalid_argument("library: Z entry variable count mismatch");
        if (z.coeff(Monomial::unit(nstate)) != 0.0)
            throw std::invalid_argument("library: Z must vanish at the origin");
    }
    if (W.rows <= 0 || W.cols <= 0) throw std::invalid_argument("library: W must be nonempty");
    if (W.cols != ninput) throw std::invalid_argument("library: W column count must equal input dimension");
    for (auto& w : W.entries)
        if (w.nvars() != nstate) throw std::invalid_argument("library: W entry variable count mismatch");
    if (has_zhat()) {
        if (!H) throw std::invalid_argument("library: Zhat given without factor H");
        if (H->rows != N() || H->cols != Nhat())
            throw std::invalid_argument("library: H dimensions must be N x Nhat");
        for (auto& z : Zhat) {
            if (z.nvars() != nstate) throw std::invalid_argument("library: Zhat entry variable count mismatch");
            if (z.coeff(Monomial::unit(nstate)) != 0.0)
                throw std::invalid_argument("library: Zhat must vanish at the origin");
        }
        std::vector<Polynomial> hz = H->apply(Zhat);
        for (int i = 0; i < N(); ++i) {
            Polynomial d = hz[i] - Z[i];
            if (d.max_abs_coeff() > 1e-12)
                throw std::invalid_argument("library: H * Zhat does not reproduce Z");
        }
    }
}

Eigen::VectorXd FunctionLibrary::eval_Z(std::span<const double> x) const {
    Eigen::VectorXd r(N());
    for (int i = 0; i < N(); ++i) r(i) = Z[i].eval(x);
    return r;
}

Eigen::MatrixXd FunctionLibrary::eval_W(std::span<const double> x) const { return W.eval(x); }

Eigen::VectorXd FunctionLibrary::eval_Zhat(std::span<const double> x) const {
    Eigen::VectorXd r(Nhat());
    for (int i = 0; i < Nhat(); ++i) r(i) = Zhat[i].eval(x);
    return r;
}

Eigen::VectorXd FunctionLibrary::stacked_regressor(std::span<const double> x,
                                                   std::span<const double> u) const {
    Eigen::VectorXd z = eval_Z(x);
    Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::VectorXd wu = eval_W(x) * uv;
    Eigen::VectorXd r(N() + M());
    r << z, wu;
    return r;
}

PolyMatrix jacobian(std::span<const Polynomial> v) {
    if (v.empty()) return PolyMatrix();
    int nvars = v.front().nvars();
    PolyMatrix r(static_cast<int>(v.size()), nvars, nvars);
    for (int i = 0; i < r.rows; ++i) {
        if (v[i].nvars() != nvars) throw std::invalid_argument("jacobian: mixed variable counts");
        for (int j = 0; j < nvars; ++j) r.at(i, j) = v[i].derivative(j);
    }
    return r;
}

std::vector<Polynomial> gradient_of_quadratic_form(std::span<const Polynomial> zhat,
                                                   const Eigen::MatrixXd& pinv) {
    int nh = static_cast<int>(zhat.size());
    if (pinv.rows() != nh || pinv.cols() != nh)
        throw std::invalid_argument("gradient_of_quadratic_form: dimension mismatch");
    if ((pinv - pinv.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + pinv.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("gradient_of_quadratic_form: Pinv must be symmetric");
    int nvars = zhat.front().nvars();
    // Pinv * Zhat as a polynomial vector
    std::vector<Polynomial> pz(nh, Polynomial::zero(nvars));
    for (int i = 0; i < nh; ++i)
        for (int j = 0; j < nh; ++j)
            if (pinv(i, j) != 0.0) pz[i] += zhat[j] * pinv(i, j);
    PolyMatrix jac = jacobian(zhat);
    std::vector<Polynomial> grad(nvars, Polynomial::zero(nvars));
    for (int v = 0; v < nvars; ++v)
        for (int i = 0; i < nh; ++i) grad[v] += jac.at(i, v) * pz[i] * 2.0;
    return grad;
}

Polynomial norm_square_power(int nvars, int first, int count, int k) {
    if (first < 0 || first + count > nvars) throw std::invalid_argument("norm_square_power: range out of bounds");
    Polynomial sq(nvars);
    for (int i = 0; i < count; ++i) {
        Monomial m = Monomial::unit(nvars);
        m.exponents[first + i] = 2;
        sq.add_term(std::move(m), 1.0);
    }
    Polynomial r = Polynomial::constant(nvars, 1.0);
    for (int i = 0; i < k; ++i) r = r * sq;
    return r;
}

}  // namespace polyctl
