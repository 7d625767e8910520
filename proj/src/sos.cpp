#include "polyctl/sos.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <fstream>
#include <cstdio>
#include <cstdlib>

namespace polyctl {

LinExpr& LinExpr::operator+=(const LinExpr& o) {
    c += o.c;
    for (auto& [v, k] : o.scalars) {
        double& t = scalars[v];
        t += k;
        if (t == 0.0) scalars.erase(v);
    }
    for (auto& [b, k] : o.blocks) {
        double& t = blocks[b];
        t += k;
        if (t == 0.0) blocks.erase(b);
    }
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) { return *this += LinExpr(o) *= -1.0; }

LinExpr& LinExpr::operator*=(double s) {
    if (s == 0.0) return *this = LinExpr();
    c *= s;
    for (auto& [v, k] : scalars) k *= s;
    for (auto& [b, k] : blocks) k *= s;
    return *this;
}

bool DecisionPoly::is_zero() const { return terms_.empty(); }

bool DecisionPoly::is_numeric() const {
    for (auto& [m, e] : terms_)
        if (!e.is_constant()) return false;
    return true;
}

Polynomial DecisionPoly::to_polynomial() const {
    Polynomial p(nvars_);
    for (auto& [m, e] : terms_) {
        if (!e.is_constant()) throw std::logic_error("decision poly is not numeric");
        p.add_term(m, e.c);
    }
    return p;
}

DecisionPoly DecisionPoly::derivative(int var) const {
    if (var < 0 || var >= nvars_) throw std::invalid_argument("derivative variable out of range");
    DecisionPoly r(nvars_);
    for (auto& [m, e] : terms_) {
        int ex = m.exponents[var];
        if (ex == 0) continue;
        Monomial d = m;
        d.exponents[var] -= 1;
        r.add_term(d, LinExpr(e) *= static_cast<double>(ex));
    }
    return r;
}

DecisionPoly DecisionPoly::lifted(int new_nvars, std::span<const int> var_map) const {
    if (static_cast<int>(var_map.size()) != nvars_) throw std::invalid_argument("lift map size mismatch");
    DecisionPoly r(new_nvars);
    for (auto& [m, e] : terms_) {
        Monomial nm = Monomial::unit(new_nvars);
        for (int i = 0; i < nvars_; ++i) {
            if (m.exponents[i] == 0) continue;
            nm.exponents[var_map[i]] += m.exponents[i];
        }
        r.add_term(nm, e);
    }
    return r;
}

void DecisionPoly::add_term(const Monomial& m, const LinExpr& e) {
    if (m.nvars() != nvars_) throw std::invalid_argument("decision poly variable count mismatch");
    if (e.is_zero()) return;
    auto [it, fresh] = terms_.emplace(m, e);
    if (!fresh) {
        it->second += e;
        if (it->second.is_zero()) terms_.erase(it);
    }
}

DecisionPoly DecisionPoly::operator+(const DecisionPoly& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("decision poly variable count mismatch");
    DecisionPoly r = *this;
    for (auto& [m, e] : o.terms_) r.add_term(m, e);
    return r;
}

DecisionPoly DecisionPoly::operator-(const DecisionPoly& o) const { return *this + (-o); }

DecisionPoly DecisionPoly::operator-() const {
    DecisionPoly r(nvars_);
    for (auto& [m, e] : terms_) r.terms_[m] = LinExpr(e) *= -1.0;
    return r;
}

DecisionPoly DecisionPoly::operator*(double s) const {
    DecisionPoly r(nvars_);
    if (s == 0.0) return r;
    for (auto& [m, e] : terms_) r.terms_[m] = LinExpr(e) *= s;
    return r;
}

DecisionPoly DecisionPoly::operator*(const Polynomial& p) const {
    if (nvars_ != p.nvars()) throw std::invalid_argument("decision poly variable count mismatch");
    DecisionPoly r(nvars_);
    for (auto& [m, e] : terms_)
        for (auto& [mp, cp] : p.terms()) r.add_term(m * mp, LinExpr(e) *= cp);
    return r;
}

int DecisionPoly::max_degree() const {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

DecisionPoly scale_poly(const Polynomial& p, const LinExpr& e) {
    DecisionPoly r(p.nvars());
    for (auto& [m, c] : p.terms()) r.add_term(m, LinExpr(e) *= c);
    return r;
}

namespace {

void enumerate_monomials(int nvars, int maxdeg, std::vector<Monomial>& out) {
    // graded order, lexicographic within a degree
    std::vector<int> e(nvars, 0);
    std::vector<Monomial> all;
    // generate all exponent vectors with sum <= maxdeg recursively
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == nvars) {
            all.emplace_back(e);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            e[pos] = k;
            rec(pos + 1, remaining - k);
        }
        e[pos] = 0;
    };
    rec(0, maxdeg);
    std::sort(all.begin(), all.end());
    out = std::move(all);
}

}  // namespace

std::vector<Monomial> gram_basis_for(int target_degree, int variables, BasisStructure structure) {
    if (target_degree < 0 || target_degree % 2 != 0)
        throw std::invalid_argument("SOS target degree must be even and nonnegative");
    std::vector<Monomial> all;
    enumerate_monomials(variables, target_degree / 2, all);
    if (structure == BasisStructure::even_only) {
        std::erase_if(all, [](const Monomial& m) { return m.degree() == 0; });
    }
    return all;
}

std::string SosProgram::unique(const std::string& base) {
    int& n = name_count_[base];
    ++n;
    if (n == 1) return base;
    std::ostringstream os;
    os << base << "#" << n;
    return os.str();
}

DecisionPoly SosProgram::new_poly(const std::string& name, int nvars,
                                  const std::vector<Monomial>& monomials) {
    DecisionPoly p(nvars);
    for (auto& m : monomials) {
        std::ostringstream os;
        os << name << "[" << m.str() << "]";
        int id = prob_.add_scalar(unique(os.str()));
        p.add_term(m, LinExpr::var(id));
    }
    return p;
}

SosProgram::PsdMatrixHandle SosProgram::new_psd_matrix(const std::string& name, int dim,
                                                       double diag_shift) {
    PsdMatrixHandle h;
    h.name = unique(name);
    h.block = prob_.add_block(h.name, dim);
    h.entries.assign(dim, std::vector<LinExpr>(dim));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            h.entries[i][j] = LinExpr::block_entry(h.block, i, j);
            if (i == j) h.entries[i][j] += LinExpr(diag_shift);
        }
    return h;
}

void SosProgram::emit(const LinExpr& e, double rhs) {
    SdpProblem::Equality eq;
    eq.rhs = rhs - e.c;
    for (auto& [v, k] : e.scalars) eq.scalars.push_back({v, k});
    for (auto& [brc, k] : e.blocks) {
        auto [b, r, c] = brc;
        eq.blocks.push_back({b, r, c, r == c ? k : k / 2.0});
    }
    prob_.add_equality(std::move(eq));
}

void SosProgram::add_eq(const LinExpr& e, double rhs) { emit(e, rhs); }

void SosProgram::add_ge(const LinExpr& e, double rhs) {
    int slack = prob_.add_scalar(unique("slack"), 0.0);
    LinExpr ee = e;
    ee -= LinExpr::var(slack);
    emit(ee, rhs);
}

namespace {

struct RowFilter {
    bool empty = true;
    int mindeg = 0, maxdeg = 0;
    std::vector<int> varmax;
};

// Basis construction shared by scalar and matrix SOS compilation. Rows of the
// (possibly 1x1) symmetric target are analyzed for
//   - a global sign-flip symmetry (variables negated, rows recolored), which
//     splits the Gram into two parity blocks, and
//   - degree intervals and per-variable degree caps taken from the diagonal
//     supports, which bound any Gram representation of any instance.
struct BasisPlan {
    bool parity_ok = false;
    std::vector<int> sigma;                 // row colors
    std::vector<RowFilter> filters;         // per row, from the diagonal entry
    std::vector<std::vector<std::pair<int, Monomial>>> classes;  // 1 or 2 Gram bases
};

BasisPlan plan_basis(const DecisionMatrix& tgt, int nvars, const PolyMatrix* hint) {
    const int rows = static_cast<int>(tgt.size());
    BasisPlan plan;
    plan.sigma.assign(rows, -1);
    plan.filters.assign(rows, RowFilter{});

    // per-entry supports, widened by the hint when given
    auto entry_monomials = [&](int i, int j, auto&& fn) {
        for (auto& [m, e] : tgt[i][j].terms()) fn(m);
        if (hint)
            for (auto& [m, c] : hint->at(i, j).terms()) fn(m);
    };

    // per-entry parity, -1 unknown, 2 mixed
    std::vector<std::vector<int>> par(rows, std::vector<int>(rows, -1));
    bool mixed = false;
    for (int i = 0; i < rows; ++i)
        for (int j = i; j < rows; ++j) {
            entry_monomials(i, j, [&](const Monomial& m) {
                int p = m.degree() % 2;
                if (par[i][j] == -1) par[i][j] = p;
                else if (par[i][j] != p) { par[i][j] = 2; mixed = true; }
            });
            par[j][i] = par[i][j];
        }

    if (!mixed) {
        // 2-color rows with sigma_i + sigma_j = parity(i,j) mod 2
        plan.parity_ok = true;
        for (int s = 0; s < rows && plan.parity_ok; ++s) {
            if (plan.sigma[s] != -1) continue;
            plan.sigma[s] = 0;
            std::vector<int> stack{s};
            while (!stack.empty() && plan.parity_ok) {
                int i = stack.back();
                stack.pop_back();
                for (int j = 0; j < rows; ++j) {
                    if (par[i][j] < 0 || par[i][j] > 1) continue;
                    int want = (plan.sigma[i] + par[i][j]) % 2;
                    if (plan.sigma[j] == -1) {
                        plan.sigma[j] = want;
                        stack.push_back(j);
                    } else if (plan.sigma[j] != want) {
                        plan.parity_ok = false;
                        break;
                    }
                }
            }
        }
    }
    if (!plan.parity_ok) std::fill(plan.sigma.begin(), plan.sigma.end(), 0);

    for (int i = 0; i < rows; ++i) {
        RowFilter& f = plan.filters[i];
        f.varmax.assign(nvars, 0);
        entry_monomials(i, i, [&](const Monomial& m) {
            int d = m.degree();
            if (f.empty) {
                f.mindeg = f.maxdeg = d;
                f.empty = false;
            } else {
                f.mindeg = std::min(f.mindeg, d);
                f.maxdeg = std::max(f.maxdeg, d);
            }
            for (int v = 0; v < nvars; ++v) f.varmax[v] = std::max(f.varmax[v], m.exponents[v]);
        });
    }

    int nclasses = plan.parity_ok ? 2 : 1;
    plan.classes.assign(nclasses, {});
    int global_half = 0;
    for (auto& f : plan.filters)
        if (!f.empty) global_half = std::max(global_half, f.maxdeg / 2);
    std::vector<Monomial> cands;
    enumerate_monomials(nvars, global_half, cands);
    for (int i = 0; i < rows; ++i) {
        const RowFilter& f = plan.filters[i];
        if (f.empty) continue;  // zero diagonal forces a zero Gram row
        for (auto& m : cands) {
            int d2 = 2 * m.degree();
            if (d2 < f.mindeg || d2 > f.maxdeg) continue;
            bool ok = true;
            for (int v = 0; v < nvars && ok; ++v)
                if (2 * m.exponents[v] > f.varmax[v]) ok = false;
            if (!ok) continue;
            int cls = plan.parity_ok ? (m.degree() + plan.sigma[i]) % 2 : 0;
            plan.classes[cls].push_back({i, m});
        }
    }
    return plan;
}

}  // namespace

int SosProgram::add_scalar_sos(const std::string& name, const DecisionPoly& target,
                               const std::vector<Monomial>& basis_override) {
    DecisionMatrix m(1, std::vector<DecisionPoly>(1, target));
    return compile_sos_internal(name, m, basis_override);
}

int SosProgram::add_matrix_sos(const std::string& name, const DecisionMatrix& target,
                               const PolyMatrix* support_hint) {
    const int rows = static_cast<int>(target.size());
    for (auto& r : target)
        if (static_cast<int>(r.size()) != rows)
            throw std::invalid_argument("matrix SOS target must be square");
    auto dp_scale = [](const DecisionPoly& p) {
        double m = 0.0;
        for (auto& [mon, e] : p.terms()) {
            m = std::max(m, std::abs(e.c));
            for (auto& [v, k] : e.scalars) m = std::max(m, std::abs(k));
            for (auto& [bl, k] : e.blocks) m = std::max(m, std::abs(k));
        }
        return m;
    };
    for (int i = 0; i < rows; ++i)
        for (int j = i + 1; j < rows; ++j) {
            DecisionPoly d = target[i][j] - target[j][i];
            double scale = 1.0 + std::max(dp_scale(target[i][j]), dp_scale(target[j][i]));
            if (dp_scale(d) > 1e-10 * scale)
                throw std::invalid_argument("matrix SOS target must be symmetric");
        }
    if (support_hint && (support_hint->rows != rows || support_hint->cols != rows))
        throw std::invalid_argument("matrix SOS support hint dimension mismatch");
    return compile_sos_internal(name, target, {}, support_hint);
}

int SosProgram::compile_sos_internal(const std::string& name, const DecisionMatrix& target,
                                     const std::vector<Monomial>& basis_override,
                                     const PolyMatrix* support_hint) {
    const int rows = static_cast<int>(target.size());
    const int nvars = target[0][0].nvars();

    Compiled comp;
    comp.name = unique(name);
    comp.rows = rows;
    comp.target = target;

    std::vector<std::vector<std::pair<int, Monomial>>> classes;
    if (!basis_override.empty()) {
        if (rows != 1)
            throw std::invalid_argument("explicit Gram basis is only supported for scalar SOS");
        classes.push_back({});
        for (auto& m : basis_override) classes[0].push_back({0, m});
    } else {
        BasisPlan plan = plan_basis(target, nvars, support_hint);
        classes = std::move(plan.classes);
    }

    // key: (i, j, monomial) with i <= j — one coefficient-matching equality each
    std::map<std::tuple<int, int, Monomial>, std::vector<SdpProblem::BlockTerm>> keys;
    for (auto& basis : classes) {
        if (basis.empty()) continue;
        Compiled::Gram g;
        g.basis = basis;
        std::ostringstream os;
        os << comp.name << ".gram" << comp.grams.size();
        g.block = prob_.add_block(unique(os.str()), static_cast<int>(basis.size()));
        const int B = static_cast<int>(basis.size());
        for (int a = 0; a < B; ++a)
            for (int b = a; b < B; ++b) {
                int i = basis[a].first, j = basis[b].first;
                Monomial mu = basis[a].second * basis[b].second;
                auto key = std::make_tuple(std::min(i, j), std::max(i, j), std::move(mu));
                keys[key].push_back({g.block, a, b, 1.0});
            }
        comp.grams.push_back(std::move(g));
    }
    // make sure every target monomial has an equality, covered or not
    for (int i = 0; i < rows; ++i)
        for (int j = i; j < rows; ++j)
            for (auto& [m, e] : target[i][j].terms()) keys.try_emplace({i, j, m});

    for (auto& [key, gram_terms] : keys) {
        auto& [i, j, mu] = key;
        LinExpr t;
        auto it = target[i][j].terms().find(mu);
        if (it != target[i][j].terms().end()) t = it->second;
        if (i != j) t *= 2.0;
        if (gram_terms.empty() && t.is_constant() && t.c != 0.0 && !basis_override.empty())
            throw CompileError("Gram basis cannot express target monomial " + mu.str());
        if (gram_terms.empty() && std::getenv("POLYCTL_DEBUG_COVER") && !t.is_zero())
            std::fprintf(stderr, "[cover] %s key (%d,%d) %s const %g nvars %d\n", comp.name.c_str(),
                         i, j, mu.str().c_str(), t.c, static_cast<int>(t.scalars.size()));
        // sum of Gram pair contributions equals the target coefficient
        SdpProblem::Equality eq;
        eq.blocks = gram_terms;
        eq.rhs = t.c;
        for (auto& [v, k] : t.scalars) eq.scalars.push_back({v, -k});
        for (auto& [brc, k] : t.blocks) {
            auto [b, r, c] = brc;
            eq.blocks.push_back({b, r, c, r == c ? -k : -k / 2.0});
        }
        prob_.add_equality(std::move(eq));
    }

    compiled_.push_back(std::move(comp));
    return static_cast<int>(compiled_.size()) - 1;
}

void SosProgram::add_objective(const LinExpr& e) { objective_ += e; }

SosProgram::Result SosProgram::solve(const SolverConfig& cfg) {
    prob_.obj_blocks.clear();
    prob_.obj_scalars.clear();
    LinExpr obj = objective_;
    if (gram_reg_ != 0.0) {
        for (auto& comp : compiled_)
            for (auto& g : comp.grams)
                for (std::size_t d = 0; d < g.basis.size(); ++d)
                    obj += LinExpr::block_entry(g.block, static_cast<int>(d), static_cast<int>(d),
                                                gram_reg_);
    }
    for (auto& [v, k] : obj.scalars) prob_.obj_scalars.push_back({v, k});
    for (auto& [brc, k] : obj.blocks) {
        auto [b, r, c] = brc;
        prob_.obj_blocks.push_back({b, r, c, r == c ? k : k / 2.0});
    }
    if (const char* dump = std::getenv("POLYCTL_DUMP_SDP")) {
        static int counter = 0;
        std::ofstream f(std::string(dump) + "." + std::to_string(counter++));
        prob_.dump(f);
    }
    Result res;
    res.sdp = polyctl::solve(prob_, cfg);
    return res;
}

double SosProgram::value(const LinExpr& e, const SdpSolution& sol) const {
    double v = e.c;
    for (auto& [var, k] : e.scalars) v += k * sol.scalar_values.at(prob_.scalars[var].name);
    for (auto& [brc, k] : e.blocks) {
        auto [b, r, c] = brc;
        v += k * sol.block_values.at(prob_.blocks[b].name)(r, c);
    }
    return v;
}

Polynomial SosProgram::value(const DecisionPoly& p, const SdpSolution& sol, double prune_tol) const {
    // pruning is relative to the polynomial's magnitude: freezing a solved
    // polynomial must not carry solver noise into the next compilation, where
    // stray coefficients outside the representable support would make an
    // otherwise feasible program exactly infeasible
    std::vector<std::pair<const Monomial*, double>> vals;
    double maxabs = 0.0;
    for (auto& [m, e] : p.terms()) {
        double c = value(e, sol);
        maxabs = std::max(maxabs, std::abs(c));
        vals.push_back({&m, c});
    }
    Polynomial r(p.nvars());
    double thresh = prune_tol * (1.0 + maxabs);
    for (auto& [m, c] : vals)
        if (std::abs(c) > thresh) r.add_term(*m, c);
    return r;
}

PolyMatrix SosProgram::value(const DecisionMatrix& m, const SdpSolution& sol, double prune_tol) const {
    int rows = static_cast<int>(m.size());
    PolyMatrix r(rows, rows, m[0][0].nvars());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < rows; ++j) r.at(i, j) = value(m[i][j], sol, prune_tol);
    return r;
}

SosCertificate SosProgram::certificate(int sos_index, const SdpSolution& sol) const {
    const Compiled& comp = compiled_.at(sos_index);
    SosCertificate cert;
    cert.name = comp.name;
    cert.rows = comp.rows;
    for (auto& g : comp.grams) {
        SosCertificate::GramBlock gb;
        gb.basis = g.basis;
        gb.gram = sol.block_values.at(prob_.blocks[g.block].name);
        cert.grams.push_back(std::move(gb));
    }
    return cert;
}

std::vector<SosReport> SosProgram::verify_all(const SdpSolution& sol) const {
    std::vector<SosReport> reports;
    for (int k = 0; k < sos_count(); ++k) {
        const Compiled& comp = compiled_[k];
        PolyMatrix inst = value(comp.target, sol);
        reports.push_back(verify_certificate(inst, certificate(k, sol)));
    }
    return reports;
}

SdpProblem compile_scalar_sos(const SosConstraint& c) {
    SosProgram prog;
    prog.add_scalar_sos(c.name.empty() ? "sos" : c.name, c.scalar_target, c.gram_basis);
    return prog.problem();
}

SdpProblem compile_matrix_sos(const SosConstraint& c) {
    SosProgram prog;
    prog.add_matrix_sos(c.name.empty() ? "sos" : c.name, c.matrix_target);
    return prog.problem();
}

PolyMatrix sos_expansion(const SosCertificate& cert, int rows, int nvars) {
    PolyMatrix expansion(rows, rows, nvars);
    for (auto& g : cert.grams) {
        const int B = static_cast<int>(g.basis.size());
        for (int a = 0; a < B; ++a)
            for (int b = 0; b < B; ++b) {
                double q = g.gram(a, b);
                if (q == 0.0) continue;
                expansion.at(g.basis[a].first, g.basis[b].first)
                    .add_term(g.basis[a].second * g.basis[b].second, q);
            }
    }
    return expansion;
}

SosReport verify_certificate(const PolyMatrix& target, const SosCertificate& cert) {
    SosReport rep;
    rep.name = cert.name;
    const int rows = target.rows;
    const int nvars = target.nvars();
    PolyMatrix expansion = sos_expansion(cert, rows, nvars);
    double min_eig = std::numeric_limits<double>::infinity();
    for (auto& g : cert.grams) {
        if (g.basis.empty()) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.gram, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    if (cert.grams.empty()) min_eig = 0.0;
    double residual = 0.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < rows; ++j) {
            Polynomial diff = expansion.at(i, j) - target.at(i, j);
            residual = std::max(residual, diff.max_abs_coeff());
        }
    rep.residual = residual;
    rep.gram_min_eig = min_eig;
    rep.pass = residual <= 1e-6 * (1.0 + target.max_abs_coeff()) && min_eig >= -1e-7;
    return rep;
}

SosReport verify_certificate(const Polynomial& target, const SosCertificate& cert) {
    PolyMatrix m(1, 1, target.nvars());
    m.at(0, 0) = target;
    return verify_certificate(m, cert);
}

}  // namespace polyctl
