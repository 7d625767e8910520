#include "polyctl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace polyctl::io {

std::string fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

json to_json(const Polynomial& p) {
    json terms = json::array();
    for (auto& [m, c] : p.terms()) terms.push_back({{"exponents", m.exponents}, {"coeff", c}});
    return terms;
}

Polynomial polynomial_from_json(const json& j, int nvars) {
    Polynomial p(nvars);
    for (auto& t : j) {
        std::vector<int> e = t.at("exponents").get<std::vector<int>>();
        if (static_cast<int>(e.size()) != nvars)
            throw std::invalid_argument("polynomial json: exponent length mismatch");
        p.add_term(Monomial(std::move(e)), t.at("coeff").get<double>());
    }
    return p;
}

json to_json(const PolyMatrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(to_json(m.at(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

PolyMatrix polymatrix_from_json(const json& j, int nvars) {
    int rows = static_cast<int>(j.size());
    int cols = rows ? static_cast<int>(j.at(0).size()) : 0;
    PolyMatrix m(rows, cols, nvars);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m.at(i, c) = polynomial_from_json(j.at(i).at(c), nvars);
    return m;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    int rows = static_cast<int>(j.size());
    int cols = rows ? static_cast<int>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

json to_json(const FunctionLibrary& lib) {
    json j;
    j["nstate"] = lib.nstate;
    j["ninput"] = lib.ninput;
    json z = json::array();
    for (auto& p : lib.Z) z.push_back(to_json(p));
    j["Z"] = z;
    j["W"] = to_json(lib.W);
    if (lib.has_zhat()) {
        json zh = json::array();
        for (auto& p : lib.Zhat) zh.push_back(to_json(p));
        j["Zhat"] = zh;
        j["H"] = to_json(*lib.H);
    }
    return j;
}

FunctionLibrary library_from_json(const json& j) {
    FunctionLibrary lib;
    lib.nstate = j.at("nstate").get<int>();
    lib.ninput = j.at("ninput").get<int>();
    for (auto& p : j.at("Z")) lib.Z.push_back(polynomial_from_json(p, lib.nstate));
    lib.W = polymatrix_from_json(j.at("W"), lib.nstate);
    if (j.contains("Zhat")) {
        for (auto& p : j.at("Zhat")) lib.Zhat.push_back(polynomial_from_json(p, lib.nstate));
        lib.H = polymatrix_from_json(j.at("H"), lib.nstate);
    }
    lib.validate();
    return lib;
}

std::string dataset_to_csv(const Dataset& ds) {
    ds.validate();
    const int n = static_cast<int>(ds.samples.front().x.size());
    const int m = static_cast<int>(ds.samples.front().u.size());
    std::ostringstream os;
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",x" << i;
    for (int i = 1; i <= m; ++i) os << ",u" << i;
    for (int i = 1; i <= n; ++i) os << ",xdot" << i;
    os << "\n";
    for (auto& s : ds.samples) {
        os << fmt17(s.t);
        for (int i = 0; i < n; ++i) os << "," << fmt17(s.x(i));
        for (int i = 0; i < m; ++i) os << "," << fmt17(s.u(i));
        for (int i = 0; i < n; ++i) os << "," << fmt17(s.xdot(i));
        os << "\n";
    }
    return os.str();
}

Dataset dataset_from_csv(const std::string& csv, double delta) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("dataset csv: empty file");
    // header tells us n and m
    int n = 0, m = 0;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("xdot", 0) == 0) continue;
            if (col.rfind('x', 0) == 0) ++n;
            else if (col.rfind('u', 0) == 0) ++m;
            else if (col != "t") throw std::invalid_argument("dataset csv: unexpected column " + col);
        }
    }
    if (n <= 0) throw std::invalid_argument("dataset csv: no state columns");
    Dataset ds;
    ds.delta = delta;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != 1 + 2 * n + m)
            throw std::invalid_argument("dataset csv: wrong column count in a row");
        DataSample s;
        s.t = vals[0];
        s.x = Eigen::Map<Eigen::VectorXd>(vals.data() + 1, n);
        s.u = Eigen::Map<Eigen::VectorXd>(vals.data() + 1 + n, m);
        s.xdot = Eigen::Map<Eigen::VectorXd>(vals.data() + 1 + n + m, n);
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

json dataset_metadata(const Dataset& ds, const std::string& config_hash) {
    json j;
    j["delta"] = ds.delta;
    j["seed"] = ds.seed;
    j["T"] = ds.T();
    j["multi_trajectory"] = ds.multi_trajectory;
    j["config_hash"] = config_hash;
    j["dataset_hash"] = fnv1a64(dataset_to_csv(ds));
    return j;
}

json to_json(const EllipsoidModel& m) {
    json j;
    j["Abar"] = to_json(m.Abar);
    j["Bbar"] = to_json(m.Bbar);
    j["zeta_bar"] = to_json(m.zeta_bar);
    j["Qbar"] = to_json(m.Qbar);
    json taus = json::array();
    for (Eigen::Index i = 0; i < m.taus.size(); ++i) taus.push_back(m.taus(i));
    j["taus"] = taus;
    j["log_det"] = m.log_det;
    j["dataset_hash"] = m.dataset_hash;
    j["config_hash"] = m.config_hash;
    return j;
}

EllipsoidModel model_from_json(const json& j) {
    EllipsoidModel m;
    m.Abar = matrix_from_json(j.at("Abar"));
    m.Bbar = matrix_from_json(j.at("Bbar"));
    m.zeta_bar = matrix_from_json(j.at("zeta_bar"));
    m.Qbar = matrix_from_json(j.at("Qbar"));
    auto taus = j.at("taus").get<std::vector<double>>();
    m.taus = Eigen::Map<Eigen::VectorXd>(taus.data(), static_cast<Eigen::Index>(taus.size()));
    m.log_det = j.value("log_det", 0.0);
    m.dataset_hash = j.value("dataset_hash", "");
    m.config_hash = j.value("config_hash", "");
    m.validate();
    return m;
}

namespace {

json alpha_to_json(const ClassKInfty& a) { return json(a.coeffs); }
ClassKInfty alpha_from_json(const json& j) {
    ClassKInfty a;
    a.coeffs = j.get<std::vector<double>>();
    return a;
}

}  // namespace

json to_json(const Certificate& c) {
    json j;
    j["kind"] = to_string(c.kind);
    j["nstate"] = c.nstate;
    j["nexo"] = c.nexo;
    json ks = json::array();
    for (auto& kj : c.k) ks.push_back(to_json(kj));
    j["k"] = ks;
    j["V"] = to_json(c.V);
    j["alpha1"] = alpha_to_json(c.alpha1);
    j["alpha2"] = alpha_to_json(c.alpha2);
    j["alpha3"] = alpha_to_json(c.alpha3);
    j["alpha4"] = alpha_to_json(c.alpha4);
    j["lambda"] = to_json(c.lambda);
    j["lambda_nvars"] = c.lambda.nvars();
    if (c.P.size()) j["P"] = to_json(c.P);
    if (c.Y.rows) j["Y"] = to_json(c.Y);
    if (c.Theta.rows) j["Theta"] = to_json(c.Theta);
    if (!c.Gamma.empty()) {
        json cs = json::array();
        for (auto& Ck : c.Gamma.C) cs.push_back(to_json(Ck));
        j["Gamma"] = cs;
    }
    j["eta"] = c.eta;
    if (!c.a_fun.is_zero()) j["a"] = to_json(c.a_fun);
    if (!c.b_fun.is_zero()) j["b"] = to_json(c.b_fun);
    if (c.Xi) j["Xi"] = to_json(*c.Xi);
    json reps = json::array();
    for (auto& r : c.sos_reports)
        reps.push_back({{"name", r.name},
                        {"residual", r.residual},
                        {"gram_min_eig", r.gram_min_eig},
                        {"pass", r.pass}});
    j["sos_reports"] = reps;
    j["dataset_hash"] = c.dataset_hash;
    j["model_hash"] = c.model_hash;
    j["config_hash"] = c.config_hash;
    j["stats"] = {{"scalar_vars", c.stats.scalar_vars},
                  {"psd_blocks", c.stats.psd_blocks},
                  {"equalities", c.stats.equalities},
                  {"sdp_solves", c.stats.sdp_solves},
                  {"wall_seconds", c.stats.wall_seconds}};
    return j;
}

Certificate certificate_from_json(const json& j) {
    Certificate c;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "gas") c.kind = CertificateKind::gas;
    else if (kind == "iss_actuator_biconvex") c.kind = CertificateKind::iss_actuator_biconvex;
    else if (kind == "iss_process_biconvex") c.kind = CertificateKind::iss_process_biconvex;
    else if (kind == "iss_actuator_convex") c.kind = CertificateKind::iss_actuator_convex;
    else if (kind == "iss_process_convex") c.kind = CertificateKind::iss_process_convex;
    else if (kind == "model_based") c.kind = CertificateKind::model_based;
    else throw std::invalid_argument("certificate json: unknown kind " + kind);
    c.nstate = j.at("nstate").get<int>();
    c.nexo = j.at("nexo").get<int>();
    for (auto& kj : j.at("k")) c.k.push_back(polynomial_from_json(kj, c.nstate));
    c.V = polynomial_from_json(j.at("V"), c.nstate);
    c.alpha1 = alpha_from_json(j.at("alpha1"));
    c.alpha2 = alpha_from_json(j.at("alpha2"));
    c.alpha3 = alpha_from_json(j.at("alpha3"));
    c.alpha4 = alpha_from_json(j.at("alpha4"));
    c.lambda = polynomial_from_json(j.at("lambda"), j.at("lambda_nvars").get<int>());
    if (j.contains("P")) c.P = matrix_from_json(j.at("P"));
    if (j.contains("Y")) c.Y = polymatrix_from_json(j.at("Y"), c.nstate);
    if (j.contains("Theta")) c.Theta = polymatrix_from_json(j.at("Theta"), c.nstate);
    if (j.contains("Gamma"))
        for (auto& Ck : j.at("Gamma")) c.Gamma.C.push_back(matrix_from_json(Ck));
    c.eta = j.value("eta", 0.0);
    if (j.contains("a")) c.a_fun = polynomial_from_json(j.at("a"), c.nstate);
    if (j.contains("b")) c.b_fun = polynomial_from_json(j.at("b"), c.nstate);
    if (j.contains("Xi")) c.Xi = polymatrix_from_json(j.at("Xi"), c.nstate);
    for (auto& r : j.at("sos_reports")) {
        SosReport rep;
        rep.name = r.at("name").get<std::string>();
        rep.residual = r.at("residual").get<double>();
        rep.gram_min_eig = r.at("gram_min_eig").get<double>();
        rep.pass = r.at("pass").get<bool>();
        c.sos_reports.push_back(std::move(rep));
    }
    c.dataset_hash = j.value("dataset_hash", "");
    c.model_hash = j.value("model_hash", "");
    c.config_hash = j.value("config_hash", "");
    if (j.contains("stats")) {
        c.stats.scalar_vars = j["stats"].value("scalar_vars", 0);
        c.stats.psd_blocks = j["stats"].value("psd_blocks", 0);
        c.stats.equalities = j["stats"].value("equalities", 0);
        c.stats.sdp_solves = j["stats"].value("sdp_solves", 0);
        c.stats.wall_seconds = j["stats"].value("wall_seconds", 0.0);
    }
    return c;
}

std::string trace_to_csv(const DissipationTrace& tr) {
    std::ostringstream os;
    os << "t,Vdot,bound,margin\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        os << fmt17(tr.times[i]) << "," << fmt17(tr.Vdot[i]) << "," << fmt17(tr.bound[i]) << ","
           << fmt17(tr.margin[i]) << "\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << contents;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace polyctl::io
