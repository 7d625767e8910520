// Batch pipeline driver: collect -> overapprox -> synth -> verify -> report.
// All stages read one JSON config; command-line flags override config keys.
// Exit codes: 0 success, 2 infeasible, 3 verification failure, 4 config/IO.

#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyctl/consistency.hpp"
#include "polyctl/io.hpp"
#include "polyctl/synth.hpp"
#include "polyctl/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polyctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitVerification = 3;
constexpr int kExitConfig = 4;

struct Config {
    json raw;
    std::string hash;
    fs::path out;
    std::uint64_t seed = 0;
};

Config load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                   std::optional<std::string> out_override) {
    Config cfg;
    cfg.raw = json::parse(io::read_file(path));
    if (seed_override) cfg.raw["seed"] = *seed_override;
    if (out_override) cfg.raw["out"] = *out_override;
    if (!cfg.raw.contains("seed")) throw std::invalid_argument("config: seed is mandatory");
    cfg.seed = cfg.raw["seed"].get<std::uint64_t>();
    cfg.out = cfg.raw.value("out", std::string("out"));
    cfg.hash = io::fnv1a64(cfg.raw.dump());
    return cfg;
}

TrueSystem system_from_config(const json& j) {
    if (!j.contains("system")) throw std::invalid_argument("config: system section required");
    const json& s = j.at("system");
    TrueSystem sys;
    sys.library = io::library_from_json(s.at("library"));
    sys.A_star = io::matrix_from_json(s.at("A"));
    sys.B_star = io::matrix_from_json(s.at("B"));
    sys.validate();
    return sys;
}

SignalSpec signal_from_config(const json& j, int dim) {
    SignalSpec s;
    std::string kind = j.value("kind", std::string("zero"));
    s.dim = j.value("dim", dim);
    if (kind == "zero") s.kind = SignalSpec::Kind::zero;
    else if (kind == "constant") {
        s.kind = SignalSpec::Kind::constant;
        s.constant_value = j.at("value").get<std::vector<double>>();
    } else if (kind == "interpolated_gaussian") {
        s.kind = SignalSpec::Kind::interpolated_gaussian;
        s.mean = j.value("mean", 0.0);
        s.stddev = j.value("stddev", 1.0);
        s.knot_spacing = j.value("knot_spacing", 0.1);
    } else if (kind == "interpolated_uniform_ball") {
        s.kind = SignalSpec::Kind::interpolated_uniform_ball;
        s.radius = j.value("radius", 1.0);
        s.knot_spacing = j.value("knot_spacing", 0.1);
    } else {
        throw std::invalid_argument("config: unknown signal kind " + kind);
    }
    return s;
}

void apply_synth_section(SynthConfig& cfg, const json& s, const FunctionLibrary& lib);

// base section "synth" plus optional per-program overrides ("synth_gas",
// "synth_iss-w-convex", ...); the overrides may also swap in the reduced
// library Zhat/H each convex program needs
SynthConfig synth_from_config(const json& j, FunctionLibrary& lib, const std::string& program) {
    SynthConfig cfg;
    if (j.contains("synth")) apply_synth_section(cfg, j.at("synth"), lib);
    std::string key = "synth_" + program;
    if (j.contains(key)) {
        const json& s = j.at(key);
        if (s.contains("Zhat")) {
            lib.Zhat.clear();
            for (auto& p : s.at("Zhat")) lib.Zhat.push_back(io::polynomial_from_json(p, lib.nstate));
            lib.H = io::polymatrix_from_json(s.at("H"), lib.nstate);
            lib.validate();
        }
        apply_synth_section(cfg, s, lib);
    }
    return cfg;
}

void apply_synth_section(SynthConfig& cfg, const json& s, const FunctionLibrary& lib) {
    cfg.deg_V_min = s.value("deg_V_min", cfg.deg_V_min);
    cfg.deg_V_max = s.value("deg_V_max", cfg.deg_V_max);
    cfg.deg_k_min = s.value("deg_k_min", cfg.deg_k_min);
    cfg.deg_k_max = s.value("deg_k_max", cfg.deg_k_max);
    cfg.deg_lambda_min = s.value("deg_lambda_min", cfg.deg_lambda_min);
    cfg.deg_lambda_max = s.value("deg_lambda_max", cfg.deg_lambda_max);
    cfg.deg_Y_max = s.value("deg_Y_max", cfg.deg_Y_max);
    cfg.deg_Theta_min = s.value("deg_Theta_min", cfg.deg_Theta_min);
    cfg.deg_Theta_max = s.value("deg_Theta_max", cfg.deg_Theta_max);
    cfg.N1 = s.value("N1", cfg.N1);
    cfg.N2 = s.value("N2", cfg.N2);
    cfg.N3 = s.value("N3", cfg.N3);
    cfg.N4 = s.value("N4", cfg.N4);
    cfg.mu = s.value("mu", cfg.mu);
    cfg.epsilon = s.value("epsilon", cfg.epsilon);
    cfg.gamma_terms = s.value("gamma_terms", cfg.gamma_terms);
    cfg.gamma_identity = s.value("gamma_identity", cfg.gamma_identity);
    cfg.lambda_drop_exo = s.value("lambda_drop_exo", cfg.lambda_drop_exo);
    cfg.use_parity = s.value("use_parity", cfg.use_parity);
    cfg.feasibility_slack = s.value("feasibility_slack", cfg.feasibility_slack);
    cfg.eta_margin = s.value("eta_margin", cfg.eta_margin);
    cfg.p_margin = s.value("p_margin", cfg.p_margin);
    cfg.alternation_rounds = s.value("alternation_rounds", cfg.alternation_rounds);
    if (s.contains("initial_controller"))
        for (auto& p : s.at("initial_controller"))
            cfg.initial_controller.push_back(io::polynomial_from_json(p, lib.nstate));
    if (s.contains("Xi")) cfg.Xi = io::polymatrix_from_json(s.at("Xi"), lib.nstate);
}

struct CollectedFiles {
    fs::path csv, meta;
};

CollectedFiles dataset_paths(const Config& cfg) {
    return {cfg.out / "dataset.csv", cfg.out / "dataset.json"};
}

int cmd_collect(const Config& cfg) {
    TrueSystem sys = system_from_config(cfg.raw);
    const json& c = cfg.raw.at("collect");
    int T = c.value("T", 50);
    if (T <= 0) throw std::invalid_argument("config: T must be positive");
    double delta = c.value("delta", 1.0);
    double horizon = c.value("horizon", 0.25);
    double step = c.value("step", 1e-3);
    std::vector<Eigen::VectorXd> x0s;
    for (auto& row : c.at("initial_states")) {
        auto v = row.get<std::vector<double>>();
        x0s.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (x0s.empty()) throw std::invalid_argument("config: at least one initial state required");

    std::mt19937_64 rng(cfg.seed);
    Dataset all;
    all.delta = delta;
    all.seed = cfg.seed;
    all.multi_trajectory = x0s.size() > 1;
    int per = T / static_cast<int>(x0s.size());
    for (std::size_t k = 0; k < x0s.size(); ++k) {
        int n = (k + 1 == x0s.size()) ? T - per * (static_cast<int>(x0s.size()) - 1) : per;
        double dt = horizon / n;
        SignalSpec uspec = signal_from_config(c.value("input", json::object()), sys.library.ninput);
        SignalSpec dspec = signal_from_config(c.value("noise", json::object()), sys.library.nstate);
        if (c.value("align_knots", true)) {
            uspec.knot_spacing = dt;
            dspec.knot_spacing = dt;
        }
        Signal u(uspec, horizon, rng), d(dspec, horizon, rng);
        Trajectory traj = integrate_trajectory(sys, x0s[k], u, d, horizon, step);
        if (traj.diverged) throw std::runtime_error("collect: trajectory diverged");
        std::vector<double> times;
        for (int i = 0; i < n; ++i) times.push_back(i * dt);
        Dataset part = collect_dataset(traj, sys, u, d, times, delta);
        for (auto& smp : part.samples) all.samples.push_back(smp);
    }

    fs::create_directories(cfg.out);
    auto paths = dataset_paths(cfg);
    io::write_file(paths.csv.string(), io::dataset_to_csv(all));
    io::write_file(paths.meta.string(), io::dataset_metadata(all, cfg.hash).dump(2) + "\n");
    std::cout << "collected " << all.T() << " samples -> " << paths.csv.string() << "\n";
    return kExitOk;
}

Dataset load_dataset(const Config& cfg, std::string* dataset_hash) {
    auto paths = dataset_paths(cfg);
    json meta = json::parse(io::read_file(paths.meta.string()));
    if (meta.value("config_hash", std::string()) != cfg.hash)
        throw std::runtime_error("dataset was produced under a different config (hash mismatch)");
    std::string csv = io::read_file(paths.csv.string());
    Dataset ds = io::dataset_from_csv(csv, meta.at("delta").get<double>());
    ds.seed = meta.value("seed", std::uint64_t{0});
    ds.multi_trajectory = meta.value("multi_trajectory", false);
    if (dataset_hash) *dataset_hash = io::fnv1a64(csv);
    return ds;
}

int cmd_overapprox(const Config& cfg) {
    TrueSystem sys = system_from_config(cfg.raw);
    std::string dhash;
    Dataset ds = load_dataset(cfg, &dhash);
    RankReport rk = rank_check(ds, sys.library);
    std::cout << "rank check: " << (rk.full_row_rank ? "full row rank" : "RANK DEFICIENT")
              << " (singular values " << rk.singular_values.minCoeff() << " .. "
              << rk.singular_values.maxCoeff() << ")\n";
    if (!rk.full_row_rank)
        std::cout << "warning: [Z0; W0] is rank deficient; the overapproximation program "
                     "is expected to fail — collect more data\n";
    auto quadrics = build_sample_quadrics(ds, sys.library);
    EllipsoidModel model = solve_overapproximation(quadrics, sys.library.nstate);
    model.dataset_hash = dhash;
    model.config_hash = cfg.hash;
    io::write_file((cfg.out / "model.json").string(), io::to_json(model).dump(2) + "\n");
    std::cout << "overapproximation solved: log det " << model.log_det << " -> "
              << (cfg.out / "model.json").string() << "\n";
    return kExitOk;
}

EllipsoidModel load_model(const Config& cfg) {
    EllipsoidModel m = io::model_from_json(json::parse(io::read_file((cfg.out / "model.json").string())));
    if (m.config_hash != cfg.hash)
        throw std::runtime_error("model was produced under a different config (hash mismatch)");
    return m;
}

std::string program_file(const std::string& program) { return "certificate_" + program + ".json"; }

void print_certificate_summary(const Certificate& c) {
    std::cout << "kind: " << to_string(c.kind) << "\n";
    std::vector<std::string> names;
    for (int i = 0; i < c.nstate; ++i) names.push_back("x" + std::to_string(i + 1));
    for (std::size_t j = 0; j < c.k.size(); ++j)
        std::cout << "  k" << (j + 1) << "(x) = " << c.k[j].str(names) << "\n";
    std::cout << "  V(x) = " << c.V.str(names) << "\n";
    auto alpha = [&](const char* n, const ClassKInfty& a) {
        if (a.empty()) return;
        std::cout << "  " << n << "(r) = ";
        bool first = true;
        for (std::size_t k = 0; k < a.coeffs.size(); ++k) {
            if (a.coeffs[k] == 0.0) continue;
            if (!first) std::cout << " + ";
            std::cout << a.coeffs[k] << " r^" << 2 * (k + 1);
            first = false;
        }
        if (first) std::cout << "0";
        std::cout << "\n";
    };
    alpha("alpha1", c.alpha1);
    alpha("alpha2", c.alpha2);
    alpha("alpha3", c.alpha3);
    alpha("alpha4", c.alpha4);
    if (!c.lambda.is_zero()) std::cout << "  lambda = " << c.lambda.str() << "\n";
    std::cout << "  SOS residuals:";
    for (auto& r : c.sos_reports)
        std::cout << " " << r.name << "=" << std::scientific << std::setprecision(2) << r.residual
                  << (r.pass ? "" : "(FAIL)") << std::defaultfloat;
    std::cout << "\n  " << c.stats.sdp_solves << " SDP solve(s), " << c.stats.scalar_vars
              << " scalar vars, " << c.stats.equalities << " equalities, " << std::fixed
              << std::setprecision(2) << c.stats.wall_seconds << " s" << std::defaultfloat << "\n";
}

int cmd_synth(const Config& cfg, const std::string& program) {
    TrueSystem sys = system_from_config(cfg.raw);
    SynthConfig scfg = synth_from_config(cfg.raw, sys.library, program);
    Certificate cert;
    if (program == "model-based") {
        cert = synth_modelbased_convex(sys, scfg);
    } else {
        EllipsoidModel model = load_model(cfg);
        if ((program == "gas" || program == "iss-w-biconvex" || program == "iss-d-biconvex") &&
            scfg.initial_controller.empty())
            throw std::invalid_argument("config: biconvex programs need synth.initial_controller");
        if (program == "gas") cert = synth_gas(model, sys.library, scfg);
        else if (program == "iss-w-biconvex") cert = synth_iss_actuator_biconvex(model, sys.library, scfg);
        else if (program == "iss-d-biconvex") cert = synth_iss_process_biconvex(model, sys.library, scfg);
        else if (program == "iss-w-convex") cert = synth_iss_actuator_convex(model, sys.library, scfg);
        else if (program == "iss-d-convex") cert = synth_iss_process_convex(model, sys.library, scfg);
        else throw std::invalid_argument("unknown synthesis program: " + program);
        cert.model_hash = io::fnv1a64(io::to_json(model).dump());
        cert.dataset_hash = model.dataset_hash;
    }
    cert.config_hash = cfg.hash;
    fs::create_directories(cfg.out);
    io::write_file((cfg.out / program_file(program)).string(), io::to_json(cert).dump(2) + "\n");
    print_certificate_summary(cert);
    std::cout << "certificate -> " << (cfg.out / program_file(program)).string() << "\n";
    return kExitOk;
}

int cmd_verify(const Config& cfg, const std::string& program) {
    TrueSystem sys = system_from_config(cfg.raw);
    Certificate cert = io::certificate_from_json(
        json::parse(io::read_file((cfg.out / program_file(program)).string())));
    if (cert.config_hash != cfg.hash)
        throw std::runtime_error("certificate was produced under a different config (hash mismatch)");

    const json& v = cfg.raw.value("verify", json::object());
    double horizon = v.value("horizon", 10.0);
    double step = v.value("step", 1e-3);
    double tol = v.value("margin_tol", 1e-6);
    std::vector<double> x0v = v.value("x0", std::vector<double>{2.0, -2.0});
    Eigen::VectorXd x0 = Eigen::Map<Eigen::VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));

    int exo_dim = cert.nexo;
    std::mt19937_64 rng(cfg.seed + 17);
    Signal dist = cert.kind == CertificateKind::gas
                      ? Signal(SignalSpec::zero(sys.library.ninput), horizon, rng)
                      : Signal(signal_from_config(v.value("disturbance",
                                                          json{{"kind", "interpolated_uniform_ball"},
                                                               {"radius", 1.0},
                                                               {"knot_spacing", 0.5}}),
                                                  exo_dim),
                               horizon, rng);

    Trajectory traj = simulate_closed_loop(sys, cert, dist, x0, horizon, step);
    DissipationTrace tr = dissipation_trace(traj, sys, cert, dist);
    fs::create_directories(cfg.out);
    io::write_file((cfg.out / ("trace_" + program + ".csv")).string(), io::trace_to_csv(tr));
    bool trace_ok = tr.min_margin() >= -tol && !traj.diverged;
    std::cout << "dissipation trace: min margin " << tr.min_margin() << " over " << tr.times.size()
              << " steps " << (trace_ok ? "PASS" : "FAIL") << "\n";

    bool robust_ok = true;
    RobustSampleConfig rcfg;
    rcfg.seed = cfg.seed + 31;
    rcfg.n_points = v.value("robust_samples", 1000);
    if (cert.kind == CertificateKind::model_based) {
        auto rep = robust_sample_check_modelbased(cert, sys, rcfg);
        robust_ok = rep.pass(tol);
        std::cout << "robust sampling (true pair): worst margin " << rep.worst_margin << " over "
                  << rep.samples << " samples " << (robust_ok ? "PASS" : "FAIL") << "\n";
    } else {
        EllipsoidModel model = load_model(cfg);
        auto rep = robust_sample_check(cert, model, sys.library, rcfg);
        robust_ok = rep.pass(tol);
        std::cout << "robust sampling (ellipsoid): worst margin " << rep.worst_margin << " over "
                  << rep.samples << " samples " << (robust_ok ? "PASS" : "FAIL") << "\n";
    }

    json report;
    report["program"] = program;
    report["min_trace_margin"] = tr.min_margin();
    report["trace_pass"] = trace_ok;
    report["robust_pass"] = robust_ok;
    report["config_hash"] = cfg.hash;
    io::write_file((cfg.out / ("verify_" + program + ".json")).string(), report.dump(2) + "\n");
    return trace_ok && robust_ok ? kExitOk : kExitVerification;
}

int cmd_report(const Config& cfg) {
    const std::vector<std::string> programs = {"gas",          "iss-w-biconvex", "iss-d-biconvex",
                                               "iss-w-convex", "iss-d-convex",   "model-based"};
    bool any = false;
    std::cout << std::left << std::setw(16) << "program" << std::right << std::setw(8) << "vars"
              << std::setw(8) << "eqs" << std::setw(8) << "blocks" << std::setw(8) << "solves"
              << std::setw(10) << "time[s]" << std::setw(16) << "worst margin" << "\n";
    for (auto& p : programs) {
        fs::path f = cfg.out / program_file(p);
        if (!fs::exists(f)) {
            std::cout << std::left << std::setw(16) << p << "  (not run)\n";
            continue;
        }
        any = true;
        Certificate c = io::certificate_from_json(json::parse(io::read_file(f.string())));
        std::string margin = "-";
        fs::path vf = cfg.out / ("verify_" + p + ".json");
        if (fs::exists(vf)) {
            json v = json::parse(io::read_file(vf.string()));
            margin = std::to_string(v.value("min_trace_margin", 0.0));
        }
        std::cout << std::left << std::setw(16) << p << std::right << std::setw(8)
                  << c.stats.scalar_vars << std::setw(8) << c.stats.equalities << std::setw(8)
                  << c.stats.psd_blocks << std::setw(8) << c.stats.sdp_solves << std::setw(10)
                  << std::fixed << std::setprecision(2) << c.stats.wall_seconds << std::defaultfloat
                  << std::setw(16) << margin << "\n";
    }
    if (!any) throw std::runtime_error("report: no certificates found in " + cfg.out.string());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-driven input-to-state stabilization via sum-of-squares programs"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--seed", seed, "override config seed");
    app.add_option("--out", out, "override output directory");

    auto* collect = app.add_subcommand("collect", "simulate and collect a noisy dataset");
    auto* overapprox = app.add_subcommand("overapprox", "solve the set-membership overapproximation");
    std::string program;
    auto* synth = app.add_subcommand("synth", "synthesize a certified controller");
    synth->add_option("program", program,
                      "gas | iss-w-biconvex | iss-d-biconvex | iss-w-convex | iss-d-convex | model-based")
        ->required();
    std::string vprogram;
    auto* verify = app.add_subcommand("verify", "verify a certificate against the true system");
    verify->add_option("program", vprogram, "certificate to verify")->required();
    auto* report = app.add_subcommand("report", "consolidated pipeline report");

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = load_config(config_path, seed, out);
        if (collect->parsed()) return cmd_collect(cfg);
        if (overapprox->parsed()) return cmd_overapprox(cfg);
        if (synth->parsed()) return cmd_synth(cfg, program);
        if (verify->parsed()) return cmd_verify(cfg, vprogram);
        if (report->parsed()) return cmd_report(cfg);
    } catch (const SynthError& e) {
        std::cerr << "infeasible: " << e.what() << "\n" << e.diagnostics() << "\n";
        return kExitInfeasible;
    } catch (const OverapproximationError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
