#include <doctest.h>

#include "polyctl/io.hpp"
#include "test_util.hpp"

using namespace polyctl;

TEST_CASE("polynomial JSON round trip") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 25; ++t) {
        Polynomial p = testutil::random_poly(3, 5, 8, rng);
        Polynomial q = io::polynomial_from_json(io::to_json(p), 3);
        CHECK((p - q).max_abs_coeff() == 0.0);
    }
    CHECK_THROWS_AS(io::polynomial_from_json(io::to_json(Polynomial::variable(2, 0)), 3),
                    std::invalid_argument);
}

TEST_CASE("library JSON round trip preserves the reduced form") {
    auto lib = testutil::cubic2d_library_zhat_quadratic();
    auto lib2 = io::library_from_json(io::to_json(lib));
    CHECK(lib2.N() == 4);
    CHECK(lib2.Nhat() == 2);
    CHECK_NOTHROW(lib2.validate());
}

TEST_CASE("dataset CSV is byte-stable and parses back") {
    auto ex = testutil::cubic2d_experiment(7, 12);
    std::string csv1 = io::dataset_to_csv(ex.dataset);
    std::string csv2 = io::dataset_to_csv(ex.dataset);
    CHECK(csv1 == csv2);
    Dataset ds = io::dataset_from_csv(csv1, ex.dataset.delta);
    CHECK(ds.T() == ex.dataset.T());
    for (int i = 0; i < ds.T(); ++i) {
        CHECK((ds.samples[i].x - ex.dataset.samples[i].x).norm() == 0.0);
        CHECK((ds.samples[i].xdot - ex.dataset.samples[i].xdot).norm() == 0.0);
    }
    std::string again = io::dataset_to_csv(ds);
    CHECK(again == csv1);
}

TEST_CASE("identical seeds give identical datasets, different seeds differ") {
    auto a = testutil::cubic2d_experiment(5, 10);
    auto b = testutil::cubic2d_experiment(5, 10);
    auto c = testutil::cubic2d_experiment(6, 10);
    CHECK(io::dataset_to_csv(a.dataset) == io::dataset_to_csv(b.dataset));
    CHECK(io::dataset_to_csv(a.dataset) != io::dataset_to_csv(c.dataset));
}

TEST_CASE("model JSON round trip validates") {
    auto ex = testutil::cubic2d_experiment(19);
    auto model = solve_overapproximation(build_sample_quadrics(ex.dataset, ex.sys.library), 2);
    model.dataset_hash = "abc";
    model.config_hash = "def";
    auto m2 = io::model_from_json(io::to_json(model));
    CHECK((m2.Abar - model.Abar).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m2.zeta_bar - model.zeta_bar).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m2.dataset_hash == "abc");
}

TEST_CASE("certificate JSON round trip") {
    Certificate c;
    c.kind = CertificateKind::iss_actuator_convex;
    c.nstate = 2;
    c.nexo = 1;
    c.k = {testutil::mono2(0, 3, -1.5) + testutil::mono2(1, 0, 0.25)};
    c.V = testutil::mono2(2, 0, 1.0) + testutil::mono2(0, 2, 2.0);
    c.alpha1 = {{1.0}};
    c.alpha2 = {{2.0}};
    c.alpha3 = {{0.5, 0.1}};
    c.alpha4 = {{3.0}};
    c.lambda = Polynomial::constant(3, 0.5);
    c.P = Eigen::Matrix2d::Identity();
    c.Y = PolyMatrix(1, 2, 2);
    c.Y.at(0, 1) = testutil::mono2(0, 1, -3.0);
    c.Theta = PolyMatrix::identity(2, 2);
    c.Gamma.C = {Eigen::MatrixXd::Identity(1, 1) * 2.7};
    c.eta = 0.2;
    c.sos_reports = {{"s_lambda", 1e-9, 1e-12, true}};
    c.dataset_hash = "dh";
    c.config_hash = "ch";
    c.stats.sdp_solves = 1;
    Certificate c2 = io::certificate_from_json(io::to_json(c));
    CHECK(c2.kind == c.kind);
    CHECK((c2.V - c.V).max_abs_coeff() == 0.0);
    CHECK((c2.k[0] - c.k[0]).max_abs_coeff() == 0.0);
    CHECK(c2.alpha3.coeffs == c.alpha3.coeffs);
    CHECK(c2.Gamma.C[0](0, 0) == doctest::Approx(2.7));
    CHECK(c2.sos_reports.size() == 1);
    CHECK(c2.sos_reports[0].pass);
    CHECK(c2.config_hash == "ch");
}

TEST_CASE("trace CSV has the documented columns") {
    DissipationTrace tr;
    tr.times = {0.0, 0.1};
    tr.Vdot = {-1.0, -0.5};
    tr.bound = {-0.5, -0.25};
    tr.margin = {0.5, 0.25};
    std::string csv = io::trace_to_csv(tr);
    CHECK(csv.rfind("t,Vdot,bound,margin\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("fnv hash is stable and content sensitive") {
    CHECK(io::fnv1a64("abc") == io::fnv1a64("abc"));
    CHECK(io::fnv1a64("abc") != io::fnv1a64("abd"));
    CHECK(io::fnv1a64("abc").size() == 16);
}
