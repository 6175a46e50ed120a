#include "hypoql/estimate.hpp"

#include "hypoql/models.hpp"
#include "hypoql/simulate.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace hypoql;
using namespace hypoql::testing;

TEST_CASE("one Newton update is plain arithmetic") {
    ContrastEvaluation ev;
    ev.gradient = vec1(2.0);
    ev.hessian = MatrixXd::Constant(1, 1, -4.0);
    bool ok = false;
    const VectorXd next = onestep_update(vec1(1.0), ev, 1e12, ok);
    CHECK(ok);
    CHECK(next[0] == doctest::Approx(1.5));

    // singular Hessian fails the guard and returns the input
    ev.hessian = MatrixXd::Zero(1, 1);
    const VectorXd same = onestep_update(vec1(1.0), ev, 1e12, ok);
    CHECK(!ok);
    CHECK(same[0] == 1.0);
}

TEST_CASE("pipeline is an exact fixed point on moment-matched data") {
    FlatWeightModel flat;
    const ThetaPoint truth = FlatWeightModel::truth();
    const auto grid = make_moment_matched_grid(flat, truth, 400, 0.01, vec2(0.3, 0.0));

    EstimatorConfig cfg;
    const EstimateReport rep = estimate_adaptive(flat, grid, cfg);
    CHECK(rep.onestep_event_ok);
    CHECK(std::abs(rep.theta_hat.theta1[0] - truth.theta1[0]) < 1e-6);
    CHECK(std::abs(rep.theta_hat.theta2[0] - truth.theta2[0]) < 1e-6);
    CHECK(std::abs(rep.theta_hat.theta3[0] - truth.theta3[0]) < 1e-6);
    CHECK(std::abs(rep.theta_initial.theta1[0] - truth.theta1[0]) < 1e-6);
    CHECK(std::abs(rep.theta_initial.theta3[0] - truth.theta3[0]) < 1e-6);

    const EstimateReport joint = estimate_joint(flat, grid, cfg);
    CHECK(std::abs(joint.theta_hat.theta1[0] - truth.theta1[0]) < 1e-6);
    CHECK(std::abs(joint.theta_hat.theta2[0] - truth.theta2[0]) < 1e-6);
    CHECK(std::abs(joint.theta_hat.theta3[0] - truth.theta3[0]) < 1e-6);

    const EstimateReport inf = estimate_inferior_theta3(flat, grid, cfg);
    CHECK(std::abs(inf.theta_hat.theta3[0] - truth.theta3[0]) < 1e-6);
}

TEST_CASE("report carries rates, stderr and diagnostics") {
    LinearOscillatorModel osc;
    SimConfig sim;
    sim.n = 1500;
    sim.h = 0.01;
    sim.seed = 55;
    const auto grid = simulate_path(osc, LinearOscillatorModel::default_truth(), sim);
    const EstimateReport rep = estimate_adaptive(osc, grid, EstimatorConfig{});

    CHECK(rep.rate1 == doctest::Approx(std::sqrt(1500.0)));
    CHECK(rep.rate2 == doctest::Approx(std::sqrt(15.0)));
    CHECK(rep.rate3 == doctest::Approx(std::sqrt(150000.0)));
    CHECK(rep.stderr1.size() == 1);
    CHECK(rep.stderr2.size() == 2);
    CHECK(rep.stderr3.size() == 1);
    CHECK(rep.stderr3[0] > 0.0);
    CHECK(rep.stderr3[0] < rep.stderr1[0]);  // fast rate gives the smallest error bar
    CHECK(rep.stages.size() == 3);
    for (const auto& st : rep.stages) CHECK(st.diag.converged);

    // gamma blocks are symmetric PSD
    for (const MatrixXd* g :
         {&rep.gamma.gamma11, &rep.gamma.gamma22, &rep.gamma.gamma33, &rep.gamma.gamma1_xonly}) {
        CHECK((*g - g->transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(*g);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("estimation refuses undersized grids") {
    LinearOscillatorModel osc;
    SimConfig sim;
    sim.n = 50;
    sim.h = 0.01;
    const auto grid = simulate_path(osc, LinearOscillatorModel::default_truth(), sim);
    CHECK_THROWS_AS(estimate_adaptive(osc, grid, EstimatorConfig{}), std::invalid_argument);
}

TEST_CASE("plug-in information matches hand computations") {
    // state-free integrand: C = theta1^2 so the X-only theta1 information is
    // 2 / theta1^2 exactly
    FlatWeightModel flat;
    const ThetaPoint truth = FlatWeightModel::truth();
    const auto grid = make_moment_matched_grid(flat, truth, 200, 0.01, vec2(0.1, 0.0));
    const auto gam = plugin_information(flat, grid, truth);
    CHECK(gam.gamma1_xonly(0, 0) == doctest::Approx(2.0 / (truth.theta1[0] * truth.theta1[0])));

    // oscillator: Gamma33 = 12 mean(x^2) / (theta3^2 theta1^2) against a
    // direct loop, and the invertible-Jacobian identity Gamma11 = 2 Gamma1
    LinearOscillatorModel osc;
    const ThetaPoint th = LinearOscillatorModel::default_truth();
    SimConfig sim;
    sim.n = 800;
    sim.h = 0.01;
    sim.seed = 7;
    const auto ogrid = simulate_path(osc, th, sim);
    const auto og = plugin_information(osc, ogrid, th);

    double mean_x2 = 0.0;
    for (long j = 1; j <= ogrid.n(); ++j) {
        mean_x2 += ogrid.states(0, j - 1) * ogrid.states(0, j - 1);
    }
    mean_x2 /= static_cast<double>(ogrid.n());
    const double v = th.theta3[0] * th.theta3[0] * th.theta1[0] * th.theta1[0];
    CHECK(og.gamma33(0, 0) == doctest::Approx(12.0 * mean_x2 / v).epsilon(1e-12));
    CHECK(og.gamma11(0, 0) == doctest::Approx(2.0 * og.gamma1_xonly(0, 0)).epsilon(1e-12));
}

TEST_CASE("identifiability fields vanish at the truth and drop quadratically") {
    // scan grids are centered so the midpoint hits theta* exactly
    FlatWeightModel flat;
    const ThetaPoint truth = FlatWeightModel::truth();
    const auto grid = make_moment_matched_grid(flat, truth, 200, 0.01, vec2(0.4, 0.0));
    ScanSpec scan;
    scan.points = 21;
    const auto curves = empirical_identifiability(flat, grid, truth, scan);
    REQUIRE(curves.size() == 3);
    for (const auto& c : curves) {
        const auto& mid = c.points[c.points.size() / 2];
        CHECK(std::abs(mid.param_value - c.truth) < 1e-12);
        CHECK(std::abs(mid.field_value) < 1e-12);
        for (const auto& pt : c.points) CHECK(pt.field_value <= 1e-12);
        CHECK(c.chi_hat > 0.0);
    }

    // scalar linear drift: the theta2 field is exactly quadratic,
    // -(1/2) (theta2 - theta2*)^2 mean(x^2) / C
    auto linear = std::make_shared<StubModel>(
        Dimensions{1, 1, 1, 1, 1, 1}, unit_boxes(1, 1, 1),
        [](const VectorXd& z, const VectorXd& th2, VectorXd& out) {
            out.resize(1);
            out[0] = th2[0] * z[0];
        },
        [](const VectorXd&, const VectorXd& th1, MatrixXd& out) {
            out.setConstant(1, 1, th1[0]);
        },
        [](const VectorXd& z, const VectorXd&, VectorXd& out) {
            out.resize(1);
            out[0] = z[0];
        });
    LinearOscillatorModel osc;
    SimConfig sim;
    sim.n = 300;
    sim.h = 0.01;
    sim.seed = 3;
    const auto ogrid = simulate_path(osc, LinearOscillatorModel::default_truth(), sim);
    ThetaPoint lt{vec1(1.0), vec1(0.0), vec1(0.0)};
    const auto lcurves = empirical_identifiability(*linear, ogrid, lt, scan);
    double mean_x2 = 0.0;
    for (long j = 0; j < ogrid.n(); ++j) mean_x2 += ogrid.states(0, j) * ogrid.states(0, j);
    mean_x2 /= static_cast<double>(ogrid.n());
    for (const auto& pt : lcurves[1].points) {
        const double want = -0.5 * pt.param_value * pt.param_value * mean_x2;
        CHECK(pt.field_value == doctest::Approx(want).epsilon(1e-10));
    }

    // oscillator curves fit positive quadratic coefficients near theta*
    const auto ocurves =
        empirical_identifiability(osc, ogrid, LinearOscillatorModel::default_truth(), scan);
    for (const auto& c : ocurves) CHECK(c.chi_hat > 0.0);
}

TEST_CASE("joint warm and cold starts agree on well-conditioned data") {
    LinearOscillatorModel osc;
    SimConfig sim;
    sim.n = 2000;
    sim.h = 0.01;
    sim.seed = 4242;
    const auto grid = simulate_path(osc, LinearOscillatorModel::default_truth(), sim);
    EstimatorConfig cfg;
    const EstimateReport warm = estimate_joint(osc, grid, cfg);  // pipeline warm start
    const EstimateReport cold =
        estimate_joint(osc, grid, cfg, ThetaPoint{vec1(2.0), vec2(2.5, 0.4), vec1(0.5)});
    CHECK((warm.theta_hat.stacked() - cold.theta_hat.stacked()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fitzhugh-nagumo pipeline runs end to end") {
    FitzHughNagumoModel fhn;
    const ThetaPoint th = FitzHughNagumoModel::default_truth();
    SimConfig sim;
    sim.n = 4000;
    sim.h = 0.01;
    sim.seed = 31415;
    const auto grid = simulate_path(fhn, th, sim);
    const EstimateReport rep = estimate_adaptive(fhn, grid, EstimatorConfig{});
    // diffusion and the fast-rate theta3 coordinates land close to the truth
    CHECK(std::abs(rep.theta_hat.theta1[0] - th.theta1[0]) < 0.05);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(rep.theta_hat.theta3[c] - th.theta3[c]) < 10.0 * rep.stderr3[c] + 0.05);
    }
}
