// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria.  Run a subset by listing criterion numbers as arguments.

#include "hypoql/cli.hpp"
#include "hypoql/contrast.hpp"
#include "hypoql/estimate.hpp"
#include "hypoql/io.hpp"
#include "hypoql/models.hpp"
#include "hypoql/montecarlo.hpp"
#include "hypoql/rng.hpp"
#include "hypoql/simulate.hpp"
#include "test_support.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using namespace hypoql;
using namespace hypoql::testing;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] C%d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

struct StopWatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// ---------------------------------------------------------------------------
// C1: S S^{-1} identity and Schur log-det vs LU oracle

void criterion1() {
    CounterRng rng(0xC1, 0);
    auto random_matrix = [&](int rows, int cols) {
        MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
        return m;
    };
    double worst_identity = 0.0, worst_logdet = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const MatrixXd b = random_matrix(3, 3) + 3.0 * MatrixXd::Identity(3, 3);
        const MatrixXd hx = random_matrix(2, 3) + MatrixXd::Identity(2, 3);
        Dimensions dims{3, 2, 3, 1, 1, 1};
        StubModel stub(
            dims, unit_boxes(1, 1, 1),
            [](const VectorXd&, const VectorXd&, VectorXd& out) { out.setZero(3); },
            [b](const VectorXd&, const VectorXd&, MatrixXd& out) { out = b; },
            [hx](const VectorXd& z, const VectorXd&, VectorXd& out) {
                out = hx * z.head(3);
            });
        const VectorXd z = VectorXd::Zero(5);
        const MatrixXd s = eval_residual_cov(stub, z, vec1(1.0), vec1(1.0));
        const auto si = eval_residual_cov_inverse(stub, z, vec1(1.0), vec1(1.0));
        worst_identity = std::max(
            worst_identity,
            (s * si.inv - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff());
        Eigen::FullPivLU<MatrixXd> lu(s);
        const double lu_logdet = std::log(std::abs(lu.determinant()));
        worst_logdet = std::max(worst_logdet, std::abs(si.log_det - lu_logdet) /
                                                  std::max(1.0, std::abs(lu_logdet)));
    }
    const bool pass = worst_identity < 1e-10 && worst_logdet < 1e-8;
    report(1, "algebraic identities", pass,
           fmt("max |S S^-1 - I| = %.3e (tol 1e-10), max rel logdet err = %.3e (tol 1e-8)",
               worst_identity, worst_logdet));
}

// ---------------------------------------------------------------------------
// C2: analytic vs finite-difference gradients for every contrast

void criterion2() {
    LinearOscillatorModel osc;
    SimConfig sim;
    sim.n = 500;
    sim.h = 0.01;
    sim.seed = 0xC2;
    const auto grid = simulate_path(osc, LinearOscillatorModel::default_truth(), sim);
    const auto& boxes = osc.boxes();
    const ThetaPoint frozen = LinearOscillatorModel::default_truth();
    CounterRng rng(0xC2F, 0);

    auto sample = [&](const ParameterBox& box) {
        VectorXd t(box.dim());
        for (int i = 0; i < box.dim(); ++i) {
            t[i] = box.lower[i] + (0.2 + 0.6 * rng.uniform()) * (box.upper[i] - box.lower[i]);
        }
        return t;
    };
    auto fd_gradient = [](const VectorXd& x, auto&& value_at) {
        VectorXd g(x.size());
        VectorXd pt = x;
        for (int k = 0; k < x.size(); ++k) {
            const double s = 1e-5 * std::max(1.0, std::abs(x[k]));
            pt[k] = x[k] + s;
            const double vp = value_at(pt);
            pt[k] = x[k] - s;
            const double vm = value_at(pt);
            pt[k] = x[k];
            g[k] = (vp - vm) / (2.0 * s);
        }
        return g;
    };
    auto rel_err = [](const VectorXd& an, const VectorXd& fd) {
        double worst = 0.0;
        const double scale = fd.cwiseAbs().maxCoeff();
        for (int i = 0; i < an.size(); ++i) {
            worst = std::max(worst,
                             std::abs(an[i] - fd[i]) /
                                 std::max({std::abs(fd[i]), 1e-3 * scale, 1e-8}));
        }
        return worst;
    };

    double worst = 0.0;
    std::string worst_kind;
    for (int point = 0; point < 20; ++point) {
        const VectorXd t1 = sample(boxes.theta1);
        const VectorXd t2 = sample(boxes.theta2);
        const VectorXd t3 = sample(boxes.theta3);
        struct Case {
            const char* name;
            VectorXd x;
            std::function<ContrastEvaluation(const VectorXd&)> eval;
        };
        VectorXd x23(3);
        x23 << t2, t3;
        VectorXd xall(4);
        xall << t1, t2, t3;
        const std::vector<Case> cases = {
            {"initial_theta1", t1,
             [&](const VectorXd& x) { return initial_theta1_contrast(osc, grid, x); }},
            {"initial_theta2", t2,
             [&](const VectorXd& x) {
                 return initial_theta2_contrast(osc, grid, x, frozen.theta1);
             }},
            {"adaptive_theta3", t3,
             [&](const VectorXd& x) {
                 return adaptive_theta3_contrast(osc, grid, x, frozen.theta1, frozen.theta2);
             }},
            {"adaptive_theta23", x23,
             [&](const VectorXd& x) {
                 return adaptive_theta23_contrast(osc, grid, x.head(2), x.tail(1), frozen.theta1,
                                                  frozen.theta3);
             }},
            {"onestep_theta1", t1,
             [&](const VectorXd& x) {
                 return onestep_theta1_contrast(osc, grid, x, frozen.theta2, frozen.theta3);
             }},
            {"joint", xall,
             [&](const VectorXd& x) {
                 return joint_contrast(osc, grid, ThetaPoint::from_stacked(x, osc.dims()));
             }},
            {"inferior_theta3", t3,
             [&](const VectorXd& x) {
                 return inferior_theta3_contrast(osc, grid, x, frozen.theta1, frozen.theta2);
             }},
        };
        for (const auto& c : cases) {
            const VectorXd an = c.eval(c.x).gradient;
            const VectorXd fd =
                fd_gradient(c.x, [&](const VectorXd& v) { return c.eval(v).value; });
            const double err = rel_err(an, fd);
            if (err > worst) {
                worst = err;
                worst_kind = c.name;
            }
        }
    }
    report(2, "gradient fidelity", worst <= 1e-5,
           fmt("worst rel err %.3e (%s) over 20 points x 7 contrasts (tol 1e-5)", worst,
               worst_kind.c_str()));
}

// ---------------------------------------------------------------------------
// C3: wiener pair law

void criterion3() {
    bool pass = true;
    std::string detail;
    for (const double h : {1.0, 0.01}) {
        CounterRng rng(0xC3, h == 1.0 ? 0 : 1);
        const long n = 1000000;
        VectorXd dw, zeta;
        double sw = 0.0, sz = 0.0, swz = 0.0;
        for (long i = 0; i < n; ++i) {
            sample_wiener_pair(h, 1, rng, dw, zeta);
            sw += dw[0] * dw[0];
            sz += zeta[0] * zeta[0];
            swz += dw[0] * zeta[0];
        }
        sw /= n;
        sz /= n;
        swz /= n;
        const double h3 = h * h * h;
        const double var_ratio = sz / h3;
        const double corr = swz / std::sqrt(sw * sz);
        const double target = std::sqrt(3.0) / 2.0;
        pass = pass && var_ratio >= 0.99 && var_ratio <= 1.01 && std::abs(corr - target) <= 0.005;
        detail += fmt("h=%g: Var(zeta)/h^3 = %.4f, corr = %.4f;  ", h, var_ratio, corr);
    }
    report(3, "wiener pair law", pass, detail + "(bands [0.99,1.01], +-0.005)");
}

// ---------------------------------------------------------------------------
// shared Monte Carlo run for C4, C6, C7, C8, C9

std::optional<McResult> g_big_mc;

const McResult& big_mc() {
    if (!g_big_mc) {
        std::fprintf(stderr, "[acceptance] running shared MC: oscillator n=10000 h=0.005 R=500 "
                             "(adaptive, joint, inferior)...\n");
        StopWatch watch;
        McConfig cfg;
        cfg.model = "oscillator";
        cfg.replications = 500;
        cfg.schedule = {{10000, 0.005}};
        cfg.estimators = {EstimateMethod::adaptive, EstimateMethod::joint,
                          EstimateMethod::inferior_theta3};
        cfg.master_seed = 0xACCE4;
        cfg.substeps = 400;  // keeps data-generation bias far below the estimator noise floor
        g_big_mc = run_replications(cfg);
        std::fprintf(stderr, "[acceptance] shared MC done in %.1f s (%ld failed reps)\n",
                     watch.seconds(), g_big_mc->summary.failed_replications);
    }
    return *g_big_mc;
}

const CoordSummary* find_coord(const McResult& res, const std::string& est, int block,
                               int coord) {
    for (const auto& c : res.summary.coords) {
        if (c.estimator == est && c.block == block && c.coord == coord) return &c;
    }
    return nullptr;
}

void criterion4() {
    const McResult& res = big_mc();
    const CoordSummary* c = find_coord(res, "adaptive", 3, 0);
    if (!c || c->successes < 2) {
        report(4, "theta3 asymptotic normality", false, "no successful replications");
        return;
    }
    const double se = std::sqrt(c->scaled_var / static_cast<double>(c->successes));
    const double ratio = c->scaled_var / c->target_var;
    const bool mean_ok = std::abs(c->scaled_mean) <= 3.0 * se;
    const bool var_ok = ratio >= 0.8 && ratio <= 1.25;
    report(4, "theta3 asymptotic normality", mean_ok && var_ok,
           fmt("scaled mean %.4f (3SE band %.4f), var/target = %.3f (band [0.8,1.25]), R=%ld",
               c->scaled_mean, 3.0 * se, ratio, c->successes));
}

// ---------------------------------------------------------------------------
// C5: rate slopes

void criterion5() {
    std::fprintf(stderr, "[acceptance] running slope MC: 4 schedule points, R=200 each...\n");
    StopWatch watch;
    McConfig cfg;
    cfg.model = "oscillator";
    cfg.replications = 200;
    const double c_rule = 50.0 / std::pow(2500.0, 0.3);
    cfg.schedule = schedule_from_rule({2500, 5000, 10000, 20000}, c_rule, 0.7);
    cfg.estimators = {EstimateMethod::adaptive};
    cfg.master_seed = 0xACCE5;
    cfg.substeps = 400;
    const McResult res = run_replications(cfg);
    std::fprintf(stderr, "[acceptance] slope MC done in %.1f s\n", watch.seconds());

    const std::map<int, double> targets = {{1, -0.5}, {2, -0.15}, {3, -0.85}};
    bool pass = true;
    std::string detail;
    for (const auto& s : res.summary.slopes) {
        if (s.estimator != "adaptive") continue;
        const double target = targets.at(s.block);
        const bool ok = std::abs(s.slope - target) <= 0.15;
        pass = pass && ok;
        detail += fmt("theta%d: %.3f (target %.2f);  ", s.block, s.slope, target);
    }
    report(5, "rate slopes", pass, detail + "(tol +-0.15)");
}

// ---------------------------------------------------------------------------
// C6: efficiency gap for theta3

void criterion6() {
    const McResult& res = big_mc();
    const RatioReport ratio = variance_ratio_experiment(res);
    const bool pass = ratio.theta3_ratio >= 3.0 && ratio.theta3_ratio <= 5.0;
    report(6, "theta3 efficiency gap", pass,
           fmt("Var[inferior]/Var[adaptive] = %.3f, bootstrap CI [%.3f, %.3f], pairs=%ld "
               "(band [3,5])",
               ratio.theta3_ratio, ratio.theta3_lo, ratio.theta3_hi, ratio.pairs3));
    if (!pass) {
        // informational: the pipeline's own drift estimate makes the fitted
        // G correction absorb the correlated component of the Y-residual
        // noise (the theta2 normal equations cancel it exactly for this
        // model), so the Y-only estimator matches the adaptive one above.
        // Freezing the true (theta1, theta2) removes that coupling and the
        // factor-4 gap of the decoupled comparison reappears:
        std::fprintf(stderr,
                     "[acceptance] C6 note: running frozen-truth diagnostic (R=200)...\n");
        LinearOscillatorModel osc;
        const ThetaPoint th = LinearOscillatorModel::default_truth();
        const int R = 200;
        const long n = 10000;
        const double h = 0.005;
        std::vector<double> dec(R), ada(R);
        EstimatorConfig est;
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < R; ++r) {
            SimConfig sim;
            sim.n = n;
            sim.h = h;
            sim.substeps = 400;
            sim.seed = 0xDECA;
            sim.stream = static_cast<uint64_t>(r);
            const auto grid = simulate_path(osc, th, sim);
            OptimDiagnostics dg;
            auto oi = [&](const VectorXd& x, bool hess) {
                ContrastOptions o;
                o.want_hessian = hess;
                return inferior_theta3_contrast(osc, grid, x, th.theta1, th.theta2, o);
            };
            const VectorXd t3 = maximize(oi, osc.boxes().theta3, est.opt, dg);
            auto oa = [&](const VectorXd& x, bool hess) {
                ContrastOptions o;
                o.want_hessian = hess;
                return adaptive_theta3_contrast(osc, grid, x, th.theta1, th.theta2, o);
            };
            const VectorXd t3a = maximize(oa, osc.boxes().theta3, est.opt, dg);
            dec[r] = std::sqrt(n / h) * (t3[0] - th.theta3[0]);
            ada[r] = std::sqrt(n / h) * (t3a[0] - th.theta3[0]);
        }
        auto var_of = [](const std::vector<double>& v) {
            double m = 0.0, s = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            for (double x : v) s += (x - m) * (x - m);
            return s / static_cast<double>(v.size() - 1);
        };
        std::printf("       C6 info: with the true (theta1, theta2) frozen the ratio is %.2f\n",
                    var_of(dec) / var_of(ada));
    }
}

// ---------------------------------------------------------------------------
// C7: theta1 improvement

void criterion7() {
    const McResult& res = big_mc();
    const RatioReport ratio = variance_ratio_experiment(res);
    const bool ratio_ok = ratio.theta1_ratio >= 0.4 && ratio.theta1_ratio <= 0.65;

    // Hessian-ratio check on a single path at theta*
    LinearOscillatorModel osc;
    const ThetaPoint th = LinearOscillatorModel::default_truth();
    SimConfig sim;
    sim.n = 10000;
    sim.h = 0.005;
    sim.substeps = 400;
    sim.seed = 0xC7;
    const auto grid = simulate_path(osc, th, sim);
    ContrastOptions opts;
    opts.want_hessian = true;
    const auto one = onestep_theta1_contrast(osc, grid, th.theta1, th.theta2, th.theta3, opts);
    const auto init = initial_theta1_contrast(osc, grid, th.theta1, opts);
    const double hess_ratio = one.hessian(0, 0) / init.hessian(0, 0);
    const bool hess_ok = hess_ratio >= 1.7 && hess_ratio <= 2.3;

    report(7, "theta1 improvement", ratio_ok && hess_ok,
           fmt("Var[one-step]/Var[initial] = %.3f CI [%.3f, %.3f] (band [0.4,0.65]); "
               "Hessian ratio %.3f (band [1.7,2.3])",
               ratio.theta1_ratio, ratio.theta1_lo, ratio.theta1_hi, hess_ratio));
}

// ---------------------------------------------------------------------------
// C8: adaptive and joint agree to first order

void criterion8() {
    const McResult& res = big_mc();
    std::map<int, const RepRecord*> adaptive, joint;
    for (const auto& r : res.records) {
        if (!r.ok) continue;
        if (r.estimator == "adaptive") adaptive[r.rep] = &r;
        if (r.estimator == "joint") joint[r.rep] = &r;
    }
    std::vector<std::vector<double>> diffs(4);
    for (const auto& [rep, ra] : adaptive) {
        auto it = joint.find(rep);
        if (it == joint.end()) continue;
        const RepRecord* rj = it->second;
        diffs[0].push_back(std::abs(ra->scaled1[0] - rj->scaled1[0]));
        diffs[1].push_back(std::abs(ra->scaled2[0] - rj->scaled2[0]));
        diffs[2].push_back(std::abs(ra->scaled2[1] - rj->scaled2[1]));
        diffs[3].push_back(std::abs(ra->scaled3[0] - rj->scaled3[0]));
    }
    bool pass = !diffs[0].empty();
    std::string detail;
    const char* labels[4] = {"theta1", "theta2[0]", "theta2[1]", "theta3"};
    for (int i = 0; i < 4; ++i) {
        if (diffs[i].empty()) {
            pass = false;
            continue;
        }
        std::sort(diffs[i].begin(), diffs[i].end());
        const double median = diffs[i][diffs[i].size() / 2];
        pass = pass && median < 0.5;
        detail += fmt("%s: %.3f;  ", labels[i], median);
    }
    report(8, "adaptive equals joint to first order", pass,
           "median rate-scaled |difference| " + detail + "(tol < 0.5)");
}

// ---------------------------------------------------------------------------
// C9: coverage of plug-in 95% intervals

void criterion9() {
    const McResult& res = big_mc();
    bool pass = true;
    std::string detail;
    for (int block = 1; block <= 3; ++block) {
        const int coords = block == 2 ? 2 : 1;
        for (int coord = 0; coord < coords; ++coord) {
            const CoordSummary* c = find_coord(res, "adaptive", block, coord);
            if (!c) {
                pass = false;
                continue;
            }
            const bool ok = c->coverage95 >= 0.90 && c->coverage95 <= 0.99;
            pass = pass && ok;
            detail += fmt("theta%d[%d]: %.3f;  ", block, coord, c->coverage95);
        }
    }
    report(9, "interval coverage", pass, detail + "(band [0.90,0.99])");
}

// ---------------------------------------------------------------------------
// C10: byte-identical reruns of every command

void criterion10() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "hypoql_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);

    const fs::path cfgpath = base / "cfg.json";
    {
        std::ofstream os(cfgpath);
        os << R"({"sim": {"n": 2000, "h": 0.01, "seed": 12345},
                  "identify": {"points": 11},
                  "mc": {"replications": 2, "master_seed": 6,
                         "estimators": ["adaptive"],
                         "schedule": [{"n": 500, "h": 0.02}]}})";
    }

    auto slurp = [](const fs::path& p) {
        std::ifstream is(p);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };

    bool pass = true;
    std::string detail;
    for (int round = 0; round < 2; ++round) {
        const fs::path dir = base / ("round" + std::to_string(round));
        fs::create_directories(dir);
        const std::string d = dir.string();
        const std::string cfg = cfgpath.string();
        int rc = 0;
        rc |= cli::run({"simulate", "--config", cfg, "--out", d});
        const std::string data = (dir / "observations.csv").string();
        rc |= cli::run({"estimate", "--config", cfg, "--data", data, "--out", d,
                        "--dump-contrast-trace"});
        rc |= cli::run({"fisher", "--config", cfg, "--data", data, "--out", d});
        rc |= cli::run({"identify", "--config", cfg, "--data", data, "--out", d});
        rc |= cli::run({"mc", "--config", cfg, "--out", d});
        if (rc != 0) {
            pass = false;
            detail = "a command exited nonzero";
        }
    }
    if (pass) {
        for (const char* f :
             {"observations.csv", "estimate.json", "contrast_trace.csv", "fisher.json",
              "identifiability.csv", "mc_summary.json", "mc_raw.csv", "mc_qq.csv"}) {
            const std::string a = slurp(base / "round0" / f);
            const std::string b = slurp(base / "round1" / f);
            if (a.empty() || a != b) {
                pass = false;
                detail += fmt("%s differs; ", f);
            }
        }
        if (pass) detail = "8 output files byte-identical across reruns";
    }
    report(10, "determinism", pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

    StopWatch total;
    if (wanted(1)) criterion1();
    if (wanted(2)) criterion2();
    if (wanted(3)) criterion3();
    if (wanted(4)) criterion4();
    if (wanted(5)) criterion5();
    if (wanted(6)) criterion6();
    if (wanted(7)) criterion7();
    if (wanted(8)) criterion8();
    if (wanted(9)) criterion9();
    if (wanted(10)) criterion10();
    std::fprintf(stderr, "[acceptance] total %.1f s, %d failure(s)\n", total.seconds(),
                 g_failures);
    return g_failures;
}
