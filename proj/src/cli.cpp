#include "hypoql/cli.hpp"

#include "hypoql/contrast.hpp"
#include "hypoql/io.hpp"
#include "hypoql/models.hpp"
#include "hypoql/montecarlo.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace hypoql::cli {

namespace {

using nlohmann::json;

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "hypoql_out";
    long seed = -1;  // -1 = keep config value
    std::string model;
    std::string data_path;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config file not found: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config parse error: " + std::string(e.what()));
    }
    return j;
}

VectorXd vec_from_json(const json& arr) {
    std::vector<double> v = arr.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<long>(v.size()));
}

std::optional<ThetaPoint> theta_from_config(const json& cfg) {
    if (!cfg.contains("theta")) return std::nullopt;
    const json& t = cfg.at("theta");
    return ThetaPoint{vec_from_json(t.at("theta1")), vec_from_json(t.at("theta2")),
                      vec_from_json(t.at("theta3"))};
}

std::string model_name(const json& cfg, const CommonFlags& flags) {
    if (!flags.model.empty()) return flags.model;
    return cfg.value("model", std::string("oscillator"));
}

std::shared_ptr<const Model> model_from_config(const json& cfg, const CommonFlags& flags) {
    const json params = cfg.value("model_params", json::object());
    return ModelRegistry::instance().make(model_name(cfg, flags), params);
}

SimConfig sim_from_config(const json& cfg, const CommonFlags& flags) {
    SimConfig sim;
    if (cfg.contains("sim")) {
        const json& s = cfg.at("sim");
        sim.n = s.value("n", sim.n);
        sim.h = s.value("h", sim.h);
        sim.substeps = s.value("substeps", sim.substeps);
        sim.burn_in = s.value("burn_in", sim.burn_in);
        sim.seed = s.value("seed", sim.seed);
        if (s.contains("z0")) sim.z0 = vec_from_json(s.at("z0"));
    }
    if (flags.seed >= 0) sim.seed = static_cast<uint64_t>(flags.seed);
    return sim;
}

OptimizerConfig optimizer_from_config(const json& cfg) {
    OptimizerConfig opt;
    if (cfg.contains("optimizer")) {
        const json& o = cfg.at("optimizer");
        opt.grid_points_per_dim = o.value("grid_points_per_dim", opt.grid_points_per_dim);
        opt.max_total_starts = o.value("max_total_starts", opt.max_total_starts);
        opt.max_newton_starts = o.value("max_newton_starts", opt.max_newton_starts);
        opt.max_newton_iters = o.value("max_newton_iters", opt.max_newton_iters);
        opt.gradient_tol = o.value("gradient_tol", opt.gradient_tol);
        opt.armijo_c = o.value("armijo_c", opt.armijo_c);
    }
    return opt;
}

int default_workers() {
    if (const char* env = std::getenv("HYPOQL_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 0;
}

McConfig mc_from_config(const json& cfg, const CommonFlags& flags) {
    McConfig mc;
    mc.model = model_name(cfg, flags);
    mc.theta_true = theta_from_config(cfg);
    mc.workers = default_workers();
    mc.est.opt = optimizer_from_config(cfg);
    const SimConfig sim = sim_from_config(cfg, flags);
    mc.substeps = sim.substeps;
    mc.burn_in = sim.burn_in;
    mc.z0 = sim.z0;

    if (cfg.contains("mc")) {
        const json& m = cfg.at("mc");
        mc.replications = m.value("replications", mc.replications);
        mc.master_seed = m.value("master_seed", mc.master_seed);
        mc.workers = m.value("workers", mc.workers);
        if (m.contains("schedule")) {
            const json& s = m.at("schedule");
            mc.schedule.clear();
            if (s.is_array()) {
                for (const auto& pt : s) {
                    mc.schedule.push_back({pt.at("n").get<long>(), pt.at("h").get<double>()});
                }
            } else {
                mc.schedule = schedule_from_rule(s.at("n_list").get<std::vector<long>>(),
                                                 s.at("c").get<double>(),
                                                 s.at("alpha").get<double>());
            }
        } else {
            mc.schedule = {{sim.n, sim.h}};
        }
        if (m.contains("estimators")) {
            mc.estimators.clear();
            for (const auto& e : m.at("estimators")) {
                const std::string name = e.get<std::string>();
                if (name == "adaptive") mc.estimators.push_back(EstimateMethod::adaptive);
                else if (name == "joint") mc.estimators.push_back(EstimateMethod::joint);
                else if (name == "initial_only" || name == "initial")
                    mc.estimators.push_back(EstimateMethod::initial_only);
                else if (name == "inferior_theta3")
                    mc.estimators.push_back(EstimateMethod::inferior_theta3);
                else throw std::invalid_argument("unknown estimator: " + name);
            }
        }
    } else {
        mc.schedule = {{sim.n, sim.h}};
    }
    if (flags.seed >= 0) mc.master_seed = static_cast<uint64_t>(flags.seed);
    return mc;
}

std::filesystem::path prepare_out_dir(const CommonFlags& flags) {
    std::filesystem::path dir(flags.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_simulate(const CommonFlags& flags) {
    const json cfg = load_config(flags.config_path);
    auto model = model_from_config(cfg, flags);
    const ThetaPoint theta =
        theta_from_config(cfg).value_or(default_truth_for(model_name(cfg, flags)));
    const SimConfig sim = sim_from_config(cfg, flags);
    const ObservationGrid grid = simulate_path(*model, theta, sim);
    const auto dir = prepare_out_dir(flags);
    write_observations_csv(grid, (dir / "observations.csv").string());
    std::cout << "wrote " << (dir / "observations.csv").string() << " (n=" << grid.n()
              << ", h=" << grid.h << ")\n";
    return 0;
}

int cmd_estimate(const CommonFlags& flags, const std::string& estimator, bool dump_trace) {
    const json cfg = load_config(flags.config_path);
    auto model = model_from_config(cfg, flags);
    if (flags.data_path.empty()) throw std::invalid_argument("estimate: --data is required");
    const ObservationGrid grid = load_observations(flags.data_path, model->dims());

    EstimatorConfig est;
    est.opt = optimizer_from_config(cfg);

    EstimateReport rep;
    if (estimator == "adaptive") rep = estimate_adaptive(*model, grid, est);
    else if (estimator == "joint") rep = estimate_joint(*model, grid, est);
    else if (estimator == "initial" || estimator == "initial_only")
        rep = estimate_initial_only(*model, grid, est);
    else if (estimator == "inferior_theta3") rep = estimate_inferior_theta3(*model, grid, est);
    else throw std::invalid_argument("unknown estimator: " + estimator);

    const auto dir = prepare_out_dir(flags);
    write_json(report_to_json(rep), (dir / "estimate.json").string());
    if (dump_trace) {
        std::vector<std::pair<long, double>> trace;
        ContrastOptions copts;
        copts.want_gradient = false;
        copts.trace = &trace;
        joint_contrast(*model, grid, rep.theta_hat, copts);
        write_contrast_trace_csv(trace, (dir / "contrast_trace.csv").string());
    }
    std::cout << "wrote " << (dir / "estimate.json").string() << "\n";
    return 0;
}

int cmd_mc(const CommonFlags& flags) {
    const json cfg = load_config(flags.config_path);
    const McConfig mc = mc_from_config(cfg, flags);
    const McResult result = run_replications(mc);
    const auto dir = prepare_out_dir(flags);
    write_json(summary_to_json(result), (dir / "mc_summary.json").string());
    write_mc_raw_csv(result, (dir / "mc_raw.csv").string());
    write_mc_qq_csv(result, (dir / "mc_qq.csv").string());
    std::cout << "wrote " << (dir / "mc_summary.json").string() << " (+raw, +qq)\n";
    return 0;
}

int cmd_fisher(const CommonFlags& flags) {
    const json cfg = load_config(flags.config_path);
    auto model = model_from_config(cfg, flags);
    if (flags.data_path.empty()) throw std::invalid_argument("fisher: --data is required");
    const ObservationGrid grid = load_observations(flags.data_path, model->dims());
    const ThetaPoint theta =
        theta_from_config(cfg).value_or(default_truth_for(model_name(cfg, flags)));
    const InformationMatrices gamma = plugin_information(*model, grid, theta);
    const auto dir = prepare_out_dir(flags);
    json j = information_to_json(gamma);
    j["theta1"] = std::vector<double>(theta.theta1.data(), theta.theta1.data() + theta.theta1.size());
    j["theta2"] = std::vector<double>(theta.theta2.data(), theta.theta2.data() + theta.theta2.size());
    j["theta3"] = std::vector<double>(theta.theta3.data(), theta.theta3.data() + theta.theta3.size());
    write_json(j, (dir / "fisher.json").string());
    std::cout << "wrote " << (dir / "fisher.json").string() << "\n";
    return 0;
}

int cmd_identify(const CommonFlags& flags, int points) {
    const json cfg = load_config(flags.config_path);
    auto model = model_from_config(cfg, flags);
    if (flags.data_path.empty()) throw std::invalid_argument("identify: --data is required");
    const ObservationGrid grid = load_observations(flags.data_path, model->dims());
    const ThetaPoint theta =
        theta_from_config(cfg).value_or(default_truth_for(model_name(cfg, flags)));
    ScanSpec scan;
    if (cfg.contains("identify")) scan.points = cfg.at("identify").value("points", scan.points);
    if (points > 0) scan.points = points;
    const auto curves = empirical_identifiability(*model, grid, theta, scan);
    const auto dir = prepare_out_dir(flags);
    write_ident_csv(curves, (dir / "identifiability.csv").string());
    std::cout << "wrote " << (dir / "identifiability.csv").string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"degenerate-diffusion simulation and quasi-likelihood estimation"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string estimator = "adaptive";
    bool dump_trace = false;
    int points = -1;

    auto add_common = [&](CLI::App* cmd, bool with_data) {
        cmd->add_option("--config", flags.config_path, "JSON config file");
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--seed", flags.seed, "override the config seed");
        cmd->add_option("--model", flags.model, "registered model name");
        if (with_data) cmd->add_option("--data", flags.data_path, "observation CSV");
    };

    CLI::App* sim = app.add_subcommand("simulate", "simulate a path and write observations CSV");
    add_common(sim, false);
    CLI::App* est = app.add_subcommand("estimate", "estimate parameters from a data CSV");
    add_common(est, true);
    est->add_option("--estimator", estimator,
                    "adaptive | joint | initial_only | inferior_theta3");
    est->add_flag("--dump-contrast-trace", dump_trace,
                  "write per-increment joint contrast values at theta_hat");
    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo replication study");
    add_common(mc, false);
    CLI::App* fisher = app.add_subcommand("fisher", "plug-in information matrices at theta");
    add_common(fisher, true);
    CLI::App* ident = app.add_subcommand("identify", "empirical identifiability scans");
    add_common(ident, true);
    ident->add_option("--points", points, "scan points per coordinate");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e);
            return 0;
        }
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(flags);
        if (est->parsed()) return cmd_estimate(flags, estimator, dump_trace);
        if (mc->parsed()) return cmd_mc(flags);
        if (fisher->parsed()) return cmd_fisher(flags);
        if (ident->parsed()) return cmd_identify(flags, points);
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "input format error: " << e.what() << "\n";
        return 1;
    } catch (const NonEquidistantError& e) {
        std::cerr << "input format error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace hypoql::cli
