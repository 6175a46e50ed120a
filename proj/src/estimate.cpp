#include "hypoql/estimate.hpp"

#include <cmath>

namespace hypoql {

namespace {

struct NewtonStep {
    VectorXd image;
    bool hessian_ok = false;
};

NewtonStep newton_image(const VectorXd& x, const ContrastEvaluation& eval, double cond_limit) {
    NewtonStep out;
    out.image = onestep_update(x, eval, cond_limit, out.hessian_ok);
    return out;
}

VectorXd stderr_from_gamma(const MatrixXd& gamma, double rate, double inflation = 1.0) {
    Eigen::FullPivLU<MatrixXd> lu(gamma);
    if (!lu.isInvertible()) {
        return VectorXd::Constant(gamma.rows(), std::numeric_limits<double>::quiet_NaN());
    }
    const MatrixXd inv = lu.inverse();
    VectorXd out(gamma.rows());
    for (int i = 0; i < gamma.rows(); ++i) {
        out[i] = inflation * std::sqrt(std::max(inv(i, i), 0.0)) / rate;
    }
    return out;
}

void fill_rates(EstimateReport& rep, const ObservationGrid& grid) {
    rep.n = grid.n();
    rep.h = grid.h;
    const double n = static_cast<double>(grid.n());
    rep.rate1 = std::sqrt(n);
    rep.rate2 = std::sqrt(n * grid.h);
    rep.rate3 = std::sqrt(n / grid.h);
}

void fill_stderr(EstimateReport& rep, bool theta1_from_xonly, double theta3_inflation = 1.0) {
    const MatrixXd& g1 = theta1_from_xonly ? rep.gamma.gamma1_xonly : rep.gamma.gamma11;
    rep.stderr1 = stderr_from_gamma(g1, rep.rate1);
    rep.stderr2 = stderr_from_gamma(rep.gamma.gamma22, rep.rate2);
    rep.stderr3 = stderr_from_gamma(rep.gamma.gamma33, rep.rate3, theta3_inflation);
}

struct InitialStages {
    VectorXd theta1, theta2, theta3;
    std::vector<StageDiagnostics> stages;
};

InitialStages run_initial_stages(const Model& model, const ObservationGrid& grid,
                                 const EstimatorConfig& cfg, bool with_theta3) {
    InitialStages out;
    ContrastOptions base;
    base.exec = cfg.exec;

    OptimDiagnostics diag;
    auto obj1 = [&](const VectorXd& x, bool hess) {
        ContrastOptions o = base;
        o.want_hessian = hess;
        return initial_theta1_contrast(model, grid, x, o);
    };
    out.theta1 = maximize(obj1, model.boxes().theta1, cfg.opt, diag, {}, "initial_theta1");
    out.stages.push_back({"initial_theta1", diag});

    auto obj2 = [&](const VectorXd& x, bool hess) {
        ContrastOptions o = base;
        o.want_hessian = hess;
        return initial_theta2_contrast(model, grid, x, out.theta1, o);
    };
    out.theta2 = maximize(obj2, model.boxes().theta2, cfg.opt, diag, {}, "initial_theta2");
    out.stages.push_back({"initial_theta2", diag});

    if (with_theta3) {
        auto obj3 = [&](const VectorXd& x, bool hess) {
            ContrastOptions o = base;
            o.want_hessian = hess;
            return adaptive_theta3_contrast(model, grid, x, out.theta1, out.theta2, o);
        };
        out.theta3 = maximize(obj3, model.boxes().theta3, cfg.opt, diag, {}, "adaptive_theta3");
        out.stages.push_back({"adaptive_theta3", diag});
    }
    return out;
}

void require_min_n(const ObservationGrid& grid, const EstimatorConfig& cfg) {
    if (grid.n() < cfg.min_n) {
        throw std::invalid_argument("estimation needs at least " + std::to_string(cfg.min_n) +
                                    " increments, got " + std::to_string(grid.n()));
    }
}

}  // namespace

VectorXd onestep_update(const VectorXd& x, const ContrastEvaluation& eval, double cond_limit,
                        bool& ok) {
    ok = false;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(eval.hessian);
    const VectorXd abs_ev = es.eigenvalues().cwiseAbs();
    const double emax = abs_ev.maxCoeff();
    const double emin = abs_ev.minCoeff();
    if (!(emin > 0.0) || emax / emin > cond_limit) return x;
    ok = true;
    return x - es.eigenvectors() *
                   (es.eigenvectors().transpose() * eval.gradient).cwiseQuotient(es.eigenvalues());
}

std::string method_name(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::initial_only: return "initial";
        case EstimateMethod::adaptive: return "adaptive";
        case EstimateMethod::joint: return "joint";
        case EstimateMethod::inferior_theta3: return "inferior_theta3";
    }
    return "?";
}

EstimateReport estimate_adaptive(const Model& model, const ObservationGrid& grid,
                                 const EstimatorConfig& cfg) {
    require_min_n(grid, cfg);
    const auto& boxes = model.boxes();
    InitialStages init = run_initial_stages(model, grid, cfg, true);

    EstimateReport rep;
    rep.method = EstimateMethod::adaptive;
    rep.theta_initial = ThetaPoint{init.theta1, init.theta2, init.theta3};
    rep.stages = std::move(init.stages);
    fill_rates(rep, grid);

    ContrastOptions copts;
    copts.exec = cfg.exec;
    copts.want_hessian = true;

    // one Newton step for theta1 on the S-form contrast
    const ContrastEvaluation e1 =
        onestep_theta1_contrast(model, grid, init.theta1, init.theta2, init.theta3, copts);
    const NewtonStep s1 = newton_image(init.theta1, e1, cfg.hessian_condition_limit);

    // one Newton step for (theta2, theta3) on the frozen-weight contrast
    const ContrastEvaluation e23 = adaptive_theta23_contrast(
        model, grid, init.theta2, init.theta3, init.theta1, init.theta3, copts);
    VectorXd x23(model.dims().p2 + model.dims().p3);
    x23 << init.theta2, init.theta3;
    const NewtonStep s23 = newton_image(x23, e23, cfg.hessian_condition_limit);

    bool ok = s1.hessian_ok && s23.hessian_ok;
    ThetaPoint onestep = rep.theta_initial;
    if (ok) {
        onestep.theta1 = s1.image;
        onestep.theta2 = s23.image.head(model.dims().p2);
        onestep.theta3 = s23.image.tail(model.dims().p3);
        ok = boxes.theta1.contains_closure(onestep.theta1) &&
             boxes.theta2.contains_closure(onestep.theta2) &&
             boxes.theta3.contains_closure(onestep.theta3);
        if (ok && (boxes.theta1.on_boundary(onestep.theta1) ||
                   boxes.theta2.on_boundary(onestep.theta2) ||
                   boxes.theta3.on_boundary(onestep.theta3))) {
            ok = false;  // boundary image counts as outside the open box
        }
    }
    // the fallback value on the complement event is the initial estimator
    rep.theta_hat = ok ? onestep : rep.theta_initial;
    rep.onestep_event_ok = ok;

    rep.gamma = plugin_information(model, grid, rep.theta_hat, cfg.exec);
    fill_stderr(rep, false);
    return rep;
}

EstimateReport estimate_initial_only(const Model& model, const ObservationGrid& grid,
                                     const EstimatorConfig& cfg) {
    require_min_n(grid, cfg);
    InitialStages init = run_initial_stages(model, grid, cfg, true);

    EstimateReport rep;
    rep.method = EstimateMethod::initial_only;
    rep.theta_initial = ThetaPoint{init.theta1, init.theta2, init.theta3};
    rep.theta_hat = rep.theta_initial;
    rep.stages = std::move(init.stages);
    rep.onestep_event_ok = false;
    fill_rates(rep, grid);
    rep.gamma = plugin_information(model, grid, rep.theta_hat, cfg.exec);
    fill_stderr(rep, true);  // initial theta1 comes from the X-only contrast
    return rep;
}

EstimateReport estimate_joint(const Model& model, const ObservationGrid& grid,
                              const EstimatorConfig& cfg, const std::optional<ThetaPoint>& warm) {
    require_min_n(grid, cfg);
    const auto& d = model.dims();
    const auto& boxes = model.boxes();

    EstimateReport rep;
    rep.method = EstimateMethod::joint;
    fill_rates(rep, grid);

    std::vector<VectorXd> warm_starts;
    if (warm.has_value()) {
        warm_starts.push_back(warm->stacked());
        rep.theta_initial = *warm;
    } else {
        try {
            EstimateReport adaptive = estimate_adaptive(model, grid, cfg);
            warm_starts.push_back(adaptive.theta_hat.stacked());
            rep.theta_initial = adaptive.theta_hat;
            rep.stages = adaptive.stages;
        } catch (const Error&) {
            // pipeline warm start is an acceleration, not a requirement
        }
    }

    ParameterBox full;
    full.lower.resize(d.p());
    full.upper.resize(d.p());
    full.lower << boxes.theta1.lower, boxes.theta2.lower, boxes.theta3.lower;
    full.upper << boxes.theta1.upper, boxes.theta2.upper, boxes.theta3.upper;

    auto obj = [&](const VectorXd& x, bool hess) {
        ContrastOptions o;
        o.exec = cfg.exec;
        o.want_hessian = hess;
        return joint_contrast(model, grid, ThetaPoint::from_stacked(x, d), o);
    };
    OptimDiagnostics diag;
    const VectorXd xhat = maximize(obj, full, cfg.opt, diag, warm_starts, "joint");
    rep.stages.push_back({"joint", diag});
    rep.theta_hat = ThetaPoint::from_stacked(xhat, d);
    rep.onestep_event_ok = false;

    rep.gamma = plugin_information(model, grid, rep.theta_hat, cfg.exec);
    fill_stderr(rep, false);
    return rep;
}

EstimateReport estimate_inferior_theta3(const Model& model, const ObservationGrid& grid,
                                        const EstimatorConfig& cfg) {
    require_min_n(grid, cfg);
    InitialStages init = run_initial_stages(model, grid, cfg, false);

    EstimateReport rep;
    rep.method = EstimateMethod::inferior_theta3;
    rep.stages = std::move(init.stages);
    fill_rates(rep, grid);

    auto obj = [&](const VectorXd& x, bool hess) {
        ContrastOptions o;
        o.exec = cfg.exec;
        o.want_hessian = hess;
        return inferior_theta3_contrast(model, grid, x, init.theta1, init.theta2, o);
    };
    OptimDiagnostics diag;
    const VectorXd theta3 =
        maximize(obj, model.boxes().theta3, cfg.opt, diag, {}, "inferior_theta3");
    rep.stages.push_back({"inferior_theta3", diag});

    rep.theta_hat = ThetaPoint{init.theta1, init.theta2, theta3};
    rep.theta_initial = rep.theta_hat;
    rep.onestep_event_ok = false;
    rep.gamma = plugin_information(model, grid, rep.theta_hat, cfg.exec);
    // the Y-only estimator carries 4x the asymptotic variance of the adaptive one
    fill_stderr(rep, true, 2.0);
    return rep;
}

InformationMatrices plugin_information(const Model& model, const ObservationGrid& grid,
                                       const ThetaPoint& theta_hat, Exec) {
    const auto& d = model.dims();
    InformationMatrices out;
    out.gamma11.setZero(d.p1, d.p1);
    out.gamma22.setZero(d.p2, d.p2);
    out.gamma33.setZero(d.p3, d.p3);
    out.gamma1_xonly.setZero(d.p1, d.p1);

    VectorXd z;
    MatrixXd B, C, Hx, HxC, V, Cinv, Vinv, dA2, dH3, T2, T3;
    std::vector<MatrixXd> dB1, dC1, cx(static_cast<size_t>(d.p1)), vx(static_cast<size_t>(d.p1));
    SpdCholesky cholC, cholV;
    long used = 0;

    for (long j = 1; j <= grid.n(); ++j) {
        z = grid.states.col(j - 1);
        model.x_diffusion(z, theta_hat.theta1, B);
        C.noalias() = B * B.transpose();
        model.y_drift_jac_x(z, theta_hat.theta3, Hx);
        HxC.noalias() = Hx * C;
        V.noalias() = HxC * Hx.transpose();
        if (!cholC.factor(C) || !cholV.factor(V)) {
            ++out.failures;
            continue;
        }
        ++used;
        cholC.inverse_into(Cinv);
        cholV.inverse_into(Vinv);

        model.x_diffusion_dtheta(z, theta_hat.theta1, dB1);
        dC1.resize(dB1.size());
        for (int k = 0; k < d.p1; ++k) {
            const MatrixXd tmp = dB1[static_cast<size_t>(k)] * B.transpose();
            dC1[static_cast<size_t>(k)] = tmp + tmp.transpose();
            cx[static_cast<size_t>(k)] = Cinv * dC1[static_cast<size_t>(k)];
            vx[static_cast<size_t>(k)] =
                Vinv * (Hx * dC1[static_cast<size_t>(k)] * Hx.transpose());
        }
        for (int a = 0; a < d.p1; ++a) {
            for (int b = 0; b < d.p1; ++b) {
                const double tr_c =
                    0.5 * (cx[static_cast<size_t>(a)] * cx[static_cast<size_t>(b)]).trace();
                const double tr_v =
                    0.5 * (vx[static_cast<size_t>(a)] * vx[static_cast<size_t>(b)]).trace();
                out.gamma1_xonly(a, b) += tr_c;
                out.gamma11(a, b) += tr_c + tr_v;
            }
        }

        model.x_drift_dtheta(z, theta_hat.theta2, dA2);
        T2.noalias() = Cinv * dA2;
        out.gamma22.noalias() += dA2.transpose() * T2;

        model.y_drift_dtheta(z, theta_hat.theta3, dH3);
        T3.noalias() = Vinv * dH3;
        out.gamma33.noalias() += 12.0 * dH3.transpose() * T3;
    }

    if (used == 0) throw Error("plug-in information: every state failed the SPD factorization");
    const double inv_used = 1.0 / static_cast<double>(used);
    out.gamma11 *= inv_used;
    out.gamma22 *= inv_used;
    out.gamma33 *= inv_used;
    out.gamma1_xonly *= inv_used;
    return out;
}

std::vector<IdentCurve> empirical_identifiability(const Model& model, const ObservationGrid& grid,
                                                  const ThetaPoint& theta_star,
                                                  const ScanSpec& scan) {
    const auto& d = model.dims();
    const auto& boxes = model.boxes();
    const long n = grid.n();
    std::vector<IdentCurve> curves;

    // reference quantities at theta*
    std::vector<MatrixXd> Cstar(static_cast<size_t>(n));
    std::vector<VectorXd> Astar(static_cast<size_t>(n)), Hstar(static_cast<size_t>(n));
    std::vector<SpdCholesky> cholCstar(static_cast<size_t>(n));
    {
        VectorXd z, a, hdrift;
        MatrixXd B;
        for (long j = 0; j < n; ++j) {
            z = grid.states.col(j);
            model.x_diffusion(z, theta_star.theta1, B);
            Cstar[static_cast<size_t>(j)] = B * B.transpose();
            cholCstar[static_cast<size_t>(j)].factor(Cstar[static_cast<size_t>(j)]);
            model.x_drift(z, theta_star.theta2, a);
            Astar[static_cast<size_t>(j)] = a;
            model.y_drift(z, theta_star.theta3, hdrift);
            Hstar[static_cast<size_t>(j)] = hdrift;
        }
    }

    auto field1 = [&](const VectorXd& theta1) {
        VectorXd z;
        MatrixXd B, C, Cinv;
        SpdCholesky chol;
        long double acc = 0.0L;
        long used = 0;
        for (long j = 0; j < n; ++j) {
            z = grid.states.col(j);
            model.x_diffusion(z, theta1, B);
            C.noalias() = B * B.transpose();
            if (!chol.factor(C)) continue;
            chol.inverse_into(Cinv);
            const auto& cs = Cstar[static_cast<size_t>(j)];
            acc += (Cinv * cs).trace() - d.dx + chol.log_det() -
                   cholCstar[static_cast<size_t>(j)].log_det();
            ++used;
        }
        return used == 0 ? 0.0 : static_cast<double>(-0.5L * acc / used);
    };

    auto field2 = [&](const VectorXd& theta2) {
        VectorXd z, a, diff;
        long double acc = 0.0L;
        long used = 0;
        for (long j = 0; j < n; ++j) {
            z = grid.states.col(j);
            model.x_drift(z, theta2, a);
            diff = a - Astar[static_cast<size_t>(j)];
            acc += cholCstar[static_cast<size_t>(j)].quad_inv(diff);
            ++used;
        }
        return used == 0 ? 0.0 : static_cast<double>(-0.5L * acc / used);
    };

    auto field3 = [&](const VectorXd& theta3) {
        VectorXd z, hdrift, diff;
        MatrixXd Hx, V;
        SpdCholesky chol;
        long double acc = 0.0L;
        long used = 0;
        for (long j = 0; j < n; ++j) {
            z = grid.states.col(j);
            model.y_drift_jac_x(z, theta3, Hx);
            V.noalias() = Hx * Cstar[static_cast<size_t>(j)] * Hx.transpose();
            if (!chol.factor(V)) continue;
            model.y_drift(z, theta3, hdrift);
            diff = hdrift - Hstar[static_cast<size_t>(j)];
            acc += 6.0 * chol.quad_inv(diff);
            ++used;
        }
        return used == 0 ? 0.0 : static_cast<double>(-acc / used);
    };

    auto scan_block = [&](int block, const ParameterBox& box, const VectorXd& center,
                          auto&& field) {
        for (int c = 0; c < box.dim(); ++c) {
            IdentCurve curve;
            curve.block = block;
            curve.coord = c;
            curve.truth = center[c];
            VectorXd theta = center;
            double sxx = 0.0, sxy = 0.0;
            const double window = 0.25 * box.width()[c];
            for (int i = 0; i < scan.points; ++i) {
                theta[c] = box.lower[c] + box.width()[c] * (i + 0.5) / scan.points;
                const double v = field(theta);
                curve.points.push_back({theta[c], v});
                const double delta = theta[c] - center[c];
                if (std::abs(delta) <= window && delta != 0.0) {
                    sxx += delta * delta * delta * delta;
                    sxy += delta * delta * v;
                }
            }
            curve.chi_hat = sxx > 0.0 ? -sxy / sxx : 0.0;
            curves.push_back(std::move(curve));
        }
    };

    scan_block(1, boxes.theta1, theta_star.theta1, field1);
    scan_block(2, boxes.theta2, theta_star.theta2, field2);
    scan_block(3, boxes.theta3, theta_star.theta3, field3);
    return curves;
}

}  // namespace hypoql
