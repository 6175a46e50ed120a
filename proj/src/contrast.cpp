#include "hypoql/contrast.hpp"

#include <cmath>
#include <limits>

namespace hypoql {

namespace {

constexpr long kChunk = 256;

// High-precision accumulator.  Chunked sums with a fixed-shape pairwise
// reduction keep every result independent of thread count and processing
// order well below the 1e-10 reproducibility budget.
struct Accum {
    long double value = 0.0L;
    std::vector<long double> grad;
    std::vector<long double> hess;  // row-major, only for analytic-Hessian kernels
    long failures = 0;

    void init(int p, bool with_hess) {
        value = 0.0L;
        failures = 0;
        grad.assign(static_cast<size_t>(p), 0.0L);
        hess.assign(with_hess ? static_cast<size_t>(p) * p : 0, 0.0L);
    }
    void merge(const Accum& o) {
        value += o.value;
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += o.grad[i];
        for (size_t i = 0; i < hess.size(); ++i) hess[i] += o.hess[i];
        failures += o.failures;
    }
};

template <typename MakeWs, typename Step>
Accum chunked_accumulate(long n, int p, bool with_hess, Exec exec, MakeWs&& make_ws, Step&& step,
                         double* trace_values) {
    const long nchunks = std::max((n + kChunk - 1) / kChunk, 1L);
    std::vector<Accum> partials(static_cast<size_t>(nchunks));

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long c = 0; c < nchunks; ++c) {
        auto ws = make_ws();
        Accum acc;
        acc.init(p, with_hess);
        const long j_end = std::min(n, (c + 1) * kChunk);
        for (long j = c * kChunk + 1; j <= j_end; ++j) step(ws, j, acc, trace_values);
        partials[static_cast<size_t>(c)] = std::move(acc);
    }

    for (long stride = 1; stride < nchunks; stride *= 2) {
        for (long i = 0; i + stride < nchunks; i += 2 * stride) {
            partials[static_cast<size_t>(i)].merge(partials[static_cast<size_t>(i + stride)]);
        }
    }
    return partials[0];
}

void finalize(const Accum& acc, long n, int p, const ContrastOptions& opts,
              ContrastEvaluation& out) {
    out.failures = acc.failures;
    out.n_terms = n - acc.failures;
    if (acc.failures > opts.max_failure_fraction * static_cast<double>(n)) {
        throw Error("contrast evaluation: " + std::to_string(acc.failures) + " of " +
                    std::to_string(n) + " increments had non-invertible weights");
    }
    out.value = static_cast<double>(acc.value);
    if (!acc.grad.empty()) {
        out.gradient.resize(p);
        for (int k = 0; k < p; ++k) out.gradient[k] = static_cast<double>(acc.grad[k]);
    }
    if (!acc.hess.empty()) {
        out.hessian.resize(p, p);
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b)
                out.hessian(a, b) = static_cast<double>(acc.hess[static_cast<size_t>(a) * p + b]);
        out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    }
}

double* trace_buffer(const ContrastOptions& opts, long n, std::vector<double>& storage) {
    if (!opts.trace) return nullptr;
    storage.assign(static_cast<size_t>(n), std::numeric_limits<double>::quiet_NaN());
    return storage.data();
}

void emit_trace(const ContrastOptions& opts, const std::vector<double>& storage) {
    if (!opts.trace) return;
    opts.trace->clear();
    for (size_t i = 0; i < storage.size(); ++i) {
        opts.trace->emplace_back(static_cast<long>(i) + 1, storage[i]);
    }
}

// ---------------------------------------------------------------------------
// S-form kernel: shared by the adaptive theta3, adaptive (theta2,theta3),
// one-step theta1 and joint contrasts.

struct SSpec {
    ThetaPoint theta;        // residual parameter
    VectorXd weight_theta3;  // theta3 inside the weight matrix S
    bool s3_live = false;    // weight theta3 is the free theta3 (gradient channel)
    bool logdet = true;
    bool f1 = false, f2 = false, f3 = false;  // free blocks
};

struct SWorkspace {
    detail::WeightContext w;
    detail::ResidualContext rc;
    detail::SQuadratic sq;
    VectorXd z, d1, d2, v2, q, t1, t2;
    MatrixXd Cinv, Vinv, dyx, dydy;
};

ContrastEvaluation run_s_kernel(const Model& model, const ObservationGrid& grid,
                                const SSpec& spec, bool want_gradient,
                                const ContrastOptions& opts) {
    const auto& d = model.dims();
    const long n = grid.n();
    const double h = grid.h;
    const double sqrt_h = std::sqrt(h);
    const double h32 = h * sqrt_h;
    const int p = (spec.f1 ? d.p1 : 0) + (spec.f2 ? d.p2 : 0) + (spec.f3 ? d.p3 : 0);
    const bool need_inverses =
        want_gradient && spec.logdet && (spec.f1 || (spec.f3 && spec.s3_live));

    std::vector<double> trace_storage;
    double* tracebuf = trace_buffer(opts, n, trace_storage);

    auto step = [&](SWorkspace& ws, long j, Accum& acc, double* tb) {
        ws.z = grid.states.col(j - 1);
        if (!ws.w.compute(model, ws.z, spec.theta.theta1, spec.weight_theta3)) {
            ++acc.failures;
            return;
        }
        ws.rc.compute(model, ws.z, spec.theta, ws.w.C, h);
        ws.d1 = (grid.states.col(j).head(d.dx) - ws.z.head(d.dx) - h * ws.rc.A) / sqrt_h;
        ws.d2 = (grid.states.col(j).tail(d.dy) - ws.z.tail(d.dy) - h * ws.rc.G) / h32;
        ws.sq.solve(ws.w, ws.d1, ws.d2);

        const double val = -0.5 * (ws.sq.quad + (spec.logdet ? ws.w.log_det_S : 0.0));
        acc.value += val;
        if (tb) tb[j - 1] = val;
        if (!want_gradient) return;

        if (need_inverses) {
            ws.w.cholC.inverse_into(ws.Cinv);
            ws.w.cholV.inverse_into(ws.Vinv);
        }
        const bool need_v2 = spec.f1 || (spec.f3 && spec.s3_live);
        if (need_v2) ws.v2.noalias() = ws.w.Hx.transpose() * ws.sq.u2;

        int off = 0;
        if (spec.f1) {
            ws.w.compute_dtheta1(model, ws.z, spec.theta.theta1);
            ws.rc.compute_dtheta1(model, ws.w.dC1);
            for (int k = 0; k < d.p1; ++k) {
                const MatrixXd& dc = ws.w.dC1[static_cast<size_t>(k)];
                // residual channel: d D2 = -(sqrt(h)/2) dLH1_k
                double dq = -sqrt_h * ws.sq.u2.dot(ws.rc.dLH1.col(k));
                // weight channel: -u' dS u
                ws.t1.noalias() = dc * ws.sq.u1;
                ws.t2.noalias() = dc * ws.v2;
                dq -= ws.sq.u1.dot(ws.t1) + ws.sq.u1.dot(ws.t2) + ws.v2.dot(ws.t2) / 3.0;
                double tr = 0.0;
                if (spec.logdet) {
                    tr += ws.Cinv.cwiseProduct(dc).sum();
                    ws.dyx.noalias() = ws.w.Hx * dc;
                    ws.dydy.noalias() = ws.dyx * ws.w.Hx.transpose();
                    tr += ws.Vinv.cwiseProduct(ws.dydy).sum();
                }
                acc.grad[static_cast<size_t>(off + k)] += -0.5 * (dq + tr);
            }
            off += d.p1;
        }
        if (spec.f2) {
            ws.rc.compute_dtheta2(model, ws.z, spec.theta.theta2);
            for (int k = 0; k < d.p2; ++k) {
                const double dq = -2.0 * sqrt_h * ws.sq.u1.dot(ws.rc.dA2.col(k)) -
                                  sqrt_h * ws.sq.u2.dot(ws.rc.dLH2.col(k));
                acc.grad[static_cast<size_t>(off + k)] += -0.5 * dq;
            }
            off += d.p2;
        }
        if (spec.f3) {
            ws.rc.compute_dtheta3(model, ws.z, spec.theta, ws.w.C);
            if (spec.s3_live) ws.w.compute_dtheta3(model, ws.z, spec.weight_theta3);
            for (int k = 0; k < d.p3; ++k) {
                double dq = -2.0 / sqrt_h * ws.sq.u2.dot(ws.rc.dH3.col(k)) -
                            sqrt_h * ws.sq.u2.dot(ws.rc.dLH3.col(k));
                double tr = 0.0;
                if (spec.s3_live) {
                    const MatrixXd& wk = ws.w.dHx3[static_cast<size_t>(k)];
                    ws.q.noalias() = wk.transpose() * ws.sq.u2;
                    ws.t1.noalias() = ws.w.C * ws.q;
                    ws.t2.noalias() = ws.w.C * ws.v2;
                    dq -= ws.sq.u1.dot(ws.t1) + (2.0 / 3.0) * ws.q.dot(ws.t2);
                    if (spec.logdet) {
                        ws.dydy.noalias() = wk * ws.w.HxC.transpose();
                        tr = 2.0 * ws.Vinv.cwiseProduct(ws.dydy).sum();
                    }
                }
                acc.grad[static_cast<size_t>(off + k)] += -0.5 * (dq + tr);
            }
        }
    };

    Accum acc = chunked_accumulate(
        n, p, false, opts.exec, [] { return SWorkspace{}; }, step, tracebuf);

    ContrastEvaluation out;
    if (!want_gradient) acc.grad.clear();
    finalize(acc, n, p, opts, out);
    emit_trace(opts, trace_storage);
    return out;
}

// ---------------------------------------------------------------------------
// X-only kernels

struct XWorkspace {
    VectorXd z, g, u, res, tu, col;
    MatrixXd B, C, Cinv, T;
    std::vector<MatrixXd> dB1;
    std::vector<MatrixXd> d2A2;
    MatrixXd dA2;
    VectorXd a;
    SpdCholesky chol;
};

ContrastEvaluation run_initial_theta1_kernel(const Model& model, const ObservationGrid& grid,
                                             const VectorXd& theta1, bool want_gradient,
                                             const ContrastOptions& opts) {
    const auto& d = model.dims();
    const long n = grid.n();
    const double sqrt_h = std::sqrt(grid.h);

    std::vector<double> trace_storage;
    double* tracebuf = trace_buffer(opts, n, trace_storage);

    auto step = [&](XWorkspace& ws, long j, Accum& acc, double* tb) {
        ws.z = grid.states.col(j - 1);
        model.x_diffusion(ws.z, theta1, ws.B);
        ws.C.noalias() = ws.B * ws.B.transpose();
        if (!ws.chol.factor(ws.C)) {
            ++acc.failures;
            return;
        }
        ws.g = (grid.states.col(j).head(d.dx) - ws.z.head(d.dx)) / sqrt_h;
        ws.chol.solve(ws.g, ws.u);
        const double val = -0.5 * (ws.g.dot(ws.u) + ws.chol.log_det());
        acc.value += val;
        if (tb) tb[j - 1] = val;
        if (!want_gradient) return;

        model.x_diffusion_dtheta(ws.z, theta1, ws.dB1);
        ws.chol.inverse_into(ws.Cinv);
        for (int k = 0; k < d.p1; ++k) {
            ws.T.noalias() = ws.dB1[static_cast<size_t>(k)] * ws.B.transpose();
            // dC = T + T'
            ws.tu.noalias() = ws.T * ws.u;
            const double udcu = 2.0 * ws.u.dot(ws.tu);
            const double tr = 2.0 * ws.Cinv.cwiseProduct(ws.T).sum();
            acc.grad[static_cast<size_t>(k)] += 0.5 * (udcu - tr);
        }
    };

    Accum acc = chunked_accumulate(
        n, d.p1, false, opts.exec, [] { return XWorkspace{}; }, step, tracebuf);

    ContrastEvaluation out;
    if (!want_gradient) acc.grad.clear();
    finalize(acc, n, d.p1, opts, out);
    emit_trace(opts, trace_storage);
    return out;
}

ContrastEvaluation run_initial_theta2_kernel(const Model& model, const ObservationGrid& grid,
                                             const VectorXd& theta2, const VectorXd& frozen_theta1,
                                             bool want_gradient, bool want_hessian,
                                             const ContrastOptions& opts) {
    const auto& d = model.dims();
    const long n = grid.n();
    const double h = grid.h;

    std::vector<double> trace_storage;
    double* tracebuf = trace_buffer(opts, n, trace_storage);

    auto step = [&](XWorkspace& ws, long j, Accum& acc, double* tb) {
        ws.z = grid.states.col(j - 1);
        model.x_diffusion(ws.z, frozen_theta1, ws.B);
        ws.C.noalias() = ws.B * ws.B.transpose();
        if (!ws.chol.factor(ws.C)) {
            ++acc.failures;
            return;
        }
        model.x_drift(ws.z, theta2, ws.a);
        ws.res = grid.states.col(j).head(d.dx) - ws.z.head(d.dx) - h * ws.a;
        ws.chol.solve(ws.res, ws.u);
        const double val = -0.5 / h * ws.res.dot(ws.u);
        acc.value += val;
        if (tb) tb[j - 1] = val;
        if (!want_gradient && !want_hessian) return;

        model.x_drift_dtheta(ws.z, theta2, ws.dA2);
        if (want_gradient) {
            for (int k = 0; k < d.p2; ++k) {
                acc.grad[static_cast<size_t>(k)] += ws.dA2.col(k).dot(ws.u);
            }
        }
        if (want_hessian) {
            model.x_drift_dtheta2(ws.z, theta2, ws.d2A2);
            ws.T.resize(d.dx, d.p2);
            for (int k = 0; k < d.p2; ++k) {
                ws.chol.solve(ws.dA2.col(k), ws.col);
                ws.T.col(k) = ws.col;
            }
            for (int a = 0; a < d.p2; ++a) {
                for (int b = 0; b < d.p2; ++b) {
                    double v = -h * ws.dA2.col(a).dot(ws.T.col(b));
                    for (int i = 0; i < d.dx; ++i) {
                        v += ws.d2A2[static_cast<size_t>(i)](a, b) * ws.u[i];
                    }
                    acc.hess[static_cast<size_t>(a) * d.p2 + b] += v;
                }
            }
        }
    };

    Accum acc = chunked_accumulate(
        n, d.p2, want_hessian, opts.exec, [] { return XWorkspace{}; }, step, tracebuf);

    ContrastEvaluation out;
    if (!want_gradient) acc.grad.clear();
    finalize(acc, n, d.p2, opts, out);
    emit_trace(opts, trace_storage);
    return out;
}

// ---------------------------------------------------------------------------
// Y-only kernel (inferior theta3 contrast)

struct YWorkspace {
    VectorXd z, r, b, q, t;
    MatrixXd B, C, Hx, HxC, V, Vinv, dydy;
    detail::ResidualContext rc;
    SpdCholesky cholV;
};

ContrastEvaluation run_inferior_kernel(const Model& model, const ObservationGrid& grid,
                                       const VectorXd& theta3, const VectorXd& frozen_theta1,
                                       const VectorXd& frozen_theta2, bool want_gradient,
                                       const ContrastOptions& opts) {
    const auto& d = model.dims();
    const long n = grid.n();
    const double h = grid.h;
    const double sqrt_h = std::sqrt(h);
    const double h32 = h * sqrt_h;
    const double log3_term = d.dy * std::log(3.0);
    ThetaPoint theta{frozen_theta1, frozen_theta2, theta3};

    std::vector<double> trace_storage;
    double* tracebuf = trace_buffer(opts, n, trace_storage);

    auto step = [&](YWorkspace& ws, long j, Accum& acc, double* tb) {
        ws.z = grid.states.col(j - 1);
        model.x_diffusion(ws.z, frozen_theta1, ws.B);
        ws.C.noalias() = ws.B * ws.B.transpose();
        model.y_drift_jac_x(ws.z, theta3, ws.Hx);
        ws.HxC.noalias() = ws.Hx * ws.C;
        ws.V.noalias() = ws.HxC * ws.Hx.transpose();
        if (!ws.cholV.factor(ws.V)) {
            ++acc.failures;
            return;
        }
        ws.rc.compute(model, ws.z, theta, ws.C, h);
        ws.r = (grid.states.col(j).tail(d.dy) - ws.z.tail(d.dy) - h * ws.rc.G) / h32;
        ws.cholV.solve(ws.r, ws.b);
        const double val = -0.5 * (3.0 * ws.r.dot(ws.b) + ws.cholV.log_det() - log3_term);
        acc.value += val;
        if (tb) tb[j - 1] = val;
        if (!want_gradient) return;

        ws.rc.compute_dtheta3(model, ws.z, theta, ws.C);
        ws.cholV.inverse_into(ws.Vinv);
        for (int k = 0; k < d.p3; ++k) {
            const MatrixXd& wk = ws.rc.dHx3[static_cast<size_t>(k)];
            // d r = -h^{-1/2} dH3_k - (sqrt(h)/2) dLH3_k
            const double bdr =
                -ws.b.dot(ws.rc.dH3.col(k)) / sqrt_h - 0.5 * sqrt_h * ws.b.dot(ws.rc.dLH3.col(k));
            ws.q.noalias() = wk.transpose() * ws.b;
            ws.t.noalias() = ws.HxC.transpose() * ws.b;  // C Hx' b
            const double bdvb = 2.0 * ws.q.dot(ws.t);
            ws.dydy.noalias() = wk * ws.HxC.transpose();
            const double tr = 2.0 * ws.Vinv.cwiseProduct(ws.dydy).sum();
            acc.grad[static_cast<size_t>(k)] += -0.5 * (6.0 * bdr - 3.0 * bdvb + tr);
        }
    };

    Accum acc = chunked_accumulate(
        n, d.p3, false, opts.exec, [] { return YWorkspace{}; }, step, tracebuf);

    ContrastEvaluation out;
    if (!want_gradient) acc.grad.clear();
    finalize(acc, n, d.p3, opts, out);
    emit_trace(opts, trace_storage);
    return out;
}

// ---------------------------------------------------------------------------
// finite-difference Hessian of the analytic gradient

template <typename GradFn>
void fd_hessian(const VectorXd& x, double rel_step, GradFn&& grad_at, MatrixXd& hess) {
    const int p = static_cast<int>(x.size());
    hess.resize(p, p);
    VectorXd pt = x;
    for (int k = 0; k < p; ++k) {
        const double s = rel_step * std::max(1.0, std::abs(x[k]));
        pt[k] = x[k] + s;
        const VectorXd gp = grad_at(pt);
        pt[k] = x[k] - s;
        const VectorXd gm = grad_at(pt);
        pt[k] = x[k];
        hess.col(k) = (gp - gm) / (2.0 * s);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
}

ContrastOptions value_grad_only(const ContrastOptions& opts) {
    ContrastOptions o = opts;
    o.want_gradient = true;
    o.want_hessian = false;
    o.trace = nullptr;
    return o;
}

}  // namespace

// ---------------------------------------------------------------------------

VectorXd increment_residual(const Model& model, const ObservationGrid& grid, long j,
                            const ThetaPoint& theta) {
    const auto& d = model.dims();
    if (j < 1 || j > grid.n()) throw std::invalid_argument("increment index out of range");
    const VectorXd z = grid.states.col(j - 1);
    const double h = grid.h;
    VectorXd a;
    model.x_drift(z, theta.theta2, a);
    const VectorXd g = eval_y_drift_corrected(model, z, theta, h);

    VectorXd out(d.dz());
    out.head(d.dx) = (grid.states.col(j).head(d.dx) - z.head(d.dx) - h * a) / std::sqrt(h);
    out.tail(d.dy) = (grid.states.col(j).tail(d.dy) - z.tail(d.dy) - h * g) / std::pow(h, 1.5);
    return out;
}

ContrastEvaluation initial_theta1_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta1, const ContrastOptions& opts) {
    ContrastEvaluation out = run_initial_theta1_kernel(model, grid, theta1,
                                                       opts.want_gradient || opts.want_hessian,
                                                       opts);
    if (opts.want_hessian) {
        fd_hessian(
            theta1, opts.hessian_step,
            [&](const VectorXd& t) {
                return run_initial_theta1_kernel(model, grid, t, true, value_grad_only(opts))
                    .gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

ContrastEvaluation initial_theta2_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta2, const VectorXd& frozen_theta1,
                                           const ContrastOptions& opts) {
    return run_initial_theta2_kernel(model, grid, theta2, frozen_theta1, opts.want_gradient,
                                     opts.want_hessian, opts);
}

ContrastEvaluation adaptive_theta3_contrast(const Model& model, const ObservationGrid& grid,
                                            const VectorXd& theta3, const VectorXd& frozen_theta1,
                                            const VectorXd& frozen_theta2,
                                            const ContrastOptions& opts) {
    SSpec spec;
    spec.theta = ThetaPoint{frozen_theta1, frozen_theta2, theta3};
    spec.weight_theta3 = theta3;
    spec.s3_live = true;
    spec.logdet = true;
    spec.f3 = true;
    ContrastEvaluation out =
        run_s_kernel(model, grid, spec, opts.want_gradient || opts.want_hessian, opts);
    if (opts.want_hessian) {
        fd_hessian(
            theta3, opts.hessian_step,
            [&](const VectorXd& t) {
                SSpec s = spec;
                s.theta.theta3 = t;
                s.weight_theta3 = t;
                return run_s_kernel(model, grid, s, true, value_grad_only(opts)).gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

ContrastEvaluation adaptive_theta23_contrast(const Model& model, const ObservationGrid& grid,
                                             const VectorXd& theta2, const VectorXd& theta3,
                                             const VectorXd& frozen_theta1,
                                             const VectorXd& frozen_theta3_weight,
                                             const ContrastOptions& opts) {
    const auto& d = model.dims();
    SSpec spec;
    spec.theta = ThetaPoint{frozen_theta1, theta2, theta3};
    spec.weight_theta3 = frozen_theta3_weight;
    spec.s3_live = false;
    spec.logdet = false;
    spec.f2 = true;
    spec.f3 = true;
    ContrastEvaluation out =
        run_s_kernel(model, grid, spec, opts.want_gradient || opts.want_hessian, opts);
    if (opts.want_hessian) {
        VectorXd x(d.p2 + d.p3);
        x << theta2, theta3;
        fd_hessian(
            x, opts.hessian_step,
            [&](const VectorXd& t) {
                SSpec s = spec;
                s.theta.theta2 = t.head(d.p2);
                s.theta.theta3 = t.tail(d.p3);
                return run_s_kernel(model, grid, s, true, value_grad_only(opts)).gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

ContrastEvaluation onestep_theta1_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta1, const VectorXd& frozen_theta2,
                                           const VectorXd& frozen_theta3,
                                           const ContrastOptions& opts) {
    SSpec spec;
    spec.theta = ThetaPoint{theta1, frozen_theta2, frozen_theta3};
    spec.weight_theta3 = frozen_theta3;
    spec.s3_live = false;
    spec.logdet = true;
    spec.f1 = true;
    ContrastEvaluation out =
        run_s_kernel(model, grid, spec, opts.want_gradient || opts.want_hessian, opts);
    if (opts.want_hessian) {
        fd_hessian(
            theta1, opts.hessian_step,
            [&](const VectorXd& t) {
                SSpec s = spec;
                s.theta.theta1 = t;
                return run_s_kernel(model, grid, s, true, value_grad_only(opts)).gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

ContrastEvaluation joint_contrast(const Model& model, const ObservationGrid& grid,
                                  const ThetaPoint& theta, const ContrastOptions& opts) {
    const auto& d = model.dims();
    SSpec spec;
    spec.theta = theta;
    spec.weight_theta3 = theta.theta3;
    spec.s3_live = true;
    spec.logdet = true;
    spec.f1 = spec.f2 = spec.f3 = true;
    ContrastEvaluation out =
        run_s_kernel(model, grid, spec, opts.want_gradient || opts.want_hessian, opts);
    if (opts.want_hessian) {
        fd_hessian(
            theta.stacked(), opts.hessian_step,
            [&](const VectorXd& t) {
                SSpec s = spec;
                s.theta = ThetaPoint::from_stacked(t, d);
                s.weight_theta3 = s.theta.theta3;
                return run_s_kernel(model, grid, s, true, value_grad_only(opts)).gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

ContrastEvaluation inferior_theta3_contrast(const Model& model, const ObservationGrid& grid,
                                            const VectorXd& theta3, const VectorXd& frozen_theta1,
                                            const VectorXd& frozen_theta2,
                                            const ContrastOptions& opts) {
    ContrastEvaluation out =
        run_inferior_kernel(model, grid, theta3, frozen_theta1, frozen_theta2,
                            opts.want_gradient || opts.want_hessian, opts);
    if (opts.want_hessian) {
        fd_hessian(
            theta3, opts.hessian_step,
            [&](const VectorXd& t) {
                return run_inferior_kernel(model, grid, t, frozen_theta1, frozen_theta2, true,
                                           value_grad_only(opts))
                    .gradient;
            },
            out.hessian);
    }
    if (!opts.want_gradient) out.gradient.resize(0);
    return out;
}

std::vector<Block> contrast_free_blocks(ContrastKind kind) {
    switch (kind) {
        case ContrastKind::initial_theta1:
        case ContrastKind::onestep_theta1:
            return {Block::theta1};
        case ContrastKind::initial_theta2:
            return {Block::theta2};
        case ContrastKind::adaptive_theta3:
        case ContrastKind::inferior_theta3:
            return {Block::theta3};
        case ContrastKind::adaptive_theta23:
            return {Block::theta2, Block::theta3};
        case ContrastKind::joint:
            return {Block::theta1, Block::theta2, Block::theta3};
    }
    throw Error("unknown contrast kind");
}

ContrastEvaluation evaluate_contrast(ContrastKind kind, const Model& model,
                                     const ObservationGrid& grid, const VectorXd& x,
                                     const ThetaPoint& frozen, const ContrastOptions& opts) {
    const auto& d = model.dims();
    switch (kind) {
        case ContrastKind::initial_theta1:
            return initial_theta1_contrast(model, grid, x, opts);
        case ContrastKind::initial_theta2:
            return initial_theta2_contrast(model, grid, x, frozen.theta1, opts);
        case ContrastKind::adaptive_theta3:
            return adaptive_theta3_contrast(model, grid, x, frozen.theta1, frozen.theta2, opts);
        case ContrastKind::adaptive_theta23:
            return adaptive_theta23_contrast(model, grid, x.head(d.p2), x.tail(d.p3),
                                             frozen.theta1, frozen.theta3, opts);
        case ContrastKind::onestep_theta1:
            return onestep_theta1_contrast(model, grid, x, frozen.theta2, frozen.theta3, opts);
        case ContrastKind::joint:
            return joint_contrast(model, grid, ThetaPoint::from_stacked(x, d), opts);
        case ContrastKind::inferior_theta3:
            return inferior_theta3_contrast(model, grid, x, frozen.theta1, frozen.theta2, opts);
    }
    throw Error("unknown contrast kind");
}

}  // namespace hypoql
