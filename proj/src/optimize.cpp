#include "hypoql/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hypoql {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-12;

std::vector<VectorXd> make_grid_starts(const ParameterBox& box, const OptimizerConfig& cfg) {
    const int dim = box.dim();
    const int g = std::max(cfg.grid_points_per_dim, 1);
    long total = 1;
    for (int i = 0; i < dim; ++i) {
        total *= g;
        if (total > 1000000L) break;  // guard the multiplication, capped below anyway
    }
    const long count = std::min<long>(total, cfg.max_total_starts);

    std::vector<VectorXd> starts;
    starts.reserve(static_cast<size_t>(count));
    VectorXd pt(dim);
    for (long i = 0; i < count; ++i) {
        // stride through the lattice in flat order so subsampling stays spread out
        long flat = (total <= cfg.max_total_starts) ? i : (i * total) / count;
        for (int k = 0; k < dim; ++k) {
            const long idx = flat % g;
            flat /= g;
            pt[k] = box.lower[k] + box.width()[k] * static_cast<double>(idx + 1) / (g + 1);
        }
        starts.push_back(pt);
    }
    return starts;
}

double safe_value(const Objective& objective, const VectorXd& x) {
    try {
        return objective(x, false).value;
    } catch (const Error&) {
        return kNegInf;
    }
}

struct AscentResult {
    VectorXd x;
    double value = kNegInf;
    double pg_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iters = 0;
};

AscentResult newton_ascent(const Objective& objective, const ParameterBox& box,
                           const OptimizerConfig& cfg, const VectorXd& x0) {
    AscentResult res;
    res.x = box.clamp(x0);

    ContrastEvaluation eval;
    try {
        eval = objective(res.x, true);
    } catch (const Error&) {
        return res;
    }
    res.value = eval.value;

    for (int iter = 0; iter < cfg.max_newton_iters; ++iter) {
        res.iters = iter;
        const VectorXd pg = projected_gradient(res.x, eval.gradient, box);
        res.pg_norm = pg.lpNorm<Eigen::Infinity>();
        const double scale = 1.0 + std::abs(eval.value);
        if (res.pg_norm <= cfg.gradient_tol * scale) {
            res.converged = true;
            return res;
        }

        // ascent direction from the (regularized) Newton system (-H + lam I) d = g
        VectorXd dir;
        double lam = 0.0;
        const double lam0 = 1e-8 * std::max(1.0, eval.hessian.cwiseAbs().maxCoeff());
        for (int tries = 0; tries < 60; ++tries) {
            MatrixXd m = -eval.hessian;
            m.diagonal().array() += lam;
            Eigen::LLT<MatrixXd> llt(m);
            if (llt.info() == Eigen::Success) {
                dir = llt.solve(eval.gradient);
                if (eval.gradient.dot(dir) > 0.0 && dir.allFinite()) break;
            }
            dir.resize(0);
            lam = (lam == 0.0) ? lam0 : 10.0 * lam;
        }
        if (dir.size() == 0) dir = pg;  // steepest ascent fallback

        // Armijo backtracking with clamp projection; when the Newton
        // direction cannot move (e.g. it points out of an active face),
        // retry along the projected gradient before declaring a stall
        auto line_search = [&](const VectorXd& direction) {
            double alpha = 1.0;
            for (int bt = 0; bt < cfg.max_backtracks; ++bt, alpha *= 0.5) {
                const VectorXd xt = box.clamp(res.x + alpha * direction);
                const VectorXd step = xt - res.x;
                if (step.lpNorm<Eigen::Infinity>() == 0.0) continue;
                const double target = res.value + cfg.armijo_c * eval.gradient.dot(step);
                const double vt = safe_value(objective, xt);
                if (vt >= target && std::isfinite(vt)) {
                    res.x = xt;
                    return true;
                }
            }
            return false;
        };
        bool moved = line_search(dir);
        if (!moved) {
            const double pg_scale = pg.lpNorm<Eigen::Infinity>();
            moved = pg_scale > 0.0 && line_search(pg / pg_scale);
        }
        if (!moved) return res;  // stalled; caller may still accept a boundary point

        try {
            eval = objective(res.x, true);
        } catch (const Error&) {
            return res;
        }
        res.value = eval.value;
    }
    // iteration budget exhausted; report the current projected gradient
    try {
        eval = objective(res.x, false);
        const VectorXd pg = projected_gradient(res.x, eval.gradient, box);
        res.pg_norm = pg.lpNorm<Eigen::Infinity>();
        res.converged = res.pg_norm <= cfg.gradient_tol * (1.0 + std::abs(eval.value));
    } catch (const Error&) {
    }
    return res;
}

}  // namespace

VectorXd projected_gradient(const VectorXd& x, const VectorXd& grad, const ParameterBox& box) {
    VectorXd pg = grad;
    for (int i = 0; i < box.dim(); ++i) {
        if (x[i] <= box.lower[i] && pg[i] < 0.0) pg[i] = 0.0;
        if (x[i] >= box.upper[i] && pg[i] > 0.0) pg[i] = 0.0;
    }
    return pg;
}

VectorXd maximize(const Objective& objective, const ParameterBox& box, const OptimizerConfig& cfg,
                  OptimDiagnostics& diag, const std::vector<VectorXd>& warm_starts,
                  const std::string& stage) {
    std::vector<VectorXd> starts;
    for (const auto& w : warm_starts) starts.push_back(box.clamp(w));
    for (auto& g : make_grid_starts(box, cfg)) starts.push_back(std::move(g));

    std::vector<double> values(starts.size(), kNegInf);
    for (size_t i = 0; i < starts.size(); ++i) values[i] = safe_value(objective, starts[i]);

    std::vector<size_t> order(starts.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] > values[b]; });

    diag = OptimDiagnostics{};
    AscentResult best;
    int best_start = -1;
    bool any_converged = false;

    const int tries = std::min<int>(cfg.max_newton_starts, static_cast<int>(order.size()));
    for (int s = 0; s < tries; ++s) {
        const size_t idx = order[static_cast<size_t>(s)];
        if (!std::isfinite(values[idx])) continue;
        ++diag.starts_tried;
        AscentResult res = newton_ascent(objective, box, cfg, starts[idx]);
        const bool better = res.converged
                                ? (!any_converged || res.value > best.value + kTieTol)
                                : (!any_converged && res.value > best.value + kTieTol);
        if (better) {
            best = std::move(res);
            best_start = static_cast<int>(idx);
        }
        any_converged = any_converged || best.converged;
        if (any_converged && s + 1 >= std::min(tries, 2)) break;  // one confirmation start
    }

    if (best_start < 0) {
        // every start failed to evaluate
        throw OptimFailedError(stage);
    }
    if (!best.converged) {
        // accept a stalled point only when its projected gradient already
        // satisfies the tolerance (e.g. boundary maxima); otherwise fail
        const double scale = 1.0 + std::abs(best.value);
        if (!(best.pg_norm <= cfg.gradient_tol * scale)) {
            throw OptimFailedError(stage + " (no start converged, projected gradient " +
                                   std::to_string(best.pg_norm) + ")");
        }
        best.converged = true;
    }

    diag.iters = best.iters;
    diag.final_value = best.value;
    diag.final_grad_norm = best.pg_norm;
    diag.converged = best.converged;
    diag.on_boundary = box.on_boundary(best.x);
    diag.winning_start = best_start;
    return best.x;
}

}  // namespace hypoql
