#pragma once

#include "hypoql/contrast.hpp"

#include <functional>

namespace hypoql {

struct OptimizerConfig {
    int grid_points_per_dim = 5;
    int max_total_starts = 200;
    int max_newton_starts = 3;   ///< Newton ascents attempted, best grid points first
    int max_newton_iters = 50;
    double gradient_tol = 1e-8;  ///< on the projected gradient, scaled by 1 + |value|
    double armijo_c = 1e-4;
    int max_backtracks = 40;
};

struct OptimDiagnostics {
    int iters = 0;
    int starts_tried = 0;
    double final_value = 0.0;
    double final_grad_norm = 0.0;  ///< projected gradient norm
    bool converged = false;
    bool on_boundary = false;
    int winning_start = -1;
};

/// Objective contract: value and gradient at a point inside (a small
/// neighborhood of) the box; Hessian on request.
using Objective = std::function<ContrastEvaluation(const VectorXd& x, bool want_hessian)>;

/// Box-constrained maximization: rank a full-factorial grid by value, then run
/// Newton ascent with Armijo backtracking and clamp projection from the best
/// grid points.  Deterministic: fixed grid, fixed tie-break (lowest start
/// index wins within 1e-12).  Throws OptimFailedError when no start converges
/// and the incumbent still has a nonzero projected gradient off the boundary.
VectorXd maximize(const Objective& objective, const ParameterBox& box, const OptimizerConfig& cfg,
                  OptimDiagnostics& diag, const std::vector<VectorXd>& warm_starts = {},
                  const std::string& stage = "maximize");

/// Projected gradient for a box: components pointing outward at an active
/// bound are zeroed.
VectorXd projected_gradient(const VectorXd& x, const VectorXd& grad, const ParameterBox& box);

}  // namespace hypoql
