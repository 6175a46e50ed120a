#pragma once

#include "hypoql/algebra.hpp"
#include "hypoql/simulate.hpp"

#include <utility>
#include <vector>

namespace hypoql {

enum class Exec { serial, parallel };

/// Value/gradient/Hessian of a quasi-log-likelihood at a point.  The gradient
/// and Hessian are over the stacked free parameter blocks of the contrast.
struct ContrastEvaluation {
    double value = 0.0;
    VectorXd gradient;
    MatrixXd hessian;
    long n_terms = 0;   ///< increments summed
    long failures = 0;  ///< increments skipped on non-invertible weights
};

struct ContrastOptions {
    Exec exec = Exec::parallel;
    bool want_gradient = true;
    bool want_hessian = false;
    /// relative step of the central difference applied to the analytic
    /// gradient when no analytic Hessian is available
    double hessian_step = 1e-4;
    /// whole evaluation fails when more than this fraction of increments skip
    double max_failure_fraction = 0.01;
    /// when set, receives (j, per-increment value) for j = 1..n
    std::vector<std::pair<long, double>>* trace = nullptr;
};

enum class ContrastKind {
    initial_theta1,
    initial_theta2,
    adaptive_theta3,
    adaptive_theta23,
    onestep_theta1,
    joint,
    inferior_theta3,
};

/// Rate-normalized increment residual
///   D_j = [ (dX_j - h A) / sqrt(h),  (dY_j - h G) / h^{3/2} ],  1 <= j <= n.
VectorXd increment_residual(const Model& model, const ObservationGrid& grid, long j,
                            const ThetaPoint& theta);

/// -1/2 sum_j { C(theta1)^{-1}[ (dX_j)^2 / h ] + log det C(theta1) }
ContrastEvaluation initial_theta1_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta1,
                                           const ContrastOptions& opts = {});

/// -1/2 sum_j C(frozen theta1)^{-1}[ (dX_j - h A(theta2))^2 / h ]
ContrastEvaluation initial_theta2_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta2, const VectorXd& frozen_theta1,
                                           const ContrastOptions& opts = {});

/// -1/2 sum_j { S(theta1^0, theta3)^{-1}[ D_j(theta1^0, theta2^0, theta3)^2 ]
///              + log det S(theta1^0, theta3) };  theta3 live in both channels.
ContrastEvaluation adaptive_theta3_contrast(const Model& model, const ObservationGrid& grid,
                                            const VectorXd& theta3, const VectorXd& frozen_theta1,
                                            const VectorXd& frozen_theta2,
                                            const ContrastOptions& opts = {});

/// -1/2 sum_j S(theta1^0, theta3^0)^{-1}[ D_j(theta1^0, theta2, theta3)^2 ];
/// weight matrix frozen, no log-det term (constant in the free variables).
ContrastEvaluation adaptive_theta23_contrast(const Model& model, const ObservationGrid& grid,
                                             const VectorXd& theta2, const VectorXd& theta3,
                                             const VectorXd& frozen_theta1,
                                             const VectorXd& frozen_theta3_weight,
                                             const ContrastOptions& opts = {});

/// -1/2 sum_j { S(theta1, theta3^0)^{-1}[ D_j(theta1, theta2^0, theta3^0)^2 ]
///              + log det S(theta1, theta3^0) }
ContrastEvaluation onestep_theta1_contrast(const Model& model, const ObservationGrid& grid,
                                           const VectorXd& theta1, const VectorXd& frozen_theta2,
                                           const VectorXd& frozen_theta3,
                                           const ContrastOptions& opts = {});

/// Non-adaptive contrast over the full parameter.
ContrastEvaluation joint_contrast(const Model& model, const ObservationGrid& grid,
                                  const ThetaPoint& theta, const ContrastOptions& opts = {});

/// Y-increments-only contrast (inferior asymptotic variance):
/// -1/2 sum_j { 3 V(theta1^0, theta3)^{-1}[ r_j^2 ] + log det( V / 3 ) }
/// with r_j = (dY_j - h G(theta1^0, theta2^0, theta3)) / h^{3/2}.
ContrastEvaluation inferior_theta3_contrast(const Model& model, const ObservationGrid& grid,
                                            const VectorXd& theta3, const VectorXd& frozen_theta1,
                                            const VectorXd& frozen_theta2,
                                            const ContrastOptions& opts = {});

/// Free-block layout per contrast kind, in stacking order.
std::vector<Block> contrast_free_blocks(ContrastKind kind);

/// Uniform entry point: x stacks the free blocks, frozen supplies the rest
/// (adaptive_theta23 additionally reads its weight theta3 from
/// frozen.theta3).
ContrastEvaluation evaluate_contrast(ContrastKind kind, const Model& model,
                                     const ObservationGrid& grid, const VectorXd& x,
                                     const ThetaPoint& frozen, const ContrastOptions& opts = {});

}  // namespace hypoql
