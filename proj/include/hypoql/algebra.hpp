#pragma once

#include "hypoql/model.hpp"

#include <vector>

namespace hypoql {

/// Dense SPD Cholesky with a relative pivot guard.  Factorization refuses
/// matrices whose pivots fall below kPivotRelTol * (trace/dim): near-singular
/// weights signal model degeneracy at a state point and must fail loudly
/// instead of being regularized away.
class SpdCholesky {
public:
    static constexpr double kPivotRelTol = 1e-12;

    bool factor(const MatrixXd& a);
    int size() const { return n_; }
    double log_det() const { return log_det_; }
    double min_pivot() const { return min_pivot_; }

    void solve(const VectorXd& rhs, VectorXd& out) const;
    MatrixXd inverse() const;
    void inverse_into(MatrixXd& out) const;
    /// v' A^{-1} v
    double quad_inv(const VectorXd& v) const;

private:
    MatrixXd L_;
    mutable VectorXd work_;
    double log_det_ = 0.0;
    double min_pivot_ = 0.0;
    int n_ = 0;
};

// ---------------------------------------------------------------------------
// Per-state coefficient algebra.  These are the reference entry points; the
// contrast kernels use the workspace structs below to stay allocation-free.

/// C = B B'
MatrixXd eval_noise_cov(const Model& model, const VectorXd& z, const VectorXd& theta1);

/// V = Hx C Hx'
MatrixXd eval_projected_noise_cov(const Model& model, const VectorXd& z, const VectorXd& theta1,
                                  const VectorXd& theta3);

/// Generator applied to the y-drift:
///   Hx[x_drift] + 1/2 Hxx[C] + Hy[y_drift]
VectorXd eval_y_drift_generator(const Model& model, const VectorXd& z, const VectorXd& theta1,
                                const VectorXd& theta2, const VectorXd& theta3);

/// Half-step-corrected y-drift: y_drift + (h/2) * generator.  h = 0 is allowed
/// (returns the raw y-drift).
VectorXd eval_y_drift_corrected(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                                double h);

/// Leading covariance of the rate-normalized increment residual:
///   [[ C,        C Hx'/2 ],
///    [ Hx C / 2, V / 3   ]]
MatrixXd eval_residual_cov(const Model& model, const VectorXd& z, const VectorXd& theta1,
                           const VectorXd& theta3);

struct ResidualCovInverse {
    MatrixXd inv;    ///< closed-form block inverse of the residual covariance
    double log_det;  ///< log det S = log det C + log det V - dy log 12
};

/// Closed-form inverse
///   [[ C^{-1} + 3 Hx' V^{-1} Hx,  -6 Hx' V^{-1} ],
///    [ -6 V^{-1} Hx,              12 V^{-1}     ]]
/// Throws NonInvertibleError when the SPD factorization of C or V fails.
ResidualCovInverse eval_residual_cov_inverse(const Model& model, const VectorXd& z,
                                             const VectorXd& theta1, const VectorXd& theta3);

/// kappa = Hx B / sqrt(3); satisfies 3 kappa kappa' = V.
MatrixXd eval_y_noise_gain(const Model& model, const VectorXd& z, const VectorXd& theta1,
                           const VectorXd& theta3);

// ---------------------------------------------------------------------------
// kernel workspaces

namespace detail {

/// Weight side of an S-form quadratic: C(theta1), Hx(theta3s), V, and their
/// factorizations.  theta3s may differ from the residual's theta3 when the
/// weight matrix is frozen.
struct WeightContext {
    MatrixXd B, C, Hx, HxC, V;
    SpdCholesky cholC, cholV;
    double log_det_S = 0.0;

    std::vector<MatrixXd> dB1, dC1;  // theta1 channel of S
    std::vector<MatrixXd> dHx3;      // theta3 channel of S
    MatrixXd scratch;

    /// false when C or V fails the pivot guard (caller skips the increment)
    bool compute(const Model& model, const VectorXd& z, const VectorXd& theta1,
                 const VectorXd& theta3s);
    void compute_dtheta1(const Model& model, const VectorXd& z, const VectorXd& theta1);
    void compute_dtheta3(const Model& model, const VectorXd& z, const VectorXd& theta3s);
};

/// Residual side: drift corrections and their parameter derivatives at the
/// residual's own theta.
struct ResidualContext {
    VectorXd A, H, LH, G;
    MatrixXd Hx, Hy;
    std::vector<MatrixXd> Hxx;

    MatrixXd dA2, dH3, dLH1, dLH2, dLH3;
    std::vector<MatrixXd> d2A2, dHx3, dHy3;
    std::vector<std::vector<MatrixXd>> dHxx3;

    void compute(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                 const MatrixXd& C, double h);
    void compute_dtheta1(const Model& model, const std::vector<MatrixXd>& dC1);
    void compute_dtheta2(const Model& model, const VectorXd& z, const VectorXd& theta2);
    void compute_dtheta3(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                         const MatrixXd& C);
};

/// Solves the S-form quadratic through the block closed form:
///   with m = Hx D1, rres = D2 - m/2:
///   S^{-1} D = [ C^{-1} D1 - 6 Hx' V^{-1} rres,  12 V^{-1} rres ]
///   D' S^{-1} D = D1' C^{-1} D1 + 12 rres' V^{-1} rres
struct SQuadratic {
    VectorXd m, rres, a, b, u1, u2;
    double quad = 0.0;

    void solve(const WeightContext& w, const VectorXd& d1, const VectorXd& d2);
};

}  // namespace detail

}  // namespace hypoql
