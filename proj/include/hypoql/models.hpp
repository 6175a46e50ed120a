#pragma once

#include "hypoql/model.hpp"

namespace hypoql {

/// Damped linear oscillator with noise-free integrated component:
///
///   dX = (-theta2[0] X - theta2[1] Y) dt + theta1[0] dW
///   dY = theta3[0] X dt
///
/// Linear structure gives closed-form stationary moments, used as a test
/// oracle.  Default true value theta* = (0.7; 1.3, 0.9; 1.1).
class LinearOscillatorModel final : public Model {
public:
    LinearOscillatorModel();
    explicit LinearOscillatorModel(ParameterBoxes boxes);

    const Dimensions& dims() const override { return dims_; }
    const ParameterBoxes& boxes() const override { return boxes_; }
    std::string name() const override { return "oscillator"; }
    DerivativeMode derivative_mode() const override { return DerivativeMode::analytic; }

    void x_drift(const VectorXd& z, const VectorXd& theta2, VectorXd& out) const override;
    void x_diffusion(const VectorXd& z, const VectorXd& theta1, MatrixXd& out) const override;
    void y_drift(const VectorXd& z, const VectorXd& theta3, VectorXd& out) const override;

    void y_drift_jac_x(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_jac_y(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_hess_x(const VectorXd& z, const VectorXd& theta3,
                        std::vector<MatrixXd>& out) const override;
    void x_drift_dtheta(const VectorXd& z, const VectorXd& theta2, MatrixXd& out) const override;
    void x_drift_dtheta2(const VectorXd& z, const VectorXd& theta2,
                         std::vector<MatrixXd>& out) const override;
    void x_diffusion_dtheta(const VectorXd& z, const VectorXd& theta1,
                            std::vector<MatrixXd>& out) const override;
    void y_drift_dtheta(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_jac_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                              std::vector<MatrixXd>& out) const override;
    void y_drift_jac_y_dtheta(const VectorXd& z, const VectorXd& theta3,
                              std::vector<MatrixXd>& out) const override;
    void y_drift_hess_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                               std::vector<std::vector<MatrixXd>>& out) const override;

    /// default true parameter used by configs and tests
    static ThetaPoint default_truth();

    /// Stationary second moments of the linear system (Lyapunov equation
    /// solved in closed form): Var X, Cov XY, Var Y.
    static void stationary_moments(const ThetaPoint& theta, double& var_x, double& cov_xy,
                                   double& var_y);

private:
    Dimensions dims_;
    ParameterBoxes boxes_;
};

/// FitzHugh-Nagumo-type excitable system with noise-free recovery variable:
///
///   dX = theta2[0] (X - X^3 - Y) dt + theta1[0] dW
///   dY = (theta3[0] X - theta3[1] Y + theta3[2]) dt
///
/// Default true value theta* = (0.4; 1.5; 1.0, 1.0, 0.5).
class FitzHughNagumoModel final : public Model {
public:
    FitzHughNagumoModel();

    const Dimensions& dims() const override { return dims_; }
    const ParameterBoxes& boxes() const override { return boxes_; }
    std::string name() const override { return "fhn"; }
    DerivativeMode derivative_mode() const override { return DerivativeMode::analytic; }

    void x_drift(const VectorXd& z, const VectorXd& theta2, VectorXd& out) const override;
    void x_diffusion(const VectorXd& z, const VectorXd& theta1, MatrixXd& out) const override;
    void y_drift(const VectorXd& z, const VectorXd& theta3, VectorXd& out) const override;

    void y_drift_jac_x(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_jac_y(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_hess_x(const VectorXd& z, const VectorXd& theta3,
                        std::vector<MatrixXd>& out) const override;
    void x_drift_dtheta(const VectorXd& z, const VectorXd& theta2, MatrixXd& out) const override;
    void x_drift_dtheta2(const VectorXd& z, const VectorXd& theta2,
                         std::vector<MatrixXd>& out) const override;
    void x_diffusion_dtheta(const VectorXd& z, const VectorXd& theta1,
                            std::vector<MatrixXd>& out) const override;
    void y_drift_dtheta(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const override;
    void y_drift_jac_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                              std::vector<MatrixXd>& out) const override;
    void y_drift_jac_y_dtheta(const VectorXd& z, const VectorXd& theta3,
                              std::vector<MatrixXd>& out) const override;
    void y_drift_hess_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                               std::vector<std::vector<MatrixXd>>& out) const override;

    static ThetaPoint default_truth();

private:
    Dimensions dims_;
    ParameterBoxes boxes_;
};

/// Default true parameter for a registered model name (oscillator/fhn).
ThetaPoint default_truth_for(const std::string& model_name);

}  // namespace hypoql
