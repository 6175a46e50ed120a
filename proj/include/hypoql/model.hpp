#pragma once

#include "hypoql/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

// forward-declare the vendored json type so headers stay light
#include <nlohmann/json_fwd.hpp>

namespace hypoql {

enum class DerivativeMode { analytic, finite_difference };

/// Coefficient functions of the degenerate system
///
///   dX = x_drift(Z, theta2) dt + x_diffusion(Z, theta1) dW
///   dY = y_drift(Z, theta3) dt
///
/// plus the spatial/parameter derivatives the contrasts need.  Every
/// derivative evaluator has a central-difference default, so a model only has
/// to provide the three coefficient functions; overriding the derivatives
/// makes gradients analytic.  All evaluators are pure; instances are immutable
/// after construction and safe to share across threads.
///
/// Output buffers are written in place (resized when needed) so inner loops
/// stay allocation-free once warmed up.
class Model {
public:
    virtual ~Model() = default;

    virtual const Dimensions& dims() const = 0;
    virtual const ParameterBoxes& boxes() const = 0;
    virtual std::string name() const = 0;
    virtual DerivativeMode derivative_mode() const { return DerivativeMode::finite_difference; }

    // coefficients
    virtual void x_drift(const VectorXd& z, const VectorXd& theta2, VectorXd& out) const = 0;
    virtual void x_diffusion(const VectorXd& z, const VectorXd& theta1, MatrixXd& out) const = 0;
    virtual void y_drift(const VectorXd& z, const VectorXd& theta3, VectorXd& out) const = 0;

    // spatial derivatives of the y-drift
    virtual void y_drift_jac_x(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const;
    virtual void y_drift_jac_y(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const;
    /// out[i] = d^2 y_drift_i / dx dx  (dx-by-dx, one per y component)
    virtual void y_drift_hess_x(const VectorXd& z, const VectorXd& theta3,
                                std::vector<MatrixXd>& out) const;

    // parameter derivatives
    /// dx-by-p2 Jacobian of x_drift in theta2
    virtual void x_drift_dtheta(const VectorXd& z, const VectorXd& theta2, MatrixXd& out) const;
    /// out[i] = p2-by-p2 Hessian of x_drift_i in theta2
    virtual void x_drift_dtheta2(const VectorXd& z, const VectorXd& theta2,
                                 std::vector<MatrixXd>& out) const;
    /// out[k] = d x_diffusion / d theta1_k  (dx-by-r each)
    virtual void x_diffusion_dtheta(const VectorXd& z, const VectorXd& theta1,
                                    std::vector<MatrixXd>& out) const;
    /// dy-by-p3 Jacobian of y_drift in theta3
    virtual void y_drift_dtheta(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const;
    /// out[k] = d y_drift_jac_x / d theta3_k  (dy-by-dx each)
    virtual void y_drift_jac_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                                      std::vector<MatrixXd>& out) const;
    /// out[k] = d y_drift_jac_y / d theta3_k  (dy-by-dy each)
    virtual void y_drift_jac_y_dtheta(const VectorXd& z, const VectorXd& theta3,
                                      std::vector<MatrixXd>& out) const;
    /// out[k][i] = d y_drift_hess_x[i] / d theta3_k
    virtual void y_drift_hess_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                                       std::vector<std::vector<MatrixXd>>& out) const;
};

/// Wraps a model and forwards only its coefficient functions, forcing every
/// derivative through the finite-difference defaults.  Used to validate the
/// fallback path against analytic derivatives.
class FiniteDifferenceModel final : public Model {
public:
    explicit FiniteDifferenceModel(std::shared_ptr<const Model> inner);

    const Dimensions& dims() const override { return inner_->dims(); }
    const ParameterBoxes& boxes() const override { return inner_->boxes(); }
    std::string name() const override { return inner_->name() + "/fd"; }
    DerivativeMode derivative_mode() const override { return DerivativeMode::finite_difference; }

    void x_drift(const VectorXd& z, const VectorXd& theta2, VectorXd& out) const override;
    void x_diffusion(const VectorXd& z, const VectorXd& theta1, MatrixXd& out) const override;
    void y_drift(const VectorXd& z, const VectorXd& theta3, VectorXd& out) const override;

private:
    std::shared_ptr<const Model> inner_;
};

using ModelFactory =
    std::function<std::shared_ptr<const Model>(const nlohmann::json& params)>;

/// Name-keyed registry; built-in models are registered on first access and
/// custom models can be added programmatically.
class ModelRegistry {
public:
    static ModelRegistry& instance();

    void add(const std::string& name, ModelFactory factory);
    bool has(const std::string& name) const;
    std::shared_ptr<const Model> make(const std::string& name,
                                      const nlohmann::json& params) const;
    std::shared_ptr<const Model> make(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    ModelRegistry();
    std::map<std::string, ModelFactory> factories_;
};

/// Convenience: look up a registered model by name with default parameters.
std::shared_ptr<const Model> make_model(const std::string& name);

namespace fd {
// central-difference steps (relative, floored at 1 in magnitude units)
constexpr double kFirstOrderStep = 1e-5;
constexpr double kSecondOrderStep = 1e-4;
inline double step1(double x) { return kFirstOrderStep * std::max(1.0, std::abs(x)); }
inline double step2(double x) { return kSecondOrderStep * std::max(1.0, std::abs(x)); }
}  // namespace fd

}  // namespace hypoql
