#pragma once

#include "hypoql/optimize.hpp"

#include <optional>

namespace hypoql {

enum class EstimateMethod { initial_only, adaptive, joint, inferior_theta3 };

std::string method_name(EstimateMethod m);

struct EstimatorConfig {
    OptimizerConfig opt;
    long min_n = 100;
    double hessian_condition_limit = 1e12;  ///< one-step Hessian treated singular beyond this
    Exec exec = Exec::parallel;
};

struct StageDiagnostics {
    std::string stage;
    OptimDiagnostics diag;
};

/// Plug-in information matrices: empirical state averages of the asymptotic
/// information integrands, evaluated at a parameter value.
struct InformationMatrices {
    MatrixXd gamma11;       ///< theta1 information of the S-form contrast
    MatrixXd gamma22;       ///< theta2 information
    MatrixXd gamma33;       ///< theta3 information
    MatrixXd gamma1_xonly;  ///< theta1 information of the X-only contrast
    long failures = 0;
};

struct EstimateReport {
    EstimateMethod method = EstimateMethod::adaptive;
    ThetaPoint theta_hat;
    ThetaPoint theta_initial;      ///< pipeline initials (where applicable)
    bool onestep_event_ok = false; ///< Newton Hessians invertible and images inside the box
    InformationMatrices gamma;
    double rate1 = 0.0;  ///< sqrt(n)
    double rate2 = 0.0;  ///< sqrt(n h)
    double rate3 = 0.0;  ///< sqrt(n / h)
    VectorXd stderr1, stderr2, stderr3;  ///< plug-in standard errors, unscaled units
    std::vector<StageDiagnostics> stages;
    long n = 0;
    double h = 0.0;
};

/// Sequential pipeline: X-only QMLE for theta1, weighted-LS-type QMLE for
/// theta2, S-form QMLE for theta3, then one Newton step on the S-form
/// contrasts for (theta1) and (theta2, theta3).  When a Newton Hessian is
/// near-singular or an image leaves the box, the report falls back to the
/// initial estimates with onestep_event_ok = false.
EstimateReport estimate_adaptive(const Model& model, const ObservationGrid& grid,
                                 const EstimatorConfig& cfg = {});

/// The pipeline stopped after the three initial stages.
EstimateReport estimate_initial_only(const Model& model, const ObservationGrid& grid,
                                     const EstimatorConfig& cfg = {});

/// Non-adaptive QMLE of the joint contrast over the full box, warm-started
/// from the adaptive pipeline (or a supplied warm start) plus grid starts.
EstimateReport estimate_joint(const Model& model, const ObservationGrid& grid,
                              const EstimatorConfig& cfg = {},
                              const std::optional<ThetaPoint>& warm = std::nullopt);

/// theta3 estimated from the Y-increment-only contrast (asymptotically 4x the
/// variance of the adaptive estimator); theta1/theta2 are the pipeline
/// initials.
EstimateReport estimate_inferior_theta3(const Model& model, const ObservationGrid& grid,
                                        const EstimatorConfig& cfg = {});

InformationMatrices plugin_information(const Model& model, const ObservationGrid& grid,
                                       const ThetaPoint& theta_hat, Exec exec = Exec::parallel);

/// One Newton update x - hessian^{-1} gradient; ok reports whether the
/// Hessian passed the conditioning guard (condition number <= cond_limit).
VectorXd onestep_update(const VectorXd& x, const ContrastEvaluation& eval, double cond_limit,
                        bool& ok);

// ---------------------------------------------------------------------------
// empirical identifiability diagnostics

struct ScanSpec {
    int points = 41;
};

struct IdentCurvePoint {
    double param_value = 0.0;
    double field_value = 0.0;
};

struct IdentCurve {
    int block = 0;  ///< 1, 2 or 3
    int coord = 0;
    double truth = 0.0;
    double chi_hat = 0.0;  ///< fitted local quadratic-drop coefficient
    std::vector<IdentCurvePoint> points;
};

/// Evaluates the empirical identifiability fields along per-coordinate scans
/// through theta*, one coordinate varying at a time.  The fields are zero at
/// theta* and should drop quadratically nearby for an identified model.
std::vector<IdentCurve> empirical_identifiability(const Model& model, const ObservationGrid& grid,
                                                  const ThetaPoint& theta_star,
                                                  const ScanSpec& scan = {});

}  // namespace hypoql
