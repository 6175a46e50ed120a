#pragma once

#include "hypoql/estimate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hypoql {

struct SchedulePoint {
    long n = 0;
    double h = 0.0;
};

/// Builds a schedule from the step rule h = c * n^{-alpha}.
std::vector<SchedulePoint> schedule_from_rule(const std::vector<long>& n_list, double c,
                                              double alpha);

struct McConfig {
    std::string model = "oscillator";
    std::optional<ThetaPoint> theta_true;  ///< defaults to the model's built-in truth
    int replications = 100;
    std::vector<SchedulePoint> schedule{{10000, 0.005}};
    std::vector<EstimateMethod> estimators{EstimateMethod::adaptive};
    uint64_t master_seed = 1;
    int workers = 0;  ///< 0 = OpenMP default
    int substeps = 20;
    long burn_in = -1;
    VectorXd z0;
    EstimatorConfig est;
    double abort_failure_fraction = 0.2;

    /// hard errors on malformed fields, stderr warnings when a schedule point
    /// leaves the asymptotic regime nh >= 10, nh^2 <= 1
    void validate() const;
};

/// One (replication, estimator) outcome; one CSV row per block coordinate.
struct RepRecord {
    int rep = 0;
    long n = 0;
    double h = 0.0;
    std::string estimator;
    bool ok = false;
    bool onestep_ok = false;
    VectorXd err1, err2, err3;           ///< theta_hat - theta*
    VectorXd scaled1, scaled2, scaled3;  ///< rate-scaled errors
    VectorXd se1, se2, se3;              ///< plug-in stderr (unscaled)
    VectorXd tvar1, tvar2, tvar3;        ///< rate-scaled target variances
};

struct CoordSummary {
    std::string estimator;
    long n = 0;
    double h = 0.0;
    int block = 0;
    int coord = 0;
    double mean_error = 0.0;
    double scaled_mean = 0.0;
    double scaled_var = 0.0;
    double target_var = 0.0;  ///< mean plug-in rate-scaled variance
    double coverage95 = 0.0;
    long successes = 0;
    long failures = 0;
};

struct BlockRmse {
    std::string estimator;
    long n = 0;
    double h = 0.0;
    int block = 0;
    double rmse_trimmed = 0.0;  ///< top 2% of squared errors dropped
    double rmse_raw = 0.0;
};

struct SlopeFit {
    std::string estimator;
    int block = 0;
    double slope = 0.0;
};

struct McSummary {
    std::vector<CoordSummary> coords;
    std::vector<BlockRmse> rmse;
    std::vector<SlopeFit> slopes;  ///< log rmse_trimmed vs log n, schedules with >= 3 points
    int replications = 0;
    long failed_replications = 0;
};

struct McResult {
    McConfig cfg;
    std::vector<RepRecord> records;
    McSummary summary;
};

/// Runs R replications per schedule point: simulate with stream = replication
/// index, estimate with the selected methods, aggregate in replication order.
/// Requesting "adaptive" also emits "initial" rows (the pipeline initials).
/// Per-replication failures are recorded, not fatal, unless more than
/// abort_failure_fraction of a schedule point fails.
McResult run_replications(const McConfig& cfg);

struct RatioReport {
    // Var[scaled inferior theta3] / Var[scaled adaptive theta3]
    double theta3_ratio = 0.0;
    double theta3_lo = 0.0, theta3_hi = 0.0;
    // Var[scaled one-step theta1] / Var[scaled initial theta1]
    double theta1_ratio = 0.0;
    double theta1_lo = 0.0, theta1_hi = 0.0;
    long pairs3 = 0, pairs1 = 0;
    int bootstrap_resamples = 1000;
};

/// Paired variance ratios with percentile bootstrap intervals over
/// replications (resample indices shared between numerator and denominator).
RatioReport variance_ratio_experiment(const McResult& result, uint64_t bootstrap_seed = 0x626f6f74);

struct QqRow {
    std::string estimator;
    int block = 0;
    int coord = 0;
    long idx = 0;
    double studentized = 0.0;      ///< sorted error / plug-in stderr
    double normal_quantile = 0.0;  ///< Phi^{-1}((idx+0.5)/m)
};

std::vector<QqRow> qq_data(const McResult& result);

/// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1e-9).
double normal_quantile(double p);

}  // namespace hypoql
