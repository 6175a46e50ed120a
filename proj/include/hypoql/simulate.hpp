#pragma once

#include "hypoql/model.hpp"
#include "hypoql/rng.hpp"

namespace hypoql {

struct SimConfig {
    long n = 1000;        ///< observation count (grid has n+1 rows)
    double h = 0.01;      ///< observation step
    int substeps = 20;    ///< fine Euler steps per observation step
    VectorXd z0;          ///< initial state; zeros(dz) when empty
    uint64_t seed = 1;
    uint64_t stream = 0;  ///< rng substream; Monte Carlo uses the replication index
    long burn_in = -1;    ///< observations discarded up front; -1 = 10% of n

    long effective_burn_in() const { return burn_in >= 0 ? burn_in : n / 10; }
    void validate() const;
};

/// Discrete observations (Z_{t_j})_{j=0..n} on an equidistant grid.
/// States are stored as columns so a single observation is contiguous.
struct ObservationGrid {
    double h = 0.0;
    Dimensions dims;
    MatrixXd states;  ///< dz x (n+1); column j = Z_{t_j}

    long n() const { return states.cols() - 1; }
    Eigen::Ref<const VectorXd> state(long j) const { return states.col(j); }
};

/// Euler-Maruyama on the fine grid: X moves by drift + noise, Y by drift
/// only (the defining degeneracy).  Deterministic given (cfg.seed,
/// cfg.stream).  Throws NumericalBlowupError when a coordinate passes 1e8.
ObservationGrid simulate_path(const Model& model, const ThetaPoint& theta_true,
                              const SimConfig& cfg);

/// Exact joint Gaussian pair per Wiener coordinate:
///   dw   ~ N(0, h),   zeta ~ N(0, h^3),   Cov(dw, zeta) = (sqrt(3)/2) h^2
/// zeta is sqrt(3) times the iterated integral of w over the step.
void sample_wiener_pair(double h, int r, CounterRng& rng, VectorXd& dw, VectorXd& zeta);

/// One-step sampler whose conditional law matches the leading-order increment
/// expansion exactly:
///   dX = h A + B dw
///   dY = h G + Hx B (zeta / sqrt(3))
/// Used by distribution-level tests, not by simulate_path.
void simulate_linearized_increment(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                                   double h, CounterRng& rng, VectorXd& dX, VectorXd& dY);

constexpr double kBlowupThreshold = 1e8;

}  // namespace hypoql
