#include "hypoql/simulate.hpp"

#include "hypoql/algebra.hpp"

#include <cmath>

namespace hypoql {

void SimConfig::validate() const {
    if (n < 2) throw std::invalid_argument("sim: n must be >= 2");
    if (!(h > 0.0)) throw std::invalid_argument("sim: h must be > 0");
    if (substeps < 1) throw std::invalid_argument("sim: substeps must be >= 1");
}

ObservationGrid simulate_path(const Model& model, const ThetaPoint& theta_true,
                              const SimConfig& cfg) {
    cfg.validate();
    const auto& d = model.dims();
    if (!theta_true.in_closure(model.boxes())) {
        throw std::invalid_argument("simulate_path: theta outside the parameter box closure");
    }

    VectorXd z = cfg.z0.size() == 0 ? VectorXd::Zero(d.dz()) : cfg.z0;
    if (z.size() != d.dz()) throw std::invalid_argument("simulate_path: z0 has wrong size");

    ObservationGrid grid;
    grid.h = cfg.h;
    grid.dims = d;
    grid.states.resize(d.dz(), cfg.n + 1);

    CounterRng rng(cfg.seed, cfg.stream);
    const double fine = cfg.h / cfg.substeps;
    const double sqrt_fine = std::sqrt(fine);
    const long burn = cfg.effective_burn_in();

    VectorXd a(d.dx), hdrift(d.dy), noise(d.r);
    MatrixXd b(d.dx, d.r);
    long fine_step = 0;

    auto advance_one_obs = [&]() {
        for (int s = 0; s < cfg.substeps; ++s, ++fine_step) {
            model.x_drift(z, theta_true.theta2, a);
            model.x_diffusion(z, theta_true.theta1, b);
            model.y_drift(z, theta_true.theta3, hdrift);
            for (int k = 0; k < d.r; ++k) noise[k] = rng.normal();
            z.head(d.dx) += fine * a;
            z.head(d.dx).noalias() += sqrt_fine * (b * noise);
            z.tail(d.dy) += fine * hdrift;
            if (!(z.cwiseAbs().maxCoeff() < kBlowupThreshold)) {
                throw NumericalBlowupError(fine_step);
            }
        }
    };

    for (long j = 0; j < burn; ++j) advance_one_obs();
    grid.states.col(0) = z;
    for (long j = 1; j <= cfg.n; ++j) {
        advance_one_obs();
        grid.states.col(j) = z;
    }
    return grid;
}

void sample_wiener_pair(double h, int r, CounterRng& rng, VectorXd& dw, VectorXd& zeta) {
    dw.resize(r);
    zeta.resize(r);
    if (h == 0.0) {
        dw.setZero();
        zeta.setZero();
        return;
    }
    // Cholesky of [[h, (sqrt3/2) h^2], [(sqrt3/2) h^2, h^3]] per coordinate
    const double sqrt_h = std::sqrt(h);
    const double h32 = h * sqrt_h;
    const double c1 = 0.5 * std::sqrt(3.0) * h32;
    const double c2 = 0.5 * h32;
    for (int k = 0; k < r; ++k) {
        double g1, g2;
        rng.normal_pair(g1, g2);
        dw[k] = sqrt_h * g1;
        zeta[k] = c1 * g1 + c2 * g2;
    }
}

void simulate_linearized_increment(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                                   double h, CounterRng& rng, VectorXd& dX, VectorXd& dY) {
    const auto& d = model.dims();
    VectorXd a, dw, zeta;
    MatrixXd b, hx;
    model.x_drift(z, theta.theta2, a);
    model.x_diffusion(z, theta.theta1, b);
    model.y_drift_jac_x(z, theta.theta3, hx);
    const VectorXd g = eval_y_drift_corrected(model, z, theta, h);

    sample_wiener_pair(h, d.r, rng, dw, zeta);
    dX = h * a + b * dw;
    // Hx B * (iterated integral) with the integral recovered as zeta/sqrt(3)
    dY = h * g + hx * (b * zeta) / std::sqrt(3.0);
}

}  // namespace hypoql
