#include "hypoql/algebra.hpp"

#include <cmath>

namespace hypoql {

bool SpdCholesky::factor(const MatrixXd& a) {
    n_ = static_cast<int>(a.rows());
    L_.resize(n_, n_);
    L_.setZero();
    log_det_ = 0.0;
    min_pivot_ = std::numeric_limits<double>::infinity();

    const double tol = kPivotRelTol * std::max(a.trace() / n_, 0.0);
    for (int j = 0; j < n_; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= L_(j, k) * L_(j, k);
        min_pivot_ = std::min(min_pivot_, d);
        if (!(d > tol)) return false;  // also rejects NaN
        const double ljj = std::sqrt(d);
        L_(j, j) = ljj;
        log_det_ += 2.0 * std::log(ljj);
        for (int i = j + 1; i < n_; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= L_(i, k) * L_(j, k);
            L_(i, j) = s / ljj;
        }
    }
    return true;
}

void SpdCholesky::solve(const VectorXd& rhs, VectorXd& out) const {
    work_ = rhs;
    L_.triangularView<Eigen::Lower>().solveInPlace(work_);
    L_.transpose().triangularView<Eigen::Upper>().solveInPlace(work_);
    out = work_;
}

MatrixXd SpdCholesky::inverse() const {
    MatrixXd inv;
    inverse_into(inv);
    return inv;
}

void SpdCholesky::inverse_into(MatrixXd& out) const {
    out.setIdentity(n_, n_);
    L_.triangularView<Eigen::Lower>().solveInPlace(out);
    L_.transpose().triangularView<Eigen::Upper>().solveInPlace(out);
}

double SpdCholesky::quad_inv(const VectorXd& v) const {
    work_ = v;
    L_.triangularView<Eigen::Lower>().solveInPlace(work_);
    return work_.squaredNorm();
}

// ---------------------------------------------------------------------------

MatrixXd eval_noise_cov(const Model& model, const VectorXd& z, const VectorXd& theta1) {
    MatrixXd b;
    model.x_diffusion(z, theta1, b);
    return b * b.transpose();
}

MatrixXd eval_projected_noise_cov(const Model& model, const VectorXd& z, const VectorXd& theta1,
                                  const VectorXd& theta3) {
    MatrixXd hx;
    model.y_drift_jac_x(z, theta3, hx);
    const MatrixXd c = eval_noise_cov(model, z, theta1);
    return hx * c * hx.transpose();
}

VectorXd eval_y_drift_generator(const Model& model, const VectorXd& z, const VectorXd& theta1,
                                const VectorXd& theta2, const VectorXd& theta3) {
    const auto& d = model.dims();
    VectorXd a, h;
    MatrixXd hx, hy;
    std::vector<MatrixXd> hxx;
    model.x_drift(z, theta2, a);
    model.y_drift(z, theta3, h);
    model.y_drift_jac_x(z, theta3, hx);
    model.y_drift_jac_y(z, theta3, hy);
    model.y_drift_hess_x(z, theta3, hxx);
    const MatrixXd c = eval_noise_cov(model, z, theta1);

    VectorXd out = hx * a + hy * h;
    for (int i = 0; i < d.dy; ++i) out[i] += 0.5 * hxx[i].cwiseProduct(c).sum();
    return out;
}

VectorXd eval_y_drift_corrected(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                                double h) {
    VectorXd hdrift;
    model.y_drift(z, theta.theta3, hdrift);
    if (h == 0.0) return hdrift;
    return hdrift +
           0.5 * h * eval_y_drift_generator(model, z, theta.theta1, theta.theta2, theta.theta3);
}

MatrixXd eval_residual_cov(const Model& model, const VectorXd& z, const VectorXd& theta1,
                           const VectorXd& theta3) {
    const auto& d = model.dims();
    MatrixXd hx;
    model.y_drift_jac_x(z, theta3, hx);
    const MatrixXd c = eval_noise_cov(model, z, theta1);
    const MatrixXd hxc = hx * c;

    MatrixXd s(d.dz(), d.dz());
    s.topLeftCorner(d.dx, d.dx) = c;
    s.topRightCorner(d.dx, d.dy) = 0.5 * hxc.transpose();
    s.bottomLeftCorner(d.dy, d.dx) = 0.5 * hxc;
    s.bottomRightCorner(d.dy, d.dy) = (hxc * hx.transpose()) / 3.0;
    return s;
}

ResidualCovInverse eval_residual_cov_inverse(const Model& model, const VectorXd& z,
                                             const VectorXd& theta1, const VectorXd& theta3) {
    const auto& d = model.dims();
    MatrixXd hx;
    model.y_drift_jac_x(z, theta3, hx);
    const MatrixXd c = eval_noise_cov(model, z, theta1);
    const MatrixXd v = hx * c * hx.transpose();

    SpdCholesky cholC, cholV;
    if (!cholC.factor(c)) {
        throw NonInvertibleError(NonInvertibleError::Which::C, cholC.min_pivot());
    }
    if (!cholV.factor(v)) {
        throw NonInvertibleError(NonInvertibleError::Which::V, cholV.min_pivot());
    }

    const MatrixXd cinv = cholC.inverse();
    const MatrixXd vinv = cholV.inverse();
    const MatrixXd vinv_hx = vinv * hx;

    ResidualCovInverse out;
    out.inv.resize(d.dz(), d.dz());
    out.inv.topLeftCorner(d.dx, d.dx) = cinv + 3.0 * hx.transpose() * vinv_hx;
    out.inv.topRightCorner(d.dx, d.dy) = -6.0 * vinv_hx.transpose();
    out.inv.bottomLeftCorner(d.dy, d.dx) = -6.0 * vinv_hx;
    out.inv.bottomRightCorner(d.dy, d.dy) = 12.0 * vinv;
    // Schur identity: det S = det C * det(V/12)
    out.log_det = cholC.log_det() + cholV.log_det() - d.dy * std::log(12.0);
    return out;
}

MatrixXd eval_y_noise_gain(const Model& model, const VectorXd& z, const VectorXd& theta1,
                           const VectorXd& theta3) {
    MatrixXd b, hx;
    model.x_diffusion(z, theta1, b);
    model.y_drift_jac_x(z, theta3, hx);
    return (hx * b) / std::sqrt(3.0);
}

// ---------------------------------------------------------------------------

namespace detail {

bool WeightContext::compute(const Model& model, const VectorXd& z, const VectorXd& theta1,
                            const VectorXd& theta3s) {
    model.x_diffusion(z, theta1, B);
    model.y_drift_jac_x(z, theta3s, Hx);
    C.noalias() = B * B.transpose();
    HxC.noalias() = Hx * C;
    V.noalias() = HxC * Hx.transpose();
    if (!cholC.factor(C) || !cholV.factor(V)) return false;
    log_det_S = cholC.log_det() + cholV.log_det() -
                static_cast<double>(Hx.rows()) * std::log(12.0);
    return true;
}

void WeightContext::compute_dtheta1(const Model& model, const VectorXd& z,
                                    const VectorXd& theta1) {
    model.x_diffusion_dtheta(z, theta1, dB1);
    dC1.resize(dB1.size());
    for (size_t k = 0; k < dB1.size(); ++k) {
        scratch.noalias() = dB1[k] * B.transpose();
        dC1[k] = scratch + scratch.transpose();
    }
}

void WeightContext::compute_dtheta3(const Model& model, const VectorXd& z,
                                    const VectorXd& theta3s) {
    model.y_drift_jac_x_dtheta(z, theta3s, dHx3);
}

void ResidualContext::compute(const Model& model, const VectorXd& z, const ThetaPoint& theta,
                              const MatrixXd& C, double h) {
    const auto& d = model.dims();
    model.x_drift(z, theta.theta2, A);
    model.y_drift(z, theta.theta3, H);
    model.y_drift_jac_x(z, theta.theta3, Hx);
    model.y_drift_jac_y(z, theta.theta3, Hy);
    model.y_drift_hess_x(z, theta.theta3, Hxx);

    LH.noalias() = Hx * A;
    LH.noalias() += Hy * H;
    for (int i = 0; i < d.dy; ++i) LH[i] += 0.5 * Hxx[i].cwiseProduct(C).sum();
    G = H + 0.5 * h * LH;
}

void ResidualContext::compute_dtheta1(const Model& model, const std::vector<MatrixXd>& dC1) {
    const auto& d = model.dims();
    dLH1.resize(d.dy, d.p1);
    for (int k = 0; k < d.p1; ++k) {
        for (int i = 0; i < d.dy; ++i) dLH1(i, k) = 0.5 * Hxx[i].cwiseProduct(dC1[k]).sum();
    }
}

void ResidualContext::compute_dtheta2(const Model& model, const VectorXd& z,
                                      const VectorXd& theta2) {
    model.x_drift_dtheta(z, theta2, dA2);
    dLH2.noalias() = Hx * dA2;
}

void ResidualContext::compute_dtheta3(const Model& model, const VectorXd& z,
                                      const ThetaPoint& theta, const MatrixXd& C) {
    const auto& d = model.dims();
    model.y_drift_dtheta(z, theta.theta3, dH3);
    model.y_drift_jac_x_dtheta(z, theta.theta3, dHx3);
    model.y_drift_jac_y_dtheta(z, theta.theta3, dHy3);
    model.y_drift_hess_x_dtheta(z, theta.theta3, dHxx3);

    dLH3.resize(d.dy, d.p3);
    for (int k = 0; k < d.p3; ++k) {
        dLH3.col(k).noalias() = dHx3[k] * A;
        dLH3.col(k).noalias() += dHy3[k] * H;
        dLH3.col(k).noalias() += Hy * dH3.col(k);
        for (int i = 0; i < d.dy; ++i) dLH3(i, k) += 0.5 * dHxx3[k][i].cwiseProduct(C).sum();
    }
}

void SQuadratic::solve(const WeightContext& w, const VectorXd& d1, const VectorXd& d2) {
    m.noalias() = w.Hx * d1;
    rres = d2 - 0.5 * m;
    w.cholC.solve(d1, a);
    w.cholV.solve(rres, b);
    quad = d1.dot(a) + 12.0 * rres.dot(b);
    u1 = a;
    u1.noalias() -= 6.0 * (w.Hx.transpose() * b);
    u2 = 12.0 * b;
}

}  // namespace detail

}  // namespace hypoql
