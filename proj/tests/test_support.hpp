#pragma once

#include "hypoql/algebra.hpp"
#include "hypoql/model.hpp"
#include "hypoql/simulate.hpp"

#include <functional>
#include <utility>

namespace hypoql::testing {

inline VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

inline VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

inline VectorXd vec3(double a, double b, double c) {
    VectorXd v(3);
    v << a, b, c;
    return v;
}

/// Configurable scalar-block test model.  Coefficients are supplied as
/// lambdas; any derivative not overridden falls back to central differences.
class StubModel : public Model {
public:
    using DriftFn = std::function<void(const VectorXd&, const VectorXd&, VectorXd&)>;
    using DiffFn = std::function<void(const VectorXd&, const VectorXd&, MatrixXd&)>;

    StubModel(Dimensions dims, ParameterBoxes boxes, DriftFn a, DiffFn b, DriftFn h)
        : dims_(dims), boxes_(std::move(boxes)), a_(std::move(a)), b_(std::move(b)),
          h_(std::move(h)) {
        dims_.validate();
    }

    const Dimensions& dims() const override { return dims_; }
    const ParameterBoxes& boxes() const override { return boxes_; }
    std::string name() const override { return "stub"; }

    void x_drift(const VectorXd& z, const VectorXd& th2, VectorXd& out) const override {
        a_(z, th2, out);
    }
    void x_diffusion(const VectorXd& z, const VectorXd& th1, MatrixXd& out) const override {
        b_(z, th1, out);
    }
    void y_drift(const VectorXd& z, const VectorXd& th3, VectorXd& out) const override {
        h_(z, th3, out);
    }

private:
    Dimensions dims_;
    ParameterBoxes boxes_;
    DriftFn a_;
    DiffFn b_;
    DriftFn h_;
};

inline ParameterBoxes unit_boxes(int p1, int p2, int p3) {
    ParameterBoxes b;
    b.theta1 = ParameterBox{VectorXd::Constant(p1, 0.05), VectorXd::Constant(p1, 4.0)};
    b.theta2 = ParameterBox{VectorXd::Constant(p2, -4.0), VectorXd::Constant(p2, 4.0)};
    b.theta3 = ParameterBox{VectorXd::Constant(p3, -4.0), VectorXd::Constant(p3, 4.0)};
    return b;
}

/// Scalar system whose contrast weights are state-independent:
///   A = theta2, B = theta1, H = x + theta3.
/// Every contrast built on data with exactly matched residual moments has a
/// stationary point exactly at theta*, which makes it the reference model for
/// pipeline fixed-point tests.  Boxes are centered on the default truth
/// (1.0, 0.0, 0.25).
class FlatWeightModel : public Model {
public:
    FlatWeightModel() {
        dims_ = Dimensions{1, 1, 1, 1, 1, 1};
        boxes_.theta1 = ParameterBox{vec1(0.5), vec1(1.5)};
        boxes_.theta2 = ParameterBox{vec1(-1.0), vec1(1.0)};
        boxes_.theta3 = ParameterBox{vec1(-0.75), vec1(1.25)};
    }

    const Dimensions& dims() const override { return dims_; }
    const ParameterBoxes& boxes() const override { return boxes_; }
    std::string name() const override { return "flat-weight"; }
    DerivativeMode derivative_mode() const override { return DerivativeMode::analytic; }

    static ThetaPoint truth() { return ThetaPoint{vec1(1.0), vec1(0.0), vec1(0.25)}; }

    void x_drift(const VectorXd&, const VectorXd& th2, VectorXd& out) const override {
        out.resize(1);
        out[0] = th2[0];
    }
    void x_diffusion(const VectorXd&, const VectorXd& th1, MatrixXd& out) const override {
        out.resize(1, 1);
        out(0, 0) = th1[0];
    }
    void y_drift(const VectorXd& z, const VectorXd& th3, VectorXd& out) const override {
        out.resize(1);
        out[0] = z[0] + th3[0];
    }
    void y_drift_jac_x(const VectorXd&, const VectorXd&, MatrixXd& out) const override {
        out.setOnes(1, 1);
    }
    void y_drift_jac_y(const VectorXd&, const VectorXd&, MatrixXd& out) const override {
        out.setZero(1, 1);
    }
    void y_drift_hess_x(const VectorXd&, const VectorXd&,
                        std::vector<MatrixXd>& out) const override {
        out.resize(1);
        out[0].setZero(1, 1);
    }
    void x_drift_dtheta(const VectorXd&, const VectorXd&, MatrixXd& out) const override {
        out.setOnes(1, 1);
    }
    void x_drift_dtheta2(const VectorXd&, const VectorXd&,
                         std::vector<MatrixXd>& out) const override {
        out.resize(1);
        out[0].setZero(1, 1);
    }
    void x_diffusion_dtheta(const VectorXd&, const VectorXd&,
                            std::vector<MatrixXd>& out) const override {
        out.resize(1);
        out[0].setOnes(1, 1);
    }
    void y_drift_dtheta(const VectorXd&, const VectorXd&, MatrixXd& out) const override {
        out.setOnes(1, 1);
    }
    void y_drift_jac_x_dtheta(const VectorXd&, const VectorXd&,
                              std::vector<MatrixXd>& out) const override {
        out.resize(1);
        out[0].setZero(1, 1);
    }
    void y_drift_jac_y_dtheta(const VectorXd&, const VectorXd&,
                              std::vector<MatrixXd>& out) const override {
        out.resize(1);
        out[0].setZero(1, 1);
    }
    void y_drift_hess_x_dtheta(const VectorXd&, const VectorXd&,
                               std::vector<std::vector<MatrixXd>>& out) const override {
        out.resize(1);
        out[0].resize(1);
        out[0][0].setZero(1, 1);
    }

private:
    Dimensions dims_;
    ParameterBoxes boxes_;
};

/// Grid whose increments match the drift corrections exactly: D_j(theta*) = 0.
inline ObservationGrid make_zero_residual_grid(const Model& model, const ThetaPoint& theta,
                                               long n, double h, const VectorXd& z0) {
    const auto& d = model.dims();
    ObservationGrid grid;
    grid.h = h;
    grid.dims = d;
    grid.states.resize(d.dz(), n + 1);
    VectorXd z = z0, a(d.dx);
    grid.states.col(0) = z;
    for (long j = 1; j <= n; ++j) {
        model.x_drift(z, theta.theta2, a);
        const VectorXd g = eval_y_drift_corrected(model, z, theta, h);
        z.head(d.dx) += h * a;
        z.tail(d.dy) += h * g;
        grid.states.col(j) = z;
    }
    return grid;
}

/// Grid whose residuals cycle through +-sqrt(dz) * chol(S) e_k, so the
/// empirical residual mean is exactly zero and the empirical second moment is
/// exactly S.  On models with state-independent contrast weights this makes
/// theta* an exact stationary point of every contrast.  n must be a multiple
/// of 2*dz.
inline ObservationGrid make_moment_matched_grid(const Model& model, const ThetaPoint& theta,
                                                long n, double h, const VectorXd& z0) {
    const auto& d = model.dims();
    if (n % (2 * d.dz()) != 0) throw std::invalid_argument("n must be a multiple of 2*dz");
    ObservationGrid grid;
    grid.h = h;
    grid.dims = d;
    grid.states.resize(d.dz(), n + 1);
    VectorXd z = z0, a(d.dx);
    grid.states.col(0) = z;
    const double sqrt_h = std::sqrt(h);
    const double h32 = h * sqrt_h;
    for (long j = 1; j <= n; ++j) {
        model.x_drift(z, theta.theta2, a);
        const VectorXd g = eval_y_drift_corrected(model, z, theta, h);
        const MatrixXd s = eval_residual_cov(model, z, theta.theta1, theta.theta3);
        const Eigen::LLT<MatrixXd> llt(s);
        const int k = static_cast<int>((j - 1) / 2) % d.dz();
        const double sign = (j % 2 == 1) ? 1.0 : -1.0;
        const VectorXd dres = sign * std::sqrt(static_cast<double>(d.dz())) *
                              (MatrixXd(llt.matrixL()).col(k));
        z.head(d.dx) += h * a + sqrt_h * dres.head(d.dx);
        z.tail(d.dy) += h * g + h32 * dres.tail(d.dy);
        grid.states.col(j) = z;
    }
    return grid;
}

}  // namespace hypoql::testing
