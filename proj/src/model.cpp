#include "hypoql/model.hpp"

namespace hypoql {

namespace {

// central difference of f over coordinate i of base, first order
template <typename F>
void central1(const VectorXd& base, int i, double step, F&& f, VectorXd& plus, VectorXd& minus) {
    VectorXd pt = base;
    pt[i] = base[i] + step;
    f(pt, plus);
    pt[i] = base[i] - step;
    f(pt, minus);
}

}  // namespace

void Model::y_drift_jac_x(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const {
    const auto& d = dims();
    out.resize(d.dy, d.dx);
    VectorXd plus, minus;
    auto f = [&](const VectorXd& zz, VectorXd& o) { y_drift(zz, theta3, o); };
    for (int i = 0; i < d.dx; ++i) {
        const double s = fd::step1(z[i]);
        central1(z, i, s, f, plus, minus);
        out.col(i) = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_jac_y(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const {
    const auto& d = dims();
    out.resize(d.dy, d.dy);
    VectorXd plus, minus;
    auto f = [&](const VectorXd& zz, VectorXd& o) { y_drift(zz, theta3, o); };
    for (int i = 0; i < d.dy; ++i) {
        const int idx = d.dx + i;
        const double s = fd::step1(z[idx]);
        central1(z, idx, s, f, plus, minus);
        out.col(i) = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_hess_x(const VectorXd& z, const VectorXd& theta3,
                           std::vector<MatrixXd>& out) const {
    const auto& d = dims();
    out.resize(d.dy);
    for (auto& m : out) m.setZero(d.dx, d.dx);

    VectorXd f0, fp, fm, fpp, fpm, fmp, fmm;
    y_drift(z, theta3, f0);
    VectorXd pt = z;
    for (int a = 0; a < d.dx; ++a) {
        const double sa = fd::step2(z[a]);
        // diagonal
        pt = z;
        pt[a] = z[a] + sa;
        y_drift(pt, theta3, fp);
        pt[a] = z[a] - sa;
        y_drift(pt, theta3, fm);
        for (int i = 0; i < d.dy; ++i) out[i](a, a) = (fp[i] - 2.0 * f0[i] + fm[i]) / (sa * sa);
        // mixed
        for (int b = a + 1; b < d.dx; ++b) {
            const double sb = fd::step2(z[b]);
            pt = z;
            pt[a] = z[a] + sa;
            pt[b] = z[b] + sb;
            y_drift(pt, theta3, fpp);
            pt[b] = z[b] - sb;
            y_drift(pt, theta3, fpm);
            pt[a] = z[a] - sa;
            pt[b] = z[b] + sb;
            y_drift(pt, theta3, fmp);
            pt[b] = z[b] - sb;
            y_drift(pt, theta3, fmm);
            for (int i = 0; i < d.dy; ++i) {
                const double v = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (4.0 * sa * sb);
                out[i](a, b) = v;
                out[i](b, a) = v;
            }
        }
    }
}

void Model::x_drift_dtheta(const VectorXd& z, const VectorXd& theta2, MatrixXd& out) const {
    const auto& d = dims();
    out.resize(d.dx, d.p2);
    VectorXd plus, minus;
    auto f = [&](const VectorXd& th, VectorXd& o) { x_drift(z, th, o); };
    for (int k = 0; k < d.p2; ++k) {
        const double s = fd::step1(theta2[k]);
        central1(theta2, k, s, f, plus, minus);
        out.col(k) = (plus - minus) / (2.0 * s);
    }
}

void Model::x_drift_dtheta2(const VectorXd& z, const VectorXd& theta2,
                            std::vector<MatrixXd>& out) const {
    const auto& d = dims();
    out.resize(d.dx);
    for (auto& m : out) m.setZero(d.p2, d.p2);

    VectorXd f0, fp, fm, fpp, fpm, fmp, fmm;
    x_drift(z, theta2, f0);
    VectorXd pt = theta2;
    for (int a = 0; a < d.p2; ++a) {
        const double sa = fd::step2(theta2[a]);
        pt = theta2;
        pt[a] = theta2[a] + sa;
        x_drift(z, pt, fp);
        pt[a] = theta2[a] - sa;
        x_drift(z, pt, fm);
        for (int i = 0; i < d.dx; ++i) out[i](a, a) = (fp[i] - 2.0 * f0[i] + fm[i]) / (sa * sa);
        for (int b = a + 1; b < d.p2; ++b) {
            const double sb = fd::step2(theta2[b]);
            pt = theta2;
            pt[a] = theta2[a] + sa;
            pt[b] = theta2[b] + sb;
            x_drift(z, pt, fpp);
            pt[b] = theta2[b] - sb;
            x_drift(z, pt, fpm);
            pt[a] = theta2[a] - sa;
            pt[b] = theta2[b] + sb;
            x_drift(z, pt, fmp);
            pt[b] = theta2[b] - sb;
            x_drift(z, pt, fmm);
            for (int i = 0; i < d.dx; ++i) {
                const double v = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (4.0 * sa * sb);
                out[i](a, b) = v;
                out[i](b, a) = v;
            }
        }
    }
}

void Model::x_diffusion_dtheta(const VectorXd& z, const VectorXd& theta1,
                               std::vector<MatrixXd>& out) const {
    const auto& d = dims();
    out.resize(d.p1);
    MatrixXd plus, minus;
    VectorXd pt = theta1;
    for (int k = 0; k < d.p1; ++k) {
        const double s = fd::step1(theta1[k]);
        pt = theta1;
        pt[k] = theta1[k] + s;
        x_diffusion(z, pt, plus);
        pt[k] = theta1[k] - s;
        x_diffusion(z, pt, minus);
        out[k] = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_dtheta(const VectorXd& z, const VectorXd& theta3, MatrixXd& out) const {
    const auto& d = dims();
    out.resize(d.dy, d.p3);
    VectorXd plus, minus;
    auto f = [&](const VectorXd& th, VectorXd& o) { y_drift(z, th, o); };
    for (int k = 0; k < d.p3; ++k) {
        const double s = fd::step1(theta3[k]);
        central1(theta3, k, s, f, plus, minus);
        out.col(k) = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_jac_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                                 std::vector<MatrixXd>& out) const {
    const auto& d = dims();
    out.resize(d.p3);
    MatrixXd plus, minus;
    VectorXd pt = theta3;
    for (int k = 0; k < d.p3; ++k) {
        const double s = fd::step1(theta3[k]);
        pt = theta3;
        pt[k] = theta3[k] + s;
        y_drift_jac_x(z, pt, plus);
        pt[k] = theta3[k] - s;
        y_drift_jac_x(z, pt, minus);
        out[k] = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_jac_y_dtheta(const VectorXd& z, const VectorXd& theta3,
                                 std::vector<MatrixXd>& out) const {
    const auto& d = dims();
    out.resize(d.p3);
    MatrixXd plus, minus;
    VectorXd pt = theta3;
    for (int k = 0; k < d.p3; ++k) {
        const double s = fd::step1(theta3[k]);
        pt = theta3;
        pt[k] = theta3[k] + s;
        y_drift_jac_y(z, pt, plus);
        pt[k] = theta3[k] - s;
        y_drift_jac_y(z, pt, minus);
        out[k] = (plus - minus) / (2.0 * s);
    }
}

void Model::y_drift_hess_x_dtheta(const VectorXd& z, const VectorXd& theta3,
                                  std::vector<std::vector<MatrixXd>>& out) const {
    const auto& d = dims();
    out.resize(d.p3);
    std::vector<MatrixXd> plus, minus;
    VectorXd pt = theta3;
    for (int k = 0; k < d.p3; ++k) {
        const double s = fd::step1(theta3[k]);
        pt = theta3;
        pt[k] = theta3[k] + s;
        y_drift_hess_x(z, pt, plus);
        pt[k] = theta3[k] - s;
        y_drift_hess_x(z, pt, minus);
        out[k].resize(d.dy);
        for (int i = 0; i < d.dy; ++i) out[k][i] = (plus[i] - minus[i]) / (2.0 * s);
    }
}

FiniteDifferenceModel::FiniteDifferenceModel(std::shared_ptr<const Model> inner)
    : inner_(std::move(inner)) {}

void FiniteDifferenceModel::x_drift(const VectorXd& z, const VectorXd& theta2,
                                    VectorXd& out) const {
    inner_->x_drift(z, theta2, out);
}

void FiniteDifferenceModel::x_diffusion(const VectorXd& z, const VectorXd& theta1,
                                        MatrixXd& out) const {
    inner_->x_diffusion(z, theta1, out);
}

void FiniteDifferenceModel::y_drift(const VectorXd& z, const VectorXd& theta3,
                                    VectorXd& out) const {
    inner_->y_drift(z, theta3, out);
}

}  // namespace hypoql
