#include "hypoql/models.hpp"

#include <nlohmann/json.hpp>

namespace hypoql {

namespace {

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

VectorXd vec3(double a, double b, double c) {
    VectorXd v(3);
    v << a, b, c;
    return v;
}

ParameterBoxes boxes_from_json(const nlohmann::json& params, ParameterBoxes defaults) {
    // optional override: {"box1": [[lo...],[hi...]], "box2": ..., "box3": ...}
    auto load = [&](const char* key, ParameterBox& box) {
        if (!params.is_object() || !params.contains(key)) return;
        const auto& b = params.at(key);
        std::vector<double> lo = b.at(0).get<std::vector<double>>();
        std::vector<double> hi = b.at(1).get<std::vector<double>>();
        box.lower = Eigen::Map<const VectorXd>(lo.data(), static_cast<long>(lo.size()));
        box.upper = Eigen::Map<const VectorXd>(hi.data(), static_cast<long>(hi.size()));
    };
    load("box1", defaults.theta1);
    load("box2", defaults.theta2);
    load("box3", defaults.theta3);
    defaults.theta1.validate("theta1");
    defaults.theta2.validate("theta2");
    defaults.theta3.validate("theta3");
    return defaults;
}

}  // namespace

// ---------------------------------------------------------------------------
// linear oscillator

LinearOscillatorModel::LinearOscillatorModel() {
    dims_ = Dimensions{1, 1, 1, 1, 2, 1};
    dims_.validate();
    boxes_.theta1 = ParameterBox{vec1(0.2), vec1(2.5)};
    boxes_.theta2 = ParameterBox{vec2(0.2, 0.2), vec2(3.0, 3.0)};
    boxes_.theta3 = ParameterBox{vec1(0.3), vec1(2.5)};
}

LinearOscillatorModel::LinearOscillatorModel(ParameterBoxes boxes) : LinearOscillatorModel() {
    boxes_ = std::move(boxes);
    boxes_.theta1.validate("theta1");
    boxes_.theta2.validate("theta2");
    boxes_.theta3.validate("theta3");
}

ThetaPoint LinearOscillatorModel::default_truth() {
    return ThetaPoint{vec1(0.7), vec2(1.3, 0.9), vec1(1.1)};
}

void LinearOscillatorModel::stationary_moments(const ThetaPoint& theta, double& var_x,
                                               double& cov_xy, double& var_y) {
    // drift matrix [[-a, -b], [c, 0]], noise q = theta1^2 on X only
    const double a = theta.theta2[0];
    const double b = theta.theta2[1];
    const double c = theta.theta3[0];
    const double q = theta.theta1[0] * theta.theta1[0];
    var_x = q / (2.0 * a);
    cov_xy = 0.0;
    var_y = c * q / (2.0 * a * b);
}

void LinearOscillatorModel::x_drift(const VectorXd& z, const VectorXd& theta2,
                                    VectorXd& out) const {
    out.resize(1);
    out[0] = -theta2[0] * z[0] - theta2[1] * z[1];
}

void LinearOscillatorModel::x_diffusion(const VectorXd&, const VectorXd& theta1,
                                        MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = theta1[0];
}

void LinearOscillatorModel::y_drift(const VectorXd& z, const VectorXd& theta3,
                                    VectorXd& out) const {
    out.resize(1);
    out[0] = theta3[0] * z[0];
}

void LinearOscillatorModel::y_drift_jac_x(const VectorXd&, const VectorXd& theta3,
                                          MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = theta3[0];
}

void LinearOscillatorModel::y_drift_jac_y(const VectorXd&, const VectorXd&, MatrixXd& out) const {
    out.setZero(1, 1);
}

void LinearOscillatorModel::y_drift_hess_x(const VectorXd&, const VectorXd&,
                                           std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setZero(1, 1);
}

void LinearOscillatorModel::x_drift_dtheta(const VectorXd& z, const VectorXd&,
                                           MatrixXd& out) const {
    out.resize(1, 2);
    out(0, 0) = -z[0];
    out(0, 1) = -z[1];
}

void LinearOscillatorModel::x_drift_dtheta2(const VectorXd&, const VectorXd&,
                                            std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setZero(2, 2);
}

void LinearOscillatorModel::x_diffusion_dtheta(const VectorXd&, const VectorXd&,
                                               std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setOnes(1, 1);
}

void LinearOscillatorModel::y_drift_dtheta(const VectorXd& z, const VectorXd&,
                                           MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = z[0];
}

void LinearOscillatorModel::y_drift_jac_x_dtheta(const VectorXd&, const VectorXd&,
                                                 std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setOnes(1, 1);
}

void LinearOscillatorModel::y_drift_jac_y_dtheta(const VectorXd&, const VectorXd&,
                                                 std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setZero(1, 1);
}

void LinearOscillatorModel::y_drift_hess_x_dtheta(const VectorXd&, const VectorXd&,
                                                  std::vector<std::vector<MatrixXd>>& out) const {
    out.resize(1);
    out[0].resize(1);
    out[0][0].setZero(1, 1);
}

// ---------------------------------------------------------------------------
// FitzHugh-Nagumo

FitzHughNagumoModel::FitzHughNagumoModel() {
    dims_ = Dimensions{1, 1, 1, 1, 1, 3};
    dims_.validate();
    boxes_.theta1 = ParameterBox{vec1(0.1), vec1(1.5)};
    boxes_.theta2 = ParameterBox{vec1(0.5), vec1(4.0)};
    boxes_.theta3 = ParameterBox{vec3(0.3, 0.3, 0.05), vec3(2.0, 2.0, 1.5)};
}

ThetaPoint FitzHughNagumoModel::default_truth() {
    return ThetaPoint{vec1(0.4), vec1(1.5), vec3(1.0, 1.0, 0.5)};
}

void FitzHughNagumoModel::x_drift(const VectorXd& z, const VectorXd& theta2,
                                  VectorXd& out) const {
    out.resize(1);
    const double x = z[0];
    out[0] = theta2[0] * (x - x * x * x - z[1]);
}

void FitzHughNagumoModel::x_diffusion(const VectorXd&, const VectorXd& theta1,
                                      MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = theta1[0];
}

void FitzHughNagumoModel::y_drift(const VectorXd& z, const VectorXd& theta3,
                                  VectorXd& out) const {
    out.resize(1);
    out[0] = theta3[0] * z[0] - theta3[1] * z[1] + theta3[2];
}

void FitzHughNagumoModel::y_drift_jac_x(const VectorXd&, const VectorXd& theta3,
                                        MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = theta3[0];
}

void FitzHughNagumoModel::y_drift_jac_y(const VectorXd&, const VectorXd& theta3,
                                        MatrixXd& out) const {
    out.resize(1, 1);
    out(0, 0) = -theta3[1];
}

void FitzHughNagumoModel::y_drift_hess_x(const VectorXd&, const VectorXd&,
                                         std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setZero(1, 1);
}

void FitzHughNagumoModel::x_drift_dtheta(const VectorXd& z, const VectorXd&,
                                         MatrixXd& out) const {
    out.resize(1, 1);
    const double x = z[0];
    out(0, 0) = x - x * x * x - z[1];
}

void FitzHughNagumoModel::x_drift_dtheta2(const VectorXd&, const VectorXd&,
                                          std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setZero(1, 1);
}

void FitzHughNagumoModel::x_diffusion_dtheta(const VectorXd&, const VectorXd&,
                                             std::vector<MatrixXd>& out) const {
    out.resize(1);
    out[0].setOnes(1, 1);
}

void FitzHughNagumoModel::y_drift_dtheta(const VectorXd& z, const VectorXd&,
                                         MatrixXd& out) const {
    out.resize(1, 3);
    out(0, 0) = z[0];
    out(0, 1) = -z[1];
    out(0, 2) = 1.0;
}

void FitzHughNagumoModel::y_drift_jac_x_dtheta(const VectorXd&, const VectorXd&,
                                               std::vector<MatrixXd>& out) const {
    out.resize(3);
    out[0].setOnes(1, 1);
    out[1].setZero(1, 1);
    out[2].setZero(1, 1);
}

void FitzHughNagumoModel::y_drift_jac_y_dtheta(const VectorXd&, const VectorXd&,
                                               std::vector<MatrixXd>& out) const {
    out.resize(3);
    out[0].setZero(1, 1);
    out[1].setConstant(1, 1, -1.0);
    out[2].setZero(1, 1);
}

void FitzHughNagumoModel::y_drift_hess_x_dtheta(const VectorXd&, const VectorXd&,
                                                std::vector<std::vector<MatrixXd>>& out) const {
    out.resize(3);
    for (auto& per_theta : out) {
        per_theta.resize(1);
        per_theta[0].setZero(1, 1);
    }
}

// ---------------------------------------------------------------------------
// registry

ModelRegistry::ModelRegistry() {
    factories_["oscillator"] = [](const nlohmann::json& params) {
        ParameterBoxes defaults = LinearOscillatorModel().boxes();
        return std::make_shared<const LinearOscillatorModel>(boxes_from_json(params, defaults));
    };
    factories_["fhn"] = [](const nlohmann::json&) {
        return std::make_shared<const FitzHughNagumoModel>();
    };
}

ModelRegistry& ModelRegistry::instance() {
    static ModelRegistry registry;
    return registry;
}

void ModelRegistry::add(const std::string& name, ModelFactory factory) {
    factories_[name] = std::move(factory);
}

bool ModelRegistry::has(const std::string& name) const { return factories_.count(name) > 0; }

std::shared_ptr<const Model> ModelRegistry::make(const std::string& name,
                                                 const nlohmann::json& params) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) throw std::invalid_argument("unknown model: " + name);
    return it->second(params);
}

std::shared_ptr<const Model> ModelRegistry::make(const std::string& name) const {
    return make(name, nlohmann::json::object());
}

std::vector<std::string> ModelRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : factories_) out.push_back(k);
    return out;
}

std::shared_ptr<const Model> make_model(const std::string& name) {
    return ModelRegistry::instance().make(name);
}

ThetaPoint default_truth_for(const std::string& model_name) {
    if (model_name == "oscillator" || model_name == "oscillator/fd")
        return LinearOscillatorModel::default_truth();
    if (model_name == "fhn" || model_name == "fhn/fd") return FitzHughNagumoModel::default_truth();
    throw std::invalid_argument("no default truth for model " + model_name +
                                "; supply theta in the config");
}

}  // namespace hypoql
