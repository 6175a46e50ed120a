#include "hypoql/types.hpp"

#include <sstream>

namespace hypoql {

void Dimensions::validate() const {
    if (dx < 1 || dy < 1 || r < 1 || p1 < 1 || p2 < 1 || p3 < 1) {
        std::ostringstream os;
        os << "invalid dimensions: dx=" << dx << " dy=" << dy << " r=" << r
           << " p1=" << p1 << " p2=" << p2 << " p3=" << p3
           << " (all must be >= 1; degenerate systems need dy >= 1)";
        throw std::invalid_argument(os.str());
    }
}

void ParameterBox::validate(const std::string& label) const {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw std::invalid_argument("parameter box " + label + ": bad bound sizes");
    }
    for (int i = 0; i < dim(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
            throw std::invalid_argument("parameter box " + label +
                                        ": bounds must be finite with lower < upper");
        }
    }
}

bool ParameterBox::contains_open(const VectorXd& v) const {
    if (v.size() != lower.size()) return false;
    for (int i = 0; i < dim(); ++i) {
        if (!(v[i] > lower[i] && v[i] < upper[i])) return false;
    }
    return true;
}

bool ParameterBox::contains_closure(const VectorXd& v) const {
    if (v.size() != lower.size()) return false;
    for (int i = 0; i < dim(); ++i) {
        if (!(v[i] >= lower[i] && v[i] <= upper[i])) return false;
    }
    return true;
}

bool ParameterBox::on_boundary(const VectorXd& v, double tol) const {
    for (int i = 0; i < dim(); ++i) {
        if (v[i] <= lower[i] + tol || v[i] >= upper[i] - tol) return true;
    }
    return false;
}

VectorXd ParameterBox::clamp(const VectorXd& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
}

VectorXd ThetaPoint::stacked() const {
    VectorXd out(theta1.size() + theta2.size() + theta3.size());
    out << theta1, theta2, theta3;
    return out;
}

ThetaPoint ThetaPoint::from_stacked(const VectorXd& v, const Dimensions& dims) {
    if (v.size() != dims.p()) throw std::invalid_argument("stacked theta has wrong size");
    ThetaPoint t;
    t.theta1 = v.segment(0, dims.p1);
    t.theta2 = v.segment(dims.p1, dims.p2);
    t.theta3 = v.segment(dims.p1 + dims.p2, dims.p3);
    return t;
}

bool ThetaPoint::in_closure(const ParameterBoxes& boxes) const {
    return boxes.theta1.contains_closure(theta1) && boxes.theta2.contains_closure(theta2) &&
           boxes.theta3.contains_closure(theta3);
}

ThetaPoint ThetaPoint::clamped(const ParameterBoxes& boxes) const {
    return ThetaPoint{boxes.theta1.clamp(theta1), boxes.theta2.clamp(theta2),
                      boxes.theta3.clamp(theta3)};
}

NonInvertibleError::NonInvertibleError(Which which, double min_pivot)
    : Error(std::string("non-invertible ") + (which == Which::C ? "C" : "V") +
            " (min pivot " + std::to_string(min_pivot) + ")"),
      which_(which),
      min_pivot_(min_pivot) {}

NumericalBlowupError::NumericalBlowupError(long step_index)
    : Error("numerical blowup at fine step " + std::to_string(step_index)),
      step_index_(step_index) {}

OptimFailedError::OptimFailedError(const std::string& stage)
    : Error("optimization failed in stage: " + stage), stage_(stage) {}

FormatError::FormatError(const std::string& what, long line)
    : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

NonEquidistantError::NonEquidistantError(long index)
    : Error("time column not equidistant at row " + std::to_string(index)), index_(index) {}

}  // namespace hypoql
