#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hypoql {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// State and parameter-block sizes of a degenerate diffusion system
/// Z = (X, Y): X carries the noise (r-dimensional Wiener), Y is noise-free.
struct Dimensions {
    int dx = 0;  ///< dim of X
    int dy = 0;  ///< dim of Y
    int r = 0;   ///< Wiener dimension
    int p1 = 0;  ///< diffusion parameter block
    int p2 = 0;  ///< x-drift parameter block
    int p3 = 0;  ///< y-drift parameter block

    int dz() const { return dx + dy; }
    int p() const { return p1 + p2 + p3; }

    void validate() const;
};

/// Bounded open box for one parameter block.
struct ParameterBox {
    VectorXd lower;
    VectorXd upper;

    int dim() const { return static_cast<int>(lower.size()); }
    void validate(const std::string& label) const;

    bool contains_open(const VectorXd& v) const;
    bool contains_closure(const VectorXd& v) const;
    bool on_boundary(const VectorXd& v, double tol = 0.0) const;
    VectorXd clamp(const VectorXd& v) const;
    VectorXd center() const { return 0.5 * (lower + upper); }
    VectorXd width() const { return upper - lower; }
};

struct ParameterBoxes {
    ParameterBox theta1, theta2, theta3;
};

/// Full parameter value (theta1, theta2, theta3).
struct ThetaPoint {
    VectorXd theta1, theta2, theta3;

    VectorXd stacked() const;
    static ThetaPoint from_stacked(const VectorXd& v, const Dimensions& dims);
    bool in_closure(const ParameterBoxes& boxes) const;
    ThetaPoint clamped(const ParameterBoxes& boxes) const;
};

enum class Block { theta1 = 0, theta2 = 1, theta3 = 2 };

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// SPD factorization of C or V failed at a state point.
class NonInvertibleError : public Error {
public:
    enum class Which { C, V };
    NonInvertibleError(Which which, double min_pivot);
    Which which() const { return which_; }
    double min_pivot() const { return min_pivot_; }

private:
    Which which_;
    double min_pivot_;
};

/// A simulated state coordinate left the admissible range.
class NumericalBlowupError : public Error {
public:
    explicit NumericalBlowupError(long step_index);
    long step_index() const { return step_index_; }

private:
    long step_index_;
};

/// No optimizer start reached a stationary or boundary point.
class OptimFailedError : public Error {
public:
    explicit OptimFailedError(const std::string& stage);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, long line);
    long line() const { return line_; }

private:
    long line_;
};

class NonEquidistantError : public Error {
public:
    explicit NonEquidistantError(long index);
    long index() const { return index_; }

private:
    long index_;
};

}  // namespace hypoql
