#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spinqsd {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;

/// Real 3x3 orthogonal matrix with unit determinant.
using Rotation3 = Eigen::Matrix3d;

inline constexpr cplx kI{0.0, 1.0};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input. Carries every violation found, not only the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    explicit ConfigError(const std::string& violation)
        : ConfigError(std::vector<std::string>{violation}) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// A requested full Hilbert space exceeds the configured dimension cap.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Integration failure: norm underflow or a non-finite value.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long step = -1) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

}  // namespace spinqsd
