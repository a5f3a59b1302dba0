#include "spinqsd/model.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace spinqsd {

namespace {

const char* const kAxis[3] = {"x", "y", "z"};

void check_hermitian(const CMatrix& a, const std::string& name, double tol,
                     std::vector<std::string>& errors) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = r; c < a.cols(); ++c) {
            const double v = std::abs(a(r, c) - std::conj(a(c, r)));
            if (v > tol) {
                std::ostringstream os;
                os << name << "[" << r << "][" << c << "] violates Hermiticity by " << v;
                errors.push_back(os.str());
            }
        }
    }
}

}  // namespace

double hermiticity_violation(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool ModelSpec::coupling_active(int a) const {
    return coupling[a].size() > 0 && coupling[a].cwiseAbs().maxCoeff() > 0.0;
}

void ModelSpec::validate(double tolerance) const {
    std::vector<std::string> errors;
    const Eigen::Index d = hamiltonian.rows();
    if (d == 0) errors.emplace_back("model: H_S is empty");
    if (hamiltonian.cols() != d) errors.emplace_back("model: H_S is not square");
    if (!hamiltonian.allFinite()) errors.emplace_back("model: H_S has non-finite entries");
    if (hamiltonian.cols() == d) check_hermitian(hamiltonian, "H_S", tolerance, errors);
    bool any = false;
    for (int a = 0; a < 3; ++a) {
        const std::string name = std::string("L^") + kAxis[a];
        if (coupling[a].rows() != d || coupling[a].cols() != d) {
            errors.push_back(name + " must be " + std::to_string(d) + "x" + std::to_string(d));
            continue;
        }
        check_hermitian(coupling[a], name, tolerance, errors);
        any = any || coupling_active(a);
    }
    if (!any) errors.emplace_back("model: all coupling operators vanish");
    if (psi0.size() != d) {
        errors.push_back("model: psi0 must have " + std::to_string(d) + " entries");
    } else if (std::abs(psi0.norm() - 1.0) > tolerance) {
        std::ostringstream os;
        os << "model: psi0 is not normalized (|psi0| - 1 = " << psi0.norm() - 1.0 << ")";
        errors.push_back(os.str());
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty() || points_.front() != 0.0)
        throw ConfigError("time grid must start at 0");
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (!(points_[i] > points_[i - 1])) throw ConfigError("time grid must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double t_max, std::size_t n) {
    if (n < 2 || !(t_max > 0.0)) throw ConfigError("uniform grid requires n >= 2 and t_max > 0");
    std::vector<double> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = t_max * static_cast<double>(i) / static_cast<double>(n - 1);
    return TimeGrid(std::move(pts));
}

std::vector<std::size_t> TimeGrid::steps_per_interval(double dt) const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    std::vector<std::size_t> steps;
    steps.reserve(points_.size());
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double span = points_[i] - points_[i - 1];
        const double ratio = span / dt;
        const double n = std::round(ratio);
        if (n < 1.0 || std::abs(ratio - n) > 1e-8 * std::max(1.0, ratio)) {
            std::ostringstream os;
            os << "dt = " << dt << " does not divide the output spacing " << span;
            throw ConfigError(os.str());
        }
        steps.push_back(static_cast<std::size_t>(n));
    }
    return steps;
}

}  // namespace spinqsd
