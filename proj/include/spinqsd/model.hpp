#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "spinqsd/types.hpp"

namespace spinqsd {

/// System Hamiltonian, coupling operators (L^x, L^y, L^z) and initial system state.
struct ModelSpec {
    CMatrix hamiltonian;
    std::array<CMatrix, 3> coupling;
    CVector psi0;

    Eigen::Index dim() const noexcept { return hamiltonian.rows(); }
    /// False when L^a is identically zero, so it can be skipped in hot loops.
    bool coupling_active(int a) const;
    /// Throws ConfigError naming every offending entry.
    void validate(double tolerance = 1e-12) const;
};

/// Output time grid: strictly increasing, starting at 0.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points);
    /// n points t_i = i t_max / (n - 1).
    static TimeGrid uniform(double t_max, std::size_t n);

    const std::vector<double>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double back() const { return points_.back(); }

    /// Number of integrator steps per grid interval for a nominal step dt.
    /// Throws ConfigError unless dt divides every interval.
    std::vector<std::size_t> steps_per_interval(double dt) const;

private:
    std::vector<double> points_;
};

/// Hermitian-part check: max |A - A^dagger|.
double hermiticity_violation(const CMatrix& a);

}  // namespace spinqsd
