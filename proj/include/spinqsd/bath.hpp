#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "spinqsd/rng.hpp"
#include "spinqsd/spin_algebra.hpp"

namespace spinqsd {

/// N independent spins of common length j with couplings g and frequencies omega.
struct BathSpec {
    SpinLength j{1};
    std::vector<double> g;
    std::vector<double> omega;

    std::size_t size() const noexcept { return g.size(); }
    /// Throws ConfigError listing every violated invariant.
    void validate() const;
};

/// J(w) = (pi/2) alpha w exp(-w/w_c) for w >= 0.
struct OhmicSpec {
    double alpha = 0.0;
    double omega_c = 1.0;

    double density(double w) const;
};

struct ThermalSpec {
    double beta = std::numeric_limits<double>::infinity();

    static ThermalSpec zero_temperature() { return {}; }
    bool is_zero_temperature() const noexcept { return beta == std::numeric_limits<double>::infinity(); }
};

/// Per-trajectory random labels: coherent-state orientations n (zero-temperature measure)
/// and thermal frame rotations m (all e_z at zero temperature).
struct TrajectoryLabels {
    std::vector<UnitVector3> n;
    std::vector<UnitVector3> m;
    std::uint64_t seed = 0;

    static TrajectoryLabels zero_temperature(std::vector<UnitVector3> n, std::uint64_t seed = 0);
};

/// Midpoint grid w_l = (l - 1/2) w_max / N with g_l^2 = J(w_l) dw / pi.
BathSpec discretize_spectral_density(const OhmicSpec& spec, SpinLength j, std::size_t n_modes,
                                     double omega_max);

/// One draw from the zero-temperature label density ((1 + n_z)/2)^{2j} dOmega.
/// Draws with |z| > z_max are rejected and counted in `resamples`.
UnitVector3 sample_zero_temperature_label(SpinLength j, Rng& rng, double z_max = kDefaultZMax,
                                          std::size_t* resamples = nullptr);

std::vector<UnitVector3> sample_zero_temperature_labels(SpinLength j, std::size_t n_modes, Rng& rng,
                                                        double z_max = kDefaultZMax);

double thermal_partition_function(ThermalSpec thermal, const BathSpec& bath);

/// Inverse CDF of the P-function marginal of m_z for one spin at beta*omega = x.
/// Maps u = 0 to -1 and u = 1 to +1.
double thermal_mz_inverse_cdf(SpinLength j, double x, double u);

std::vector<UnitVector3> sample_thermal_labels(SpinLength j, ThermalSpec thermal, const BathSpec& bath,
                                               Rng& rng);

/// Gibbs expectation of J^z for e^{-beta omega (j - J^z)} by direct summation.
double thermal_jz_expectation(double beta, double omega, SpinLength j);

/// Draws the labels of one trajectory from its own stream (master seed, sample index).
TrajectoryLabels draw_trajectory_labels(const BathSpec& bath, ThermalSpec thermal,
                                        std::uint64_t master_seed, std::uint64_t sample_index,
                                        double z_max = kDefaultZMax);

}  // namespace spinqsd
