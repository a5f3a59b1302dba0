#include "spinqsd/bath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

namespace spinqsd {

void BathSpec::validate() const {
    std::vector<std::string> errors;
    if (g.empty()) errors.emplace_back("bath: at least one spin required");
    if (g.size() != omega.size())
        errors.emplace_back("bath: g has " + std::to_string(g.size()) + " entries but omega has " +
                            std::to_string(omega.size()));
    for (std::size_t l = 0; l < omega.size(); ++l) {
        if (!std::isfinite(omega[l]) || omega[l] < 0.0)
            errors.emplace_back("bath: omega[" + std::to_string(l) + "] must be finite and >= 0");
    }
    for (std::size_t l = 0; l < g.size(); ++l) {
        if (!std::isfinite(g[l])) errors.emplace_back("bath: g[" + std::to_string(l) + "] must be finite");
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

double OhmicSpec::density(double w) const {
    if (w < 0.0) return 0.0;
    return 0.5 * std::numbers::pi * alpha * w * std::exp(-w / omega_c);
}

TrajectoryLabels TrajectoryLabels::zero_temperature(std::vector<UnitVector3> n, std::uint64_t seed) {
    TrajectoryLabels labels;
    labels.m.assign(n.size(), UnitVector3::e_z());
    labels.n = std::move(n);
    labels.seed = seed;
    return labels;
}

BathSpec discretize_spectral_density(const OhmicSpec& spec, SpinLength j, std::size_t n_modes,
                                     double omega_max) {
    if (n_modes == 0 || !(omega_max > 0.0))
        throw ConfigError("ohmic discretization requires N >= 1 and omega_max > 0");
    BathSpec bath{j, {}, {}};
    bath.g.resize(n_modes);
    bath.omega.resize(n_modes);
    const double dw = omega_max / static_cast<double>(n_modes);
    for (std::size_t l = 0; l < n_modes; ++l) {
        const double w = (static_cast<double>(l) + 0.5) * dw;
        bath.omega[l] = w;
        bath.g[l] = std::sqrt(spec.density(w) * dw / std::numbers::pi);
    }
    return bath;
}

UnitVector3 sample_zero_temperature_label(SpinLength j, Rng& rng, double z_max, std::size_t* resamples) {
    const double inv_q = 1.0 / j.dim();
    for (;;) {
        const double u = rng.uniform_open_closed();
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        const double nz = std::clamp(2.0 * std::pow(u, inv_q) - 1.0, -1.0, 1.0);
        const double rho = std::sqrt(std::max(0.0, (1.0 - nz) * (1.0 + nz)));
        if (nz > -1.0) {
            UnitVector3 n(rho * std::cos(phi), rho * std::sin(phi), nz);
            // |z| = sqrt((1 - n_z)/(1 + n_z))
            if ((1.0 - nz) <= z_max * z_max * (1.0 + nz)) return n;
        }
        if (resamples) ++*resamples;
    }
}

std::vector<UnitVector3> sample_zero_temperature_labels(SpinLength j, std::size_t n_modes, Rng& rng,
                                                        double z_max) {
    std::vector<UnitVector3> out;
    out.reserve(n_modes);
    std::size_t resamples = 0;
    for (std::size_t l = 0; l < n_modes; ++l)
        out.push_back(sample_zero_temperature_label(j, rng, z_max, &resamples));
    if (resamples > 0) spdlog::debug("zero-temperature sampling rejected {} draw(s) beyond z_max", resamples);
    return out;
}

double thermal_partition_function(ThermalSpec thermal, const BathSpec& bath) {
    if (thermal.is_zero_temperature()) return 1.0;
    const double q = bath.j.dim();
    double z = 1.0;
    for (double w : bath.omega) {
        const double x = w == 0.0 ? 0.0 : thermal.beta * w;
        z *= x == 0.0 ? q : std::expm1(-q * x) / std::expm1(-x);
    }
    return z;
}

double thermal_mz_inverse_cdf(SpinLength j, double x, double u) {
    // Density of m_z proportional to (a + b m_z)^{-2j-2} with a + b m_z = (1 + m_z)/2 + (1 - m_z)/2 e^x.
    // Solving F(m_z) = u gives y = a + b m_z = (e^{-qx} + u (1 - e^{-qx}))^{-1/q}.
    if (u <= 0.0) return -1.0;
    if (u >= 1.0) return 1.0;
    if (x <= 0.0) return 2.0 * u - 1.0;
    const double q = j.dim();
    const double inner = std::exp(-q * x) - u * std::expm1(-q * x);
    const double y_minus_1 = std::expm1(-std::log(inner) / q);
    const double e_minus_1 = std::expm1(x);
    if (!std::isfinite(e_minus_1)) return 1.0;
    return std::clamp(1.0 - 2.0 * y_minus_1 / e_minus_1, -1.0, 1.0);
}

std::vector<UnitVector3> sample_thermal_labels(SpinLength j, ThermalSpec thermal, const BathSpec& bath,
                                               Rng& rng) {
    std::vector<UnitVector3> out;
    out.reserve(bath.size());
    for (std::size_t l = 0; l < bath.size(); ++l) {
        if (thermal.is_zero_temperature()) {
            out.push_back(UnitVector3::e_z());
            continue;
        }
        const double u = rng.uniform();
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        const double x = bath.omega[l] == 0.0 ? 0.0 : thermal.beta * bath.omega[l];
        const double mz = thermal_mz_inverse_cdf(j, x, u);
        const double rho = std::sqrt(std::max(0.0, (1.0 - mz) * (1.0 + mz)));
        out.emplace_back(rho * std::cos(phi), rho * std::sin(phi), mz);
    }
    return out;
}

double thermal_jz_expectation(double beta, double omega, SpinLength j) {
    // Weights relative to the m = j level keep the sum finite for large beta*omega.
    const double x = omega == 0.0 ? 0.0 : beta * omega;
    double num = 0.0;
    double den = 0.0;
    for (int k = 0; k < j.dim(); ++k) {
        const double m = j.j() - k;
        const double w = k == 0 ? 1.0 : std::exp(-x * k);
        num += m * w;
        den += w;
    }
    return num / den;
}

TrajectoryLabels draw_trajectory_labels(const BathSpec& bath, ThermalSpec thermal,
                                        std::uint64_t master_seed, std::uint64_t sample_index,
                                        double z_max) {
    TrajectoryLabels labels;
    labels.seed = stream_seed(master_seed, sample_index);
    Rng rng(labels.seed);
    labels.n = sample_zero_temperature_labels(bath.j, bath.size(), rng, z_max);
    labels.m = sample_thermal_labels(bath.j, thermal, bath, rng);
    return labels;
}

}  // namespace spinqsd
