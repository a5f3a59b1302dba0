#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spinqsd/bath.hpp"
#include "spinqsd/model.hpp"

namespace spinqsd {

inline constexpr std::size_t kDefaultDimensionCap = std::size_t{1} << 22;

struct FullPropagationOptions {
    double dt = 1e-3;
    std::size_t dimension_cap = kDefaultDimensionCap;
};

/// Dense system (x) bath state in the tensor basis system (x) spin_1 (x) ... (x) spin_N, with the
/// last spin varying fastest. Hamiltonian actions are Kronecker-structured; the full matrix is
/// never formed.
class FullSpace {
public:
    FullSpace(const ModelSpec& model, const BathSpec& bath, std::span<const UnitVector3> frames,
              std::size_t dimension_cap = kDefaultDimensionCap);

    std::size_t dim() const noexcept { return total_; }
    std::size_t bath_dim() const noexcept { return bath_dim_; }

    /// psi0 (x) |j,j>^N
    CVector initial_state() const;
    /// out = -i H(t) in, H(t) = H_S + sum_l g_l L . O_l(t) M_l J_l.
    void apply_generator(double t, const CVector& in, CVector& out) const;
    /// out = (I (x) op on spin l) in  (accumulating when `accumulate`).
    void apply_local(const CMatrix& op, std::size_t spin, const CVector& in, CVector& out) const;
    /// Reduced system density matrix.
    CMatrix reduced_state(const CVector& state) const;
    /// <b_1| ... <b_N| state : contracts every spin with the bra whose ket components are `kets[l]`.
    CVector project(const CVector& state, std::span<const SpinVector> kets) const;

private:
    const ModelSpec& model_;
    const BathSpec& bath_;
    std::vector<Rotation3> frames_;
    SpinOps ops_;
    std::array<bool, 3> active_{};
    std::size_t q_;
    std::size_t bath_dim_;
    std::size_t total_;
    mutable CVector scratch_, scratch2_;
};

/// Reduced density matrices from brute-force Schroedinger propagation (RK4), optionally in the
/// thermal frame given by `m_labels` (empty = zero temperature).
std::vector<CMatrix> exact_propagate(const ModelSpec& model, const BathSpec& bath,
                                     std::span<const UnitVector3> m_labels, const TimeGrid& grid,
                                     const FullPropagationOptions& options);

/// Unnormalized stochastic state <z| R^dagger(t) |Psi(t)> along a trajectory, obtained by
/// co-integrating the full state, the per-spin co-moving unitaries R_l and rotations S_l.
struct ProjectionResult {
    std::vector<CVector> psi;           ///< one per grid time
    std::vector<std::vector<Rotation3>> s;
    std::vector<std::vector<CMatrix>> r;  ///< per-spin (2j+1)-dim unitaries
};

ProjectionResult exact_project_trajectory(const ModelSpec& model, const BathSpec& bath,
                                          const TrajectoryLabels& labels, const TimeGrid& grid,
                                          const FullPropagationOptions& options);

/// Pure-dephasing structure: H_S and L^x share the eigenbasis `basis`, L^y = L^z = 0.
struct DephasingModel {
    std::vector<double> energies;
    std::vector<double> couplings;
    CVector amplitudes;  ///< <e_n|psi0>
    CMatrix basis;       ///< columns |e_n>

    /// Throws ConfigError unless [L^x, H_S] = 0 within `tol` and L^y = L^z = 0.
    static DephasingModel from_model(const ModelSpec& model, double tol = 1e-10);
};

/// Closed-form reduced state (lab frame) for a thermal or zero-temperature bath.
std::vector<CMatrix> dephasing_reduced_state(const DephasingModel& deph, const BathSpec& bath,
                                             ThermalSpec thermal, const TimeGrid& grid);

/// Normalized stochastic state of one trajectory from the per-spin product solution,
/// columns indexed by grid time, in the original system basis.
CMatrix dephasing_trajectory(const DephasingModel& deph, const BathSpec& bath, const TrajectoryLabels& labels,
                             const TimeGrid& grid, double dt);

}  // namespace spinqsd
