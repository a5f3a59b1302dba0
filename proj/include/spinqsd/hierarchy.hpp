#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spinqsd/bath.hpp"
#include "spinqsd/model.hpp"
#include "spinqsd/spin_algebra.hpp"

namespace spinqsd {

/// Multi-indices k in N_0^N with |k| <= K and k_l <= min(K, 2j), in graded
/// lexicographic order (by |k|, then lexicographically descending), plus
/// neighbour tables for k +- e_l.
class HierarchyIndexSet {
public:
    static constexpr std::int32_t kAbsent = -1;

    HierarchyIndexSet(std::size_t modes, int max_order, SpinLength j);

    std::size_t size() const noexcept { return order_.size(); }
    std::size_t modes() const noexcept { return modes_; }
    int max_order() const noexcept { return max_order_; }
    int cap() const noexcept { return cap_; }

    std::span<const std::uint8_t> index(std::size_t i) const {
        return {indices_.data() + i * modes_, modes_};
    }
    int order(std::size_t i) const { return order_[i]; }
    std::int32_t raised(std::size_t i, std::size_t mode) const { return up_[i * modes_ + mode]; }
    std::int32_t lowered(std::size_t i, std::size_t mode) const { return down_[i * modes_ + mode]; }
    /// Position of k in the set, or kAbsent.
    std::int32_t find(std::span<const std::uint8_t> k) const;

private:
    std::size_t modes_;
    int max_order_;
    int cap_;
    std::vector<std::uint8_t> indices_;
    std::vector<int> order_;
    std::vector<std::int32_t> up_;
    std::vector<std::int32_t> down_;
};

HierarchyIndexSet build_index_set(std::size_t modes, int max_order, SpinLength j);

/// <psi|L^a|psi> / <psi|psi>. Throws NumericalError on a (numerically) zero vector.
Vec3 expectation_L(const CVector& psi, const std::array<CMatrix, 3>& coupling);

/// Drift vector a_l(t) = g_l (O_l(t) M_l)^T <L>; the co-moving rotation obeys dS/dt = [a]_x S.
Vec3 rotation_drift(double g, double omega, double t, const Rotation3& frame, const Vec3& expect_l);

/// dS_l/dt = cross_matrix(rotation_drift(...)) S_l.
Mat3 rotation_rhs(double g, double omega, double t, const Rotation3& frame, const Vec3& expect_l,
                  const Rotation3& s);

/// Auxiliary states psi^k (one column per multi-index) and co-moving rotations S_l.
struct HierarchyState {
    CMatrix psi;
    std::vector<Rotation3> s;
    double t = 0.0;
    /// Accumulated log of the common rescalings applied to psi.
    double log_scale = 0.0;
};

struct HierarchyDerivative {
    CMatrix psi;
    std::vector<Mat3> s;
};

struct TrajectoryOptions {
    int max_order = 2;
    double dt = 1e-2;
    bool rescale = true;
    /// Multiplies the initial hierarchy; normalized outputs do not depend on it.
    cplx initial_scale{1.0, 0.0};
    /// Re-orthonormalize S_l when max |S^T S - I| exceeds this.
    double orthogonality_tolerance = 1e-9;
};

/// Normalized psi^0 at each grid time, plus diagnostics.
struct TrajectoryResult {
    std::vector<double> times;
    CMatrix states;                        ///< dim x times.size()
    std::vector<double> log_norm;          ///< log |psi^0| including rescalings
    std::vector<double> orthogonality_drift;
};

/// Single-trajectory integrator of the hierarchy of pure states.
class HierarchyPropagator {
public:
    HierarchyPropagator(ModelSpec model, BathSpec bath, const TrajectoryLabels& labels, int max_order);

    const HierarchyIndexSet& indices() const noexcept { return indices_; }
    const ModelSpec& model() const noexcept { return model_; }

    /// psi^0 = scale * psi0, psi^k = 0 otherwise, S_l = I.
    HierarchyState initial_state(cplx scale = 1.0) const;

    /// Right-hand side of the hierarchy equations at state.t. Truncated neighbours contribute zero.
    HierarchyDerivative derivative(const HierarchyState& state) const;
    void derivative(double t, const CMatrix& psi, const std::vector<Rotation3>& s, CMatrix& dpsi,
                    std::vector<Mat3>& ds) const;

    /// One classical RK4 step with <L> re-evaluated at every stage.
    void step(HierarchyState& state, double dt);

    /// Divide every psi^k by |psi^0| and record the log in state.log_scale.
    static void rescale(HierarchyState& state);

private:
    ModelSpec model_;
    BathSpec bath_;
    HierarchyIndexSet indices_;
    std::vector<Rotation3> frames_;       // M(m_l)
    std::vector<CVec3> v_;                // (z*, i z*, 1)
    std::vector<CVec3> w_;                // raising coefficients
    std::array<bool, 3> active_{};
    std::vector<std::vector<std::uint32_t>> occupied_;  // modes with k_l > 0, per index

    // RK4 workspace
    CMatrix k1_, k2_, k3_, k4_, tmp_;
    std::vector<Mat3> s1_, s2_, s3_, s4_;
    std::vector<Rotation3> stmp_;
    // derivative() scratch
    mutable std::vector<CMatrix> a_, b_, c_;
};

TrajectoryResult propagate_trajectory(const ModelSpec& model, const BathSpec& bath,
                                      const TrajectoryLabels& labels, const TimeGrid& grid,
                                      const TrajectoryOptions& options);

/// |psi^0| (or its largest entry) at or below this is treated as underflowed.
inline constexpr double kNormFloor = 1e-300;

}  // namespace spinqsd
