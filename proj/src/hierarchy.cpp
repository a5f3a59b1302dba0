#include "spinqsd/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace spinqsd {

namespace {

std::string key_of(std::span<const std::uint8_t> k) {
    return std::string(reinterpret_cast<const char*>(k.data()), k.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Index set

HierarchyIndexSet::HierarchyIndexSet(std::size_t modes, int max_order, SpinLength j)
    : modes_(modes), max_order_(max_order), cap_(std::min(max_order, j.two_j())) {
    if (max_order < 0) throw ConfigError("hierarchy order K must be >= 0");
    if (modes == 0) throw ConfigError("hierarchy requires at least one bath mode");
    if (cap_ > 255) throw ConfigError("hierarchy per-mode cap above 255 is not supported");

    std::vector<std::uint8_t> current(modes, 0);
    // Lexicographically descending compositions of `order` with per-entry cap.
    auto emit = [&](auto&& self, std::size_t pos, int remaining, int order) -> void {
        if (pos + 1 == modes) {
            if (remaining > cap_) return;
            current[pos] = static_cast<std::uint8_t>(remaining);
            indices_.insert(indices_.end(), current.begin(), current.end());
            order_.push_back(order);
            if (order_.size() > 50'000'000)
                throw ConfigError("hierarchy index set too large");
            return;
        }
        const auto rest = static_cast<long long>(cap_) * static_cast<long long>(modes - pos - 1);
        for (int v = std::min(cap_, remaining); v >= 0; --v) {
            if (remaining - v > rest) break;
            current[pos] = static_cast<std::uint8_t>(v);
            self(self, pos + 1, remaining - v, order);
        }
        current[pos] = 0;
    };
    for (int order = 0; order <= max_order; ++order) {
        if (static_cast<long long>(order) > static_cast<long long>(cap_) * static_cast<long long>(modes)) break;
        emit(emit, 0, order, order);
    }

    std::unordered_map<std::string, std::int32_t> lookup;
    lookup.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) lookup.emplace(key_of(index(i)), static_cast<std::int32_t>(i));

    up_.assign(size() * modes_, kAbsent);
    down_.assign(size() * modes_, kAbsent);
    std::vector<std::uint8_t> k(modes_);
    for (std::size_t i = 0; i < size(); ++i) {
        auto ki = index(i);
        std::copy(ki.begin(), ki.end(), k.begin());
        for (std::size_t l = 0; l < modes_; ++l) {
            if (k[l] > 0) {
                --k[l];
                down_[i * modes_ + l] = lookup.at(key_of(k));
                ++k[l];
            }
            if (k[l] < cap_ && order_[i] < max_order_) {
                ++k[l];
                up_[i * modes_ + l] = lookup.at(key_of(k));
                --k[l];
            }
        }
    }
}

std::int32_t HierarchyIndexSet::find(std::span<const std::uint8_t> k) const {
    if (k.size() != modes_) return kAbsent;
    int ord = 0;
    for (auto v : k) {
        if (v > cap_) return kAbsent;
        ord += v;
    }
    if (ord > max_order_) return kAbsent;
    // Walk down from the root along the index; cheap for the orders in use.
    std::int32_t pos = 0;
    for (std::size_t l = 0; l < modes_; ++l) {
        for (int r = 0; r < k[l]; ++r) {
            pos = raised(static_cast<std::size_t>(pos), l);
            if (pos == kAbsent) return kAbsent;
        }
    }
    return pos;
}

HierarchyIndexSet build_index_set(std::size_t modes, int max_order, SpinLength j) {
    return HierarchyIndexSet(modes, max_order, j);
}

// ---------------------------------------------------------------------------
// Feedback and rotations

Vec3 expectation_L(const CVector& psi, const std::array<CMatrix, 3>& coupling) {
    // Normalize by the largest entry first so any finite scale works.
    const double top = psi.cwiseAbs().maxCoeff();
    if (!(top > kNormFloor) || !std::isfinite(top)) throw NumericalError("stochastic state norm underflow");
    const CVector u = psi / top;
    const double n2 = u.squaredNorm();
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = u.dot(coupling[a] * u).real() / n2;
    return out;
}

Vec3 rotation_drift(double g, double omega, double t, const Rotation3& frame, const Vec3& expect_l) {
    return g * (bare_rotation(omega, t) * frame).transpose() * expect_l;
}

Mat3 rotation_rhs(double g, double omega, double t, const Rotation3& frame, const Vec3& expect_l,
                  const Rotation3& s) {
    return cross_matrix(rotation_drift(g, omega, t, frame, expect_l)) * s;
}

// ---------------------------------------------------------------------------
// Propagator

HierarchyPropagator::HierarchyPropagator(ModelSpec model, BathSpec bath, const TrajectoryLabels& labels,
                                         int max_order)
    : model_(std::move(model)), bath_(std::move(bath)), indices_(bath_.size(), max_order, bath_.j) {
    const std::size_t n = bath_.size();
    if (labels.n.size() != n || labels.m.size() != n)
        throw ConfigError("trajectory labels do not match the number of bath spins");
    for (int a = 0; a < 3; ++a) active_[a] = model_.coupling_active(a);

    frames_.reserve(n);
    v_.reserve(n);
    w_.reserve(n);
    for (std::size_t l = 0; l < n; ++l) {
        frames_.push_back(axis_to_rotation(labels.m[l]));
        const cplx zc = std::conj(stereographic(labels.n[l]).value);
        v_.emplace_back(zc, kI * zc, 1.0);
        // (1/2 (1 - z*^2), -(1/2i)(-1 - z*^2), -z*)
        w_.emplace_back(0.5 * (1.0 - zc * zc), -(1.0 / (2.0 * kI)) * (-1.0 - zc * zc), -zc);
    }

    occupied_.resize(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        auto k = indices_.index(i);
        for (std::size_t l = 0; l < n; ++l)
            if (k[l] > 0) occupied_[i].push_back(static_cast<std::uint32_t>(l));
    }
    a_.assign(n, CMatrix());
    b_.assign(n, CMatrix());
    c_.assign(n, CMatrix());
}

HierarchyState HierarchyPropagator::initial_state(cplx scale) const {
    HierarchyState st;
    st.psi = CMatrix::Zero(model_.dim(), static_cast<Eigen::Index>(indices_.size()));
    st.psi.col(0) = scale * model_.psi0;
    st.s.assign(bath_.size(), Rotation3::Identity());
    return st;
}

HierarchyDerivative HierarchyPropagator::derivative(const HierarchyState& state) const {
    HierarchyDerivative d;
    derivative(state.t, state.psi, state.s, d.psi, d.s);
    return d;
}

void HierarchyPropagator::derivative(double t, const CMatrix& psi, const std::vector<Rotation3>& s,
                                     CMatrix& dpsi, std::vector<Mat3>& ds) const {
    const Eigen::Index d = model_.dim();
    const std::size_t n = bath_.size();
    const double j = bath_.j.j();

    const Vec3 expect = expectation_L(psi.col(0), model_.coupling);
    std::array<CMatrix, 3> delta;
    for (int a = 0; a < 3; ++a) {
        if (!active_[a]) continue;
        delta[a] = model_.coupling[a];
        delta[a].diagonal().array() -= expect[a];
    }

    const CVec3 lower_dir(1.0, kI, 0.0);
    CMatrix diag_sum = model_.hamiltonian;
    ds.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const Rotation3 frame = bare_rotation(bath_.omega[l], t) * frames_[l];
        ds[l] = cross_matrix(bath_.g[l] * frame.transpose() * expect) * s[l];
        const Mat3 q = bath_.g[l] * frame * s[l];
        const CVec3 cv = q.cast<cplx>() * v_[l];
        const CVec3 cw = q.cast<cplx>() * w_[l];
        const CVec3 cu = q.cast<cplx>() * lower_dir;
        a_[l].setZero(d, d);
        b_[l].setZero(d, d);
        c_[l].setZero(d, d);
        for (int a = 0; a < 3; ++a) {
            if (!active_[a]) continue;
            a_[l] += cv[a] * delta[a];
            b_[l] += cw[a] * delta[a];
            c_[l] += cu[a] * delta[a];
        }
        diag_sum += j * a_[l];
    }

    dpsi.resize(d, psi.cols());
    CMatrix diag(d, d);
    CVector acc(d);
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        const auto k = indices_.index(i);
        diag = diag_sum;
        for (auto l : occupied_[i]) diag -= static_cast<double>(k[l]) * a_[l];
        acc.noalias() = diag * psi.col(static_cast<Eigen::Index>(i));
        for (std::size_t l = 0; l < n; ++l) {
            const auto up = indices_.raised(i, l);
            if (up != HierarchyIndexSet::kAbsent) acc.noalias() += b_[l] * psi.col(up);
        }
        for (auto l : occupied_[i]) {
            const double kl = k[l];
            const auto down = indices_.lowered(i, l);
            acc.noalias() += (kl * (j - 0.5 * (kl - 1.0))) * (c_[l] * psi.col(down));
        }
        dpsi.col(static_cast<Eigen::Index>(i)) = -kI * acc;
    }
}

void HierarchyPropagator::step(HierarchyState& state, double dt) {
    const std::size_t n = state.s.size();
    const double t = state.t;
    stmp_.resize(n);

    derivative(t, state.psi, state.s, k1_, s1_);
    tmp_ = state.psi + (0.5 * dt) * k1_;
    for (std::size_t l = 0; l < n; ++l) stmp_[l] = state.s[l] + (0.5 * dt) * s1_[l];
    derivative(t + 0.5 * dt, tmp_, stmp_, k2_, s2_);
    tmp_ = state.psi + (0.5 * dt) * k2_;
    for (std::size_t l = 0; l < n; ++l) stmp_[l] = state.s[l] + (0.5 * dt) * s2_[l];
    derivative(t + 0.5 * dt, tmp_, stmp_, k3_, s3_);
    tmp_ = state.psi + dt * k3_;
    for (std::size_t l = 0; l < n; ++l) stmp_[l] = state.s[l] + dt * s3_[l];
    derivative(t + dt, tmp_, stmp_, k4_, s4_);

    state.psi += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    for (std::size_t l = 0; l < n; ++l)
        state.s[l] += (dt / 6.0) * (s1_[l] + 2.0 * s2_[l] + 2.0 * s3_[l] + s4_[l]);
    state.t = t + dt;
}

void HierarchyPropagator::rescale(HierarchyState& state) {
    const double norm = state.psi.col(0).stableNorm();
    if (!(norm > kNormFloor) || !std::isfinite(norm)) throw NumericalError("stochastic state norm underflow");
    state.psi /= norm;
    state.log_scale += std::log(norm);
}

TrajectoryResult propagate_trajectory(const ModelSpec& model, const BathSpec& bath,
                                      const TrajectoryLabels& labels, const TimeGrid& grid,
                                      const TrajectoryOptions& options) {
    const auto steps = grid.steps_per_interval(options.dt);
    HierarchyPropagator prop(model, bath, labels, options.max_order);
    HierarchyState state = prop.initial_state(options.initial_scale);

    TrajectoryResult out;
    out.times = grid.points();
    out.states.resize(model.dim(), static_cast<Eigen::Index>(grid.size()));
    out.log_norm.resize(grid.size());
    out.orthogonality_drift.resize(grid.size());

    auto record = [&](std::size_t slot) {
        const double norm = state.psi.col(0).stableNorm();
        if (!(norm > kNormFloor) || !std::isfinite(norm)) throw NumericalError("stochastic state norm underflow");
        out.states.col(static_cast<Eigen::Index>(slot)) = state.psi.col(0) / norm;
        out.log_norm[slot] = state.log_scale + std::log(norm);
        double drift = 0.0;
        for (const auto& s : state.s) drift = std::max(drift, orthogonality_drift(s));
        out.orthogonality_drift[slot] = drift;
    };

    record(0);
    long step_index = 0;
    for (std::size_t iv = 0; iv < steps.size(); ++iv) {
        const double t0 = grid[iv];
        const double h = (grid[iv + 1] - t0) / static_cast<double>(steps[iv]);
        for (std::size_t s = 0; s < steps[iv]; ++s, ++step_index) {
            prop.step(state, h);
            state.t = t0 + static_cast<double>(s + 1) * h;
            if (!state.psi.allFinite())
                throw NumericalError("non-finite hierarchy state at step " + std::to_string(step_index),
                                     step_index);
            for (auto& r : state.s) {
                if (orthogonality_drift(r) > options.orthogonality_tolerance) r = nearest_rotation(r);
            }
            if (options.rescale) HierarchyPropagator::rescale(state);
        }
        state.t = grid[iv + 1];
        record(iv + 1);
    }
    return out;
}

}  // namespace spinqsd
