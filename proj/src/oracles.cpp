#include "spinqsd/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "spinqsd/hierarchy.hpp"

namespace spinqsd {

namespace {

using RowMajorCMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t checked_bath_dim(std::size_t q, std::size_t n, std::size_t d, std::size_t cap) {
    std::size_t dim = d;
    for (std::size_t l = 0; l < n; ++l) {
        if (dim > cap / q) {
            std::ostringstream os;
            os << "full Hilbert space d_S (2j+1)^N = " << d << " * " << q << "^" << n
               << " exceeds the dimension cap " << cap;
            throw DimensionError(os.str());
        }
        dim *= q;
    }
    return dim / d;
}

std::vector<Rotation3> frames_from(std::span<const UnitVector3> m, std::size_t n) {
    std::vector<Rotation3> frames;
    frames.reserve(n);
    for (std::size_t l = 0; l < n; ++l)
        frames.push_back(m.empty() ? Rotation3::Identity() : axis_to_rotation(m[l]));
    return frames;
}

void check_finite(const CVector& v, long step) {
    if (!v.allFinite())
        throw NumericalError("non-finite full state at step " + std::to_string(step), step);
}

}  // namespace

// ---------------------------------------------------------------------------
// Full Hilbert space

FullSpace::FullSpace(const ModelSpec& model, const BathSpec& bath, std::span<const UnitVector3> frames,
                     std::size_t dimension_cap)
    : model_(model), bath_(bath), ops_(build_spin_operators(bath.j)) {
    if (!frames.empty() && frames.size() != bath.size())
        throw ConfigError("thermal labels do not match the number of bath spins");
    frames_ = frames_from(frames, bath.size());
    for (int a = 0; a < 3; ++a) active_[a] = model.coupling_active(a);
    q_ = static_cast<std::size_t>(bath.j.dim());
    const auto d = static_cast<std::size_t>(model.dim());
    bath_dim_ = checked_bath_dim(q_, bath.size(), d, dimension_cap);
    total_ = d * bath_dim_;
}

CVector FullSpace::initial_state() const {
    CVector psi = CVector::Zero(static_cast<Eigen::Index>(total_));
    for (Eigen::Index s = 0; s < model_.dim(); ++s)
        psi[s * static_cast<Eigen::Index>(bath_dim_)] = model_.psi0[s];
    return psi;
}

void FullSpace::apply_local(const CMatrix& op, std::size_t spin, const CVector& in, CVector& out) const {
    std::size_t stride = 1;
    for (std::size_t l = spin + 1; l < bath_.size(); ++l) stride *= q_;
    const std::size_t block = stride * q_;
    out.resize(in.size());
    const cplx* src = in.data();
    cplx* dst = out.data();
    for (std::size_t base = 0; base < total_; base += block) {
        for (std::size_t i = 0; i < q_; ++i) {
            cplx* o = dst + base + i * stride;
            std::fill(o, o + stride, cplx(0.0));
            for (std::size_t k = 0; k < q_; ++k) {
                const cplx c = op(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
                if (c == cplx(0.0)) continue;
                const cplx* x = src + base + k * stride;
                for (std::size_t r = 0; r < stride; ++r) o[r] += c * x[r];
            }
        }
    }
}

void FullSpace::apply_generator(double t, const CVector& in, CVector& out) const {
    const auto d = model_.dim();
    const auto b = static_cast<Eigen::Index>(bath_dim_);
    Eigen::Map<const RowMajorCMatrix> phi(in.data(), d, b);
    out.resize(in.size());
    Eigen::Map<RowMajorCMatrix> res(out.data(), d, b);
    res.noalias() = model_.hamiltonian * phi;
    for (std::size_t l = 0; l < bath_.size(); ++l) {
        if (bath_.g[l] == 0.0) continue;
        const Rotation3 frame = bare_rotation(bath_.omega[l], t) * frames_[l];
        for (int a = 0; a < 3; ++a) {
            if (!active_[a]) continue;
            apply_local(ops_.dot(frame.row(a).transpose()), l, in, scratch_);
            Eigen::Map<const RowMajorCMatrix> x(scratch_.data(), d, b);
            res.noalias() += bath_.g[l] * (model_.coupling[a] * x);
        }
    }
    out *= -kI;
}

CMatrix FullSpace::reduced_state(const CVector& state) const {
    Eigen::Map<const RowMajorCMatrix> phi(state.data(), model_.dim(), static_cast<Eigen::Index>(bath_dim_));
    return phi * phi.adjoint();
}

CVector FullSpace::project(const CVector& state, std::span<const SpinVector> kets) const {
    CVector cur = state;
    const auto q = static_cast<Eigen::Index>(q_);
    for (std::size_t l = bath_.size(); l-- > 0;) {
        const Eigen::Index rows = cur.size() / q;
        Eigen::Map<const RowMajorCMatrix> m(cur.data(), rows, q);
        CVector next = m * kets[l].conjugate();
        cur.swap(next);
    }
    return cur;
}

std::vector<CMatrix> exact_propagate(const ModelSpec& model, const BathSpec& bath,
                                     std::span<const UnitVector3> m_labels, const TimeGrid& grid,
                                     const FullPropagationOptions& options) {
    const auto steps = grid.steps_per_interval(options.dt);
    FullSpace space(model, bath, m_labels, options.dimension_cap);
    CVector psi = space.initial_state();
    CVector k1, k2, k3, k4, tmp;

    std::vector<CMatrix> out;
    out.reserve(grid.size());
    out.push_back(space.reduced_state(psi));
    long step = 0;
    for (std::size_t iv = 0; iv < steps.size(); ++iv) {
        const double t0 = grid[iv];
        const double h = (grid[iv + 1] - t0) / static_cast<double>(steps[iv]);
        for (std::size_t s = 0; s < steps[iv]; ++s, ++step) {
            const double t = t0 + static_cast<double>(s) * h;
            space.apply_generator(t, psi, k1);
            tmp = psi + 0.5 * h * k1;
            space.apply_generator(t + 0.5 * h, tmp, k2);
            tmp = psi + 0.5 * h * k2;
            space.apply_generator(t + 0.5 * h, tmp, k3);
            tmp = psi + h * k3;
            space.apply_generator(t + h, tmp, k4);
            psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            check_finite(psi, step);
        }
        out.push_back(space.reduced_state(psi));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Projection oracle

namespace {

struct ProjectionSystem {
    const ModelSpec& model;
    const BathSpec& bath;
    const FullSpace& space;
    const SpinOps& ops;
    const std::vector<Rotation3>& frames;
    const std::vector<SpinVector>& bargmann;

    struct State {
        CVector phi;
        std::vector<CMatrix> r;
        std::vector<Mat3> s;
    };

    CVector projected(const State& st) const {
        std::vector<SpinVector> kets(bath.size());
        for (std::size_t l = 0; l < bath.size(); ++l) kets[l] = st.r[l] * bargmann[l];
        return space.project(st.phi, kets);
    }

    void derivative(double t, const State& st, State& d) const {
        const Vec3 expect = expectation_L(projected(st), model.coupling);
        space.apply_generator(t, st.phi, d.phi);
        d.r.resize(bath.size());
        d.s.resize(bath.size());
        for (std::size_t l = 0; l < bath.size(); ++l) {
            const Vec3 c = rotation_drift(bath.g[l], bath.omega[l], t, frames[l], expect);
            d.r[l] = -kI * (ops.dot(c) * st.r[l]);
            d.s[l] = cross_matrix(c) * st.s[l];
        }
    }
};

ProjectionSystem::State axpy(const ProjectionSystem::State& x, double h, const ProjectionSystem::State& k) {
    ProjectionSystem::State y;
    y.phi = x.phi + h * k.phi;
    y.r.resize(x.r.size());
    y.s.resize(x.s.size());
    for (std::size_t l = 0; l < x.r.size(); ++l) {
        y.r[l] = x.r[l] + h * k.r[l];
        y.s[l] = x.s[l] + h * k.s[l];
    }
    return y;
}

}  // namespace

ProjectionResult exact_project_trajectory(const ModelSpec& model, const BathSpec& bath,
                                          const TrajectoryLabels& labels, const TimeGrid& grid,
                                          const FullPropagationOptions& options) {
    if (labels.n.size() != bath.size() || labels.m.size() != bath.size())
        throw ConfigError("trajectory labels do not match the number of bath spins");
    const auto steps = grid.steps_per_interval(options.dt);
    FullSpace space(model, bath, labels.m, options.dimension_cap);
    const SpinOps ops = build_spin_operators(bath.j);
    const std::vector<Rotation3> frames = frames_from(labels.m, bath.size());
    std::vector<SpinVector> bargmann;
    for (const auto& n : labels.n) bargmann.push_back(bargmann_state(bath.j, stereographic(n)));

    ProjectionSystem sys{model, bath, space, ops, frames, bargmann};
    ProjectionSystem::State st;
    st.phi = space.initial_state();
    st.r.assign(bath.size(), CMatrix::Identity(bath.j.dim(), bath.j.dim()));
    st.s.assign(bath.size(), Mat3::Identity());

    ProjectionResult out;
    auto record = [&] {
        out.psi.push_back(sys.projected(st));
        out.s.push_back(st.s);
        out.r.push_back(st.r);
    };
    record();
    ProjectionSystem::State k1, k2, k3, k4;
    long step = 0;
    for (std::size_t iv = 0; iv < steps.size(); ++iv) {
        const double t0 = grid[iv];
        const double h = (grid[iv + 1] - t0) / static_cast<double>(steps[iv]);
        for (std::size_t s = 0; s < steps[iv]; ++s, ++step) {
            const double t = t0 + static_cast<double>(s) * h;
            sys.derivative(t, st, k1);
            sys.derivative(t + 0.5 * h, axpy(st, 0.5 * h, k1), k2);
            sys.derivative(t + 0.5 * h, axpy(st, 0.5 * h, k2), k3);
            sys.derivative(t + h, axpy(st, h, k3), k4);
            st.phi += (h / 6.0) * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
            for (std::size_t l = 0; l < bath.size(); ++l) {
                st.r[l] += (h / 6.0) * (k1.r[l] + 2.0 * k2.r[l] + 2.0 * k3.r[l] + k4.r[l]);
                st.s[l] += (h / 6.0) * (k1.s[l] + 2.0 * k2.s[l] + 2.0 * k3.s[l] + k4.s[l]);
            }
            check_finite(st.phi, step);
        }
        record();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pure dephasing

DephasingModel DephasingModel::from_model(const ModelSpec& model, double tol) {
    std::vector<std::string> errors;
    if (model.coupling_active(1) || model.coupling_active(2))
        errors.emplace_back("pure dephasing requires L^y = L^z = 0");
    const CMatrix& h = model.hamiltonian;
    const CMatrix& l = model.coupling[0];
    if (l.rows() != h.rows() || l.cols() != h.cols()) {
        errors.emplace_back("pure dephasing requires L^x with the shape of H_S");
        throw ConfigError(std::move(errors));
    }
    const double comm = (l * h - h * l).cwiseAbs().maxCoeff();
    if (comm > tol) {
        std::ostringstream os;
        os << "pure dephasing requires [L^x, H_S] = 0 (max entry " << comm << ")";
        errors.push_back(os.str());
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));

    // A generic combination splits degeneracies of H_S by the eigenvalues of L^x.
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff()) / std::max(1.0, l.cwiseAbs().maxCoeff());
    for (double kappa : {0.7548776662466927, 0.3183098861837907, 1.4142135623730951}) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h + kappa * scale * l);
        const CMatrix& v = es.eigenvectors();
        const CMatrix hd = v.adjoint() * h * v;
        const CMatrix ld = v.adjoint() * l * v;
        const double off = std::max((hd - CMatrix(hd.diagonal().asDiagonal())).cwiseAbs().maxCoeff(),
                                    (ld - CMatrix(ld.diagonal().asDiagonal())).cwiseAbs().maxCoeff());
        if (off > 1e-8 * std::max(1.0, scale)) continue;
        DephasingModel out;
        out.basis = v;
        for (Eigen::Index n = 0; n < v.cols(); ++n) {
            out.energies.push_back(hd(n, n).real());
            out.couplings.push_back(ld(n, n).real());
        }
        out.amplitudes = v.adjoint() * model.psi0;
        return out;
    }
    throw ConfigError("pure dephasing: failed to find a common eigenbasis of H_S and L^x");
}

std::vector<CMatrix> dephasing_reduced_state(const DephasingModel& deph, const BathSpec& bath,
                                             ThermalSpec thermal, const TimeGrid& grid) {
    const SpinOps ops = build_spin_operators(bath.j);
    const int q = bath.j.dim();
    const auto levels = static_cast<Eigen::Index>(deph.energies.size());
    const double j = bath.j.j();

    // Per spin and level: eigendecomposition of l_n g J^x + w (j - J^z).
    struct Eig {
        Eigen::VectorXd values;
        CMatrix vectors;
    };
    std::vector<std::vector<Eig>> eig(bath.size());
    std::vector<Eigen::VectorXd> gibbs(bath.size());
    for (std::size_t l = 0; l < bath.size(); ++l) {
        for (Eigen::Index n = 0; n < levels; ++n) {
            CMatrix hn = deph.couplings[n] * bath.g[l] * ops.x - bath.omega[l] * ops.z;
            hn.diagonal().array() += bath.omega[l] * j;
            Eigen::SelfAdjointEigenSolver<CMatrix> es(hn);
            eig[l].push_back({es.eigenvalues(), es.eigenvectors()});
        }
        Eigen::VectorXd p = Eigen::VectorXd::Zero(q);
        p[0] = 1.0;
        if (!thermal.is_zero_temperature()) {
            const double x = bath.omega[l] == 0.0 ? 0.0 : thermal.beta * bath.omega[l];
            for (int k = 1; k < q; ++k) p[k] = std::exp(-x * k);
            p /= p.sum();
        }
        gibbs[l] = p;
    }

    std::vector<CMatrix> out;
    out.reserve(grid.size());
    std::vector<CMatrix> u(static_cast<std::size_t>(levels));
    for (double t : grid.points()) {
        CMatrix rho(levels, levels);
        for (Eigen::Index n = 0; n < levels; ++n)
            for (Eigen::Index m = 0; m < levels; ++m)
                rho(n, m) = deph.amplitudes[n] * std::conj(deph.amplitudes[m]) *
                            std::exp(-kI * (deph.energies[n] - deph.energies[m]) * t);
        for (std::size_t l = 0; l < bath.size(); ++l) {
            for (Eigen::Index n = 0; n < levels; ++n) {
                const auto& e = eig[l][static_cast<std::size_t>(n)];
                CVector phases = (-kI * t * e.values.cast<cplx>()).array().exp();
                u[static_cast<std::size_t>(n)] = e.vectors * phases.asDiagonal() * e.vectors.adjoint();
            }
            for (Eigen::Index n = 0; n < levels; ++n) {
                for (Eigen::Index m = 0; m < levels; ++m) {
                    // tr[U_n rho_l U_m^dagger]
                    const CMatrix& un = u[static_cast<std::size_t>(n)];
                    const CMatrix& um = u[static_cast<std::size_t>(m)];
                    cplx tr = 0.0;
                    for (int k = 0; k < q; ++k) tr += gibbs[l][k] * um.col(k).dot(un.col(k));
                    rho(n, m) *= tr;
                }
            }
        }
        out.push_back(deph.basis * rho * deph.basis.adjoint());
    }
    return out;
}

namespace {

struct DephasingTrajectory {
    const DephasingModel& deph;
    const BathSpec& bath;
    const SpinOps& ops;
    const std::vector<Rotation3>& frames;

    struct State {
        std::vector<CVector> spin;  // [l * levels + n]
        std::vector<Vec3> label;    // n'_l
    };

    std::size_t levels() const { return deph.energies.size(); }

    // Unnormalized level amplitudes without the free phase, scaled by a common factor.
    std::vector<cplx> amplitudes(const State& st) const {
        const std::size_t nl = levels();
        std::vector<double> logmag(nl, 0.0);
        std::vector<double> phase(nl, 0.0);
        std::vector<bool> zero(nl, false);
        for (std::size_t n = 0; n < nl; ++n) {
            const cplx c = deph.amplitudes[static_cast<Eigen::Index>(n)];
            if (c == cplx(0.0)) {
                zero[n] = true;
                continue;
            }
            logmag[n] = std::log(std::abs(c));
            phase[n] = std::arg(c);
        }
        for (std::size_t l = 0; l < bath.size(); ++l) {
            const SpinVector bra = coherent_state(bath.j, UnitVector3(st.label[l]));
            for (std::size_t n = 0; n < nl; ++n) {
                if (zero[n]) continue;
                const cplx o = bra.dot(st.spin[l * nl + n]);
                if (o == cplx(0.0)) {
                    zero[n] = true;
                    continue;
                }
                logmag[n] += std::log(std::abs(o));
                phase[n] += std::arg(o);
            }
        }
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < nl; ++n)
            if (!zero[n]) top = std::max(top, logmag[n]);
        if (!std::isfinite(top)) throw NumericalError("dephasing trajectory amplitude underflow");
        std::vector<cplx> a(nl, 0.0);
        for (std::size_t n = 0; n < nl; ++n)
            if (!zero[n]) a[n] = std::polar(std::exp(logmag[n] - top), phase[n]);
        return a;
    }

    double expect_l(const State& st) const {
        const auto a = amplitudes(st);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t n = 0; n < a.size(); ++n) {
            num += deph.couplings[n] * std::norm(a[n]);
            den += std::norm(a[n]);
        }
        return num / den;
    }

    void derivative(double t, const State& st, State& d) const {
        const std::size_t nl = levels();
        const double lbar = expect_l(st);
        d.spin.resize(st.spin.size());
        d.label.resize(st.label.size());
        for (std::size_t l = 0; l < bath.size(); ++l) {
            const Vec3 r = (bare_rotation(bath.omega[l], t) * frames[l]).row(0).transpose();
            const CMatrix gen = ops.dot(bath.g[l] * r);
            for (std::size_t n = 0; n < nl; ++n)
                d.spin[l * nl + n] = (-kI * deph.couplings[n]) * (gen * st.spin[l * nl + n]);
            d.label[l] = (lbar * bath.g[l] * r).cross(st.label[l]);
        }
    }
};

DephasingTrajectory::State axpy(const DephasingTrajectory::State& x, double h,
                                const DephasingTrajectory::State& k) {
    DephasingTrajectory::State y;
    y.spin.resize(x.spin.size());
    y.label.resize(x.label.size());
    for (std::size_t i = 0; i < x.spin.size(); ++i) y.spin[i] = x.spin[i] + h * k.spin[i];
    for (std::size_t i = 0; i < x.label.size(); ++i) y.label[i] = x.label[i] + h * k.label[i];
    return y;
}

}  // namespace

CMatrix dephasing_trajectory(const DephasingModel& deph, const BathSpec& bath, const TrajectoryLabels& labels,
                             const TimeGrid& grid, double dt) {
    if (labels.n.size() != bath.size() || labels.m.size() != bath.size())
        throw ConfigError("trajectory labels do not match the number of bath spins");
    const auto steps = grid.steps_per_interval(dt);
    const SpinOps ops = build_spin_operators(bath.j);
    const std::vector<Rotation3> frames = frames_from(labels.m, bath.size());
    DephasingTrajectory sys{deph, bath, ops, frames};
    const std::size_t nl = sys.levels();

    DephasingTrajectory::State st;
    SpinVector up = SpinVector::Zero(bath.j.dim());
    up[0] = 1.0;
    st.spin.assign(bath.size() * nl, up);
    for (const auto& n : labels.n) st.label.push_back(n.vec());

    CMatrix out(deph.basis.rows(), static_cast<Eigen::Index>(grid.size()));
    auto record = [&](std::size_t slot, double t) {
        const auto a = sys.amplitudes(st);
        CVector coeff(static_cast<Eigen::Index>(nl));
        for (std::size_t n = 0; n < nl; ++n)
            coeff[static_cast<Eigen::Index>(n)] = a[n] * std::exp(-kI * deph.energies[n] * t);
        CVector psi = deph.basis * coeff;
        out.col(static_cast<Eigen::Index>(slot)) = psi / psi.norm();
    };
    record(0, 0.0);
    DephasingTrajectory::State k1, k2, k3, k4;
    for (std::size_t iv = 0; iv < steps.size(); ++iv) {
        const double t0 = grid[iv];
        const double h = (grid[iv + 1] - t0) / static_cast<double>(steps[iv]);
        for (std::size_t s = 0; s < steps[iv]; ++s) {
            const double t = t0 + static_cast<double>(s) * h;
            sys.derivative(t, st, k1);
            sys.derivative(t + 0.5 * h, axpy(st, 0.5 * h, k1), k2);
            sys.derivative(t + 0.5 * h, axpy(st, 0.5 * h, k2), k3);
            sys.derivative(t + h, axpy(st, h, k3), k4);
            for (std::size_t i = 0; i < st.spin.size(); ++i)
                st.spin[i] += (h / 6.0) * (k1.spin[i] + 2.0 * k2.spin[i] + 2.0 * k3.spin[i] + k4.spin[i]);
            for (std::size_t i = 0; i < st.label.size(); ++i) {
                st.label[i] += (h / 6.0) * (k1.label[i] + 2.0 * k2.label[i] + 2.0 * k3.label[i] + k4.label[i]);
                st.label[i].normalize();
            }
        }
        record(iv + 1, grid[iv + 1]);
    }
    return out;
}

}  // namespace spinqsd
