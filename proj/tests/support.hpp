#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "spinqsd/bath.hpp"
#include "spinqsd/model.hpp"
#include "spinqsd/spin_algebra.hpp"

namespace testing {

using spinqsd::CMatrix;
using spinqsd::CVector;
using spinqsd::cplx;

inline CMatrix mat2(cplx a, cplx b, cplx c, cplx d) {
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline CMatrix sx() { return mat2(0, 1, 1, 0); }
inline CMatrix sy() { return mat2(0, cplx(0, -1), cplx(0, 1), 0); }
inline CMatrix sz() { return mat2(1, 0, 0, -1); }

inline CVector vec2(cplx a, cplx b) {
    CVector v(2);
    v << a, b;
    return v;
}

/// H_S = eps sigma_x / 2, L = sigma_z e_x.
inline spinqsd::ModelSpec spin_boson_like(double eps = 1.0, CVector psi0 = vec2(1, 0)) {
    spinqsd::ModelSpec m;
    m.hamiltonian = 0.5 * eps * sx();
    m.coupling = {sz(), CMatrix::Zero(2, 2), CMatrix::Zero(2, 2)};
    m.psi0 = psi0;
    return m;
}

/// Qubit with all three coupling components active and a generic H_S.
inline spinqsd::ModelSpec generic_qubit() {
    spinqsd::ModelSpec m;
    m.hamiltonian = 0.7 * sx() + 0.3 * sz() - 0.2 * sy();
    m.coupling = {sz(), 0.5 * sx(), 0.4 * (sx() + sy())};
    m.psi0 = vec2(0.6, cplx(0.0, 0.8));
    return m;
}

/// H_S = eps sigma_z with sigma_z = diag(-1, 1), L^x = |1><1|.
inline spinqsd::ModelSpec dephasing_qubit(double eps = 1.0) {
    spinqsd::ModelSpec m;
    m.hamiltonian = eps * mat2(-1, 0, 0, 1);
    m.coupling = {mat2(0, 0, 0, 1), CMatrix::Zero(2, 2), CMatrix::Zero(2, 2)};
    m.psi0 = vec2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    return m;
}

/// Operator acting on factor `pos` of a tensor product with dimensions `dims`.
inline CMatrix embed(const CMatrix& op, std::size_t pos, const std::vector<Eigen::Index>& dims) {
    CMatrix out = CMatrix::Identity(1, 1);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const CMatrix f = (i == pos) ? op : CMatrix::Identity(dims[i], dims[i]);
        CMatrix next = Eigen::kroneckerProduct(out, f).eval();
        out = std::move(next);
    }
    return out;
}

/// Dense lab-frame Hamiltonian H_S + sum g L.J + sum w (j - J^z).
inline CMatrix lab_hamiltonian(const spinqsd::ModelSpec& model, const spinqsd::BathSpec& bath) {
    const auto ops = spinqsd::build_spin_operators(bath.j);
    std::vector<Eigen::Index> dims{model.dim()};
    for (std::size_t l = 0; l < bath.size(); ++l) dims.push_back(bath.j.dim());
    CMatrix h = embed(model.hamiltonian, 0, dims);
    const CMatrix id = CMatrix::Identity(bath.j.dim(), bath.j.dim());
    for (std::size_t l = 0; l < bath.size(); ++l) {
        for (int a = 0; a < 3; ++a)
            h += bath.g[l] * embed(model.coupling[a], 0, dims) * embed(ops[a], l + 1, dims);
        h += bath.omega[l] * embed(bath.j.j() * id - ops.z, l + 1, dims);
    }
    return h;
}

/// Partial trace over everything but the first factor of dimension d.
inline CMatrix trace_out_bath(const CMatrix& rho, Eigen::Index d) {
    const Eigen::Index b = rho.rows() / d;
    CMatrix out = CMatrix::Zero(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            for (Eigen::Index e = 0; e < b; ++e) out(r, c) += rho(r * b + e, c * b + e);
    return out;
}

/// Reduced state at time t from exp(-iHt) (rho_S (x) rho_B) exp(iHt), rho_B a product Gibbs state
/// (pure |j,j>^N for beta = inf).
inline CMatrix dense_reduced_state(const spinqsd::ModelSpec& model, const spinqsd::BathSpec& bath, double beta,
                                   double t) {
    const Eigen::Index q = bath.j.dim();
    CMatrix rho_b = CMatrix::Identity(1, 1);
    for (std::size_t l = 0; l < bath.size(); ++l) {
        CMatrix r = CMatrix::Zero(q, q);
        for (Eigen::Index k = 0; k < q; ++k)
            r(k, k) = std::isinf(beta) ? (k == 0 ? 1.0 : 0.0) : std::exp(-beta * bath.omega[l] * double(k));
        r /= r.trace();
        CMatrix next = Eigen::kroneckerProduct(rho_b, r).eval();
        rho_b = std::move(next);
    }
    const CMatrix rho0 = Eigen::kroneckerProduct(CMatrix(model.psi0 * model.psi0.adjoint()), rho_b).eval();
    const CMatrix u = (CMatrix(cplx(0, -t) * lab_hamiltonian(model, bath))).exp();
    return trace_out_bath(u * rho0 * u.adjoint(), model.dim());
}

}  // namespace testing
