#include <doctest.h>

#include <cmath>

#include "spinqsd/ensemble.hpp"
#include "spinqsd/oracles.hpp"
#include "support.hpp"

using namespace spinqsd;
using testing::mat2;
using testing::vec2;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

void check_density_matrix(const CMatrix& rho, double tol = 1e-8) {
    CHECK(std::abs(rho.trace() - 1.0) < tol);
    CHECK(hermiticity_violation(rho) < tol);
}

}  // namespace

TEST_CASE("full space dimension cap") {
    auto model = testing::spin_boson_like();
    BathSpec bath{SpinLength(1), std::vector<double>(12, 0.1), std::vector<double>(12, 1.0)};
    FullPropagationOptions opt;
    opt.dimension_cap = 4096;
    CHECK_THROWS_AS(exact_propagate(model, bath, {}, TimeGrid::uniform(1.0, 2), opt), DimensionError);
}

TEST_CASE("exact propagation") {
    const auto grid = TimeGrid::uniform(4.0, 9);
    FullPropagationOptions opt;
    opt.dt = 1e-3;

    SUBCASE("uncoupled bath gives free evolution") {
        auto model = testing::generic_qubit();
        BathSpec bath{SpinLength(2), {0.0, 0.0}, {1.0, 0.3}};
        const auto rho = exact_propagate(model, bath, {}, grid, opt);
        for (std::size_t t = 0; t < grid.size(); ++t) {
            const CVector psi = CMatrix(-kI * grid[t] * model.hamiltonian).exp() * model.psi0;
            CHECK(max_abs(rho[t] - psi * psi.adjoint()) < 1e-10);
        }
    }
    SUBCASE("matches dense lab-frame exponentials") {
        auto model = testing::generic_qubit();
        for (int two_j : {1, 2}) {
            BathSpec bath{SpinLength(two_j), {0.7, 0.4}, {1.3, 0.6}};
            const auto rho = exact_propagate(model, bath, {}, grid, opt);
            for (std::size_t t = 0; t < grid.size(); ++t) {
                CHECK(max_abs(rho[t] - testing::dense_reduced_state(model, bath, INFINITY, grid[t])) < 1e-8);
                check_density_matrix(rho[t]);
                CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(rho[t]).eigenvalues().minCoeff() > -1e-10);
            }
        }
    }
    SUBCASE("thermal frames average to the Gibbs reference") {
        auto model = testing::spin_boson_like(1.0);
        BathSpec bath{SpinLength(1), {0.9}, {1.0}};
        const double beta = 1.0;
        const std::size_t samples = 3000;
        const auto g2 = TimeGrid::uniform(4.0, 5);
        opt.dt = 1e-2;
        std::vector<CMatrix> avg(g2.size(), CMatrix::Zero(2, 2));
        for (std::size_t s = 0; s < samples; ++s) {
            const auto labels = draw_trajectory_labels(bath, {beta}, 17, s);
            const auto rho = exact_propagate(model, bath, labels.m, g2, opt);
            for (std::size_t t = 0; t < g2.size(); ++t) avg[t] += rho[t] / double(samples);
        }
        for (std::size_t t = 0; t < g2.size(); ++t)
            CHECK(hs_distance(avg[t], testing::dense_reduced_state(model, bath, beta, g2[t])) < 0.03);
    }
}

TEST_CASE("brute-force trajectory projection") {
    auto model = testing::generic_qubit();
    BathSpec bath{SpinLength(1), {0.6, 0.8}, {0.9, 1.5}};
    const auto grid = TimeGrid::uniform(3.0, 7);
    FullPropagationOptions opt;
    opt.dt = 1e-3;
    const auto labels = draw_trajectory_labels(bath, {0.6}, 5, 0);
    const auto res = exact_project_trajectory(model, bath, labels, grid, opt);
    CHECK((res.psi[0] - model.psi0).norm() < 1e-15);

    SUBCASE("co-moving unitaries implement the rotations") {
        const auto ops = build_spin_operators(bath.j);
        for (std::size_t t = 0; t < grid.size(); ++t) {
            for (std::size_t l = 0; l < bath.size(); ++l) {
                const CMatrix& r = res.r[t][l];
                const Rotation3& s = res.s[t][l];
                CHECK(max_abs(r.adjoint() * r - CMatrix::Identity(2, 2)) < 1e-10);
                for (int a = 0; a < 3; ++a) {
                    CMatrix rotated = CMatrix::Zero(2, 2);
                    for (int b = 0; b < 3; ++b) rotated += s(a, b) * ops[b];
                    CHECK(max_abs(r.adjoint() * ops[a] * r - rotated) < 1e-9);
                }
            }
        }
    }
    SUBCASE("uncoupled bath") {
        BathSpec free{SpinLength(1), {0.0, 0.0}, {0.9, 1.5}};
        const auto r = exact_project_trajectory(model, free, labels, grid, opt);
        for (std::size_t t = 0; t < grid.size(); ++t) {
            const CVector psi = CMatrix(-kI * grid[t] * model.hamiltonian).exp() * model.psi0;
            CHECK((r.psi[t] - psi).norm() < 1e-10);
        }
    }
}

TEST_CASE("dephasing model detection") {
    CHECK_THROWS_AS(DephasingModel::from_model(testing::spin_boson_like()), ConfigError);
    auto with_y = testing::dephasing_qubit();
    with_y.coupling[1] = mat2(1, 0, 0, 0);
    CHECK_THROWS_AS(DephasingModel::from_model(with_y), ConfigError);

    const auto d = DephasingModel::from_model(testing::dephasing_qubit(1.5));
    REQUIRE(d.energies.size() == 2);
    double norm = 0;
    for (Eigen::Index n = 0; n < d.amplitudes.size(); ++n) norm += std::norm(d.amplitudes[n]);
    CHECK(norm == doctest::Approx(1.0));

    // Degenerate H_S: the basis must still diagonalize L^x.
    ModelSpec deg;
    deg.hamiltonian = CMatrix::Identity(2, 2);
    deg.coupling = {testing::sx(), CMatrix::Zero(2, 2), CMatrix::Zero(2, 2)};
    deg.psi0 = vec2(1, 0);
    const auto dd = DephasingModel::from_model(deg);
    const CMatrix lx = dd.basis.adjoint() * testing::sx() * dd.basis;
    CHECK(std::abs(lx(0, 1)) < 1e-12);
}

TEST_CASE("closed-form dephasing reduced state") {
    auto model = testing::dephasing_qubit(1.0);
    const auto deph = DephasingModel::from_model(model);
    const auto grid = TimeGrid::uniform(3.0, 7);

    SUBCASE("initial state, populations, Gibbs reference") {
        BathSpec bath{SpinLength(2), {0.8, 0.3, 0.5}, {1.2, 0.0, 2.5}};
        for (double beta : {double(INFINITY), 0.7}) {
            const auto th = std::isinf(beta) ? ThermalSpec::zero_temperature() : ThermalSpec{beta};
            const auto rho = dephasing_reduced_state(deph, bath, th, grid);
            CHECK(max_abs(rho[0] - model.psi0 * model.psi0.adjoint()) < 1e-14);
            for (std::size_t t = 0; t < grid.size(); ++t) {
                CHECK(std::abs(rho[t](0, 0).real() - 0.5) < 1e-12);
                CHECK(std::abs(rho[t](1, 1).real() - 0.5) < 1e-12);
                CHECK(max_abs(rho[t] - testing::dense_reduced_state(model, bath, beta, grid[t])) < 1e-10);
            }
        }
    }
    SUBCASE("equal coupling eigenvalues leave coherences' magnitude constant") {
        ModelSpec m = model;
        m.coupling[0] = 0.7 * CMatrix::Identity(2, 2);
        const auto d = DephasingModel::from_model(m);
        BathSpec bath{SpinLength(1), {0.8, 0.3}, {1.2, 0.4}};
        const auto rho = dephasing_reduced_state(d, bath, {0.5}, grid);
        for (const auto& r : rho) CHECK(std::abs(r(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("agrees with brute force at zero temperature up to N = 6") {
        BathSpec bath{SpinLength(1), {0.5, 0.3, 0.7, 0.2, 0.6, 0.4}, {0.2, 0.9, 1.4, 2.0, 2.6, 3.0}};
        FullPropagationOptions opt;
        opt.dt = 1e-3;
        const auto exact = exact_propagate(model, bath, {}, grid, opt);
        const auto closed = dephasing_reduced_state(deph, bath, ThermalSpec::zero_temperature(), grid);
        for (std::size_t t = 0; t < grid.size(); ++t) CHECK(max_abs(exact[t] - closed[t]) < 1e-6);
    }
}

TEST_CASE("dephasing trajectories") {
    auto model = testing::dephasing_qubit(1.0);
    const auto deph = DephasingModel::from_model(model);
    const auto grid = TimeGrid::uniform(2.0, 11);

    SUBCASE("uncoupled bath is free evolution") {
        BathSpec bath{SpinLength(1), {0.0, 0.0}, {1.0, 2.0}};
        const auto labels = draw_trajectory_labels(bath, {0.5}, 1, 0);
        const CMatrix s = dephasing_trajectory(deph, bath, labels, grid, 0.01);
        for (std::size_t t = 0; t < grid.size(); ++t) {
            const CVector psi = CMatrix(-kI * grid[t] * model.hamiltonian).exp() * model.psi0;
            CHECK((s.col(Eigen::Index(t)) - psi).norm() < 1e-12);
        }
    }
    SUBCASE("ensemble average converges to the closed form") {
        BathSpec bath = discretize_spectral_density({8.0, 10.0}, SpinLength(1), 10, 60.0);
        const ThermalSpec th{0.5};
        const std::size_t samples = 4000;
        std::vector<CMatrix> avg(grid.size(), CMatrix::Zero(2, 2));
        for (std::size_t s = 0; s < samples; ++s) {
            const auto labels = draw_trajectory_labels(bath, th, 9, s);
            const CMatrix st = dephasing_trajectory(deph, bath, labels, grid, 0.005);
            for (std::size_t t = 0; t < grid.size(); ++t) {
                CHECK(st.col(Eigen::Index(t)).norm() == doctest::Approx(1.0).epsilon(1e-12));
                avg[t] += st.col(Eigen::Index(t)) * st.col(Eigen::Index(t)).adjoint() / double(samples);
            }
        }
        const auto closed = dephasing_reduced_state(deph, bath, th, grid);
        for (std::size_t t = 0; t < grid.size(); ++t) CHECK(hs_distance(avg[t], closed[t]) < 0.05);
    }
}
