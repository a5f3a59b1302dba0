#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/numeric/odeint.hpp>

#include "spinqsd/hierarchy.hpp"
#include "spinqsd/oracles.hpp"
#include "support.hpp"

using namespace spinqsd;
using testing::vec2;

namespace {

TrajectoryLabels random_labels(const BathSpec& bath, std::uint64_t seed, double beta = 0) {
    const ThermalSpec th = beta > 0 ? ThermalSpec{beta} : ThermalSpec::zero_temperature();
    return draw_trajectory_labels(bath, th, seed, 0);
}

double max_state_error(const CMatrix& a, const std::vector<CVector>& ref) {
    double err = 0;
    for (std::size_t t = 0; t < ref.size(); ++t) {
        const CVector r = ref[t] / ref[t].norm();
        err = std::max(err, (a.col(Eigen::Index(t)) - r).cwiseAbs().maxCoeff());
    }
    return err;
}

}  // namespace

TEST_CASE("model validation names offending entries") {
    auto m = testing::spin_boson_like();
    CHECK_NOTHROW(m.validate());
    m.hamiltonian(0, 1) += 1e-3;
    try {
        m.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(!e.violations().empty());
        CHECK(e.violations().front().find("H_S[0][1]") != std::string::npos);
    }
    auto n = testing::spin_boson_like();
    n.psi0 *= 1.1;
    n.coupling[1](1, 0) = cplx(0, 0.5);
    try {
        n.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.violations().size() == 2);
    }
}

TEST_CASE("time grid") {
    const auto g = TimeGrid::uniform(1.0, 11);
    CHECK(g.size() == 11);
    CHECK(g.back() == 1.0);
    const auto steps = g.steps_per_interval(0.01);
    CHECK(steps.front() == 10);
    CHECK_THROWS_AS(g.steps_per_interval(0.03), ConfigError);
    CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(TimeGrid({0.1, 0.5}), ConfigError);
}

TEST_CASE("hierarchy index sets") {
    CHECK(build_index_set(5, 0, SpinLength(1)).size() == 1);
    SUBCASE("capped spin-1/2") {
        const auto s = build_index_set(2, 2, SpinLength(1));
        REQUIRE(s.size() == 4);
        const std::vector<std::vector<int>> expected{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
        for (std::size_t i = 0; i < 4; ++i) {
            auto k = s.index(i);
            CHECK(int(k[0]) == expected[i][0]);
            CHECK(int(k[1]) == expected[i][1]);
        }
    }
    SUBCASE("uncapped simplex size") {
        for (std::size_t n : {1, 2, 5, 9}) CHECK(build_index_set(n, 2, SpinLength(2)).size() == (n + 2) * (n + 1) / 2);
    }
    SUBCASE("closure and neighbour tables") {
        const auto s = build_index_set(4, 3, SpinLength(2));
        for (std::size_t i = 0; i < s.size(); ++i) {
            auto k = s.index(i);
            std::vector<std::uint8_t> v(k.begin(), k.end());
            for (std::size_t l = 0; l < 4; ++l) {
                if (v[l] > 0) {
                    v[l]--;
                    CHECK(s.find(v) == s.lowered(i, l));
                    CHECK(s.lowered(i, l) != HierarchyIndexSet::kAbsent);
                    v[l]++;
                } else {
                    CHECK(s.lowered(i, l) == HierarchyIndexSet::kAbsent);
                }
                v[l]++;
                CHECK(s.find(v) == s.raised(i, l));
                v[l]--;
            }
            if (i > 0) CHECK(s.order(i) >= s.order(i - 1));
        }
    }
    CHECK_THROWS_AS(build_index_set(2, -1, SpinLength(1)), ConfigError);
}

TEST_CASE("expectation of L") {
    const std::array<CMatrix, 3> l{testing::sz(), testing::sx(), CMatrix::Zero(2, 2)};
    const Vec3 e = expectation_L(vec2(1, 0), l);
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK(e[1] == doctest::Approx(0.0));
    const CVector psi = vec2(0.3, cplx(0.1, -0.7));
    CHECK((expectation_L(psi, l) - expectation_L(cplx(-2.0, 5.0) * psi, l)).norm() < 1e-15);
    CHECK(std::abs(expectation_L(vec2(1, 1) / std::sqrt(2.0), l)[0]) < 1e-16);
    CHECK_THROWS_AS(expectation_L(CVector::Zero(2), l), NumericalError);
}

TEST_CASE("co-moving rotation") {
    const Mat3 s = axis_to_rotation(UnitVector3(0.2, 0.5, 0.8));
    CHECK(rotation_rhs(0.0, 1.0, 0.3, Mat3::Identity(), Vec3(1, 2, 3), s).norm() == 0.0);

    SUBCASE("parallel drift leaves n' stationary") {
        // At t = 0, O = I and the drift is g <L>; a label along it does not move.
        const Vec3 l(0.3, -0.4, 0.5);
        const Vec3 n = l.normalized();
        const Mat3 ds = rotation_rhs(0.8, 1.3, 0.0, Mat3::Identity(), l, Mat3::Identity());
        CHECK((ds * n).norm() < 1e-15);
    }

    SUBCASE("matches an independent adaptive integration of the label ODE") {
        const double g = 0.7, w = 1.3;
        const Mat3 frame = axis_to_rotation(UnitVector3(0.1, -0.6, 0.4));
        auto l_of_t = [](double t) { return Vec3(std::cos(0.5 * t), 0.3 * std::sin(t), 0.2 + 0.1 * t); };
        const Vec3 n0 = UnitVector3(0.5, 0.2, 0.7).vec();

        using State = std::array<double, 3>;
        State y{n0[0], n0[1], n0[2]};
        auto rhs = [&](const State& x, State& dx, double t) {
            const Vec3 a = rotation_drift(g, w, t, frame, l_of_t(t));
            const Vec3 d = a.cross(Vec3(x[0], x[1], x[2]));
            dx = {d[0], d[1], d[2]};
        };
        namespace odeint = boost::numeric::odeint;
        const double t_end = 10.0 / w;
        odeint::integrate_adaptive(odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>()), rhs,
                                   y, 0.0, t_end, 1e-3);

        // RK4 on S with the rotation right-hand side.
        Mat3 sm = Mat3::Identity();
        const int steps = 8000;
        const double h = t_end / steps;
        for (int i = 0; i < steps; ++i) {
            const double t = i * h;
            const Mat3 k1 = rotation_rhs(g, w, t, frame, l_of_t(t), sm);
            const Mat3 k2 = rotation_rhs(g, w, t + h / 2, frame, l_of_t(t + h / 2), sm + h / 2 * k1);
            const Mat3 k3 = rotation_rhs(g, w, t + h / 2, frame, l_of_t(t + h / 2), sm + h / 2 * k2);
            const Mat3 k4 = rotation_rhs(g, w, t + h, frame, l_of_t(t + h), sm + h * k3);
            sm += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        CHECK((sm * n0 - Vec3(y[0], y[1], y[2])).norm() < 1e-8);
        CHECK(orthogonality_drift(sm) < 1e-9);
    }
}

TEST_CASE("free evolution when uncoupled") {
    auto model = testing::generic_qubit();
    BathSpec bath{SpinLength(1), {0.0, 0.0}, {1.0, 2.0}};
    const auto labels = random_labels(bath, 1);
    HierarchyPropagator prop(model, bath, labels, 2);
    const auto st = prop.initial_state();
    const auto d = prop.derivative(st);
    CHECK((d.psi.col(0) + kI * model.hamiltonian * model.psi0).norm() < 1e-15);
    CHECK(d.psi.rightCols(d.psi.cols() - 1).norm() == 0.0);

    const auto grid = TimeGrid::uniform(5.0, 11);
    TrajectoryOptions opt;
    opt.dt = 0.005;
    const auto r = propagate_trajectory(model, bath, labels, grid, opt);
    for (std::size_t t = 0; t < grid.size(); ++t) {
        const CVector exact = (CMatrix(-kI * grid[t] * model.hamiltonian)).exp() * model.psi0;
        CHECK((r.states.col(Eigen::Index(t)) - exact).norm() < 1e-9);
    }
}

TEST_CASE("capped full hierarchy reproduces the brute-force projection") {
    const auto grid = TimeGrid::uniform(6.0, 13);
    FullPropagationOptions fopt;
    fopt.dt = 1e-3;
    TrajectoryOptions opt;
    opt.dt = 1e-3;

    SUBCASE("N = 1, j = 1/2, spin-boson-like qubit") {
        BathSpec bath{SpinLength(1), {0.8}, {1.1}};
        auto model = testing::spin_boson_like(1.0);
        opt.max_order = 1;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto labels = random_labels(bath, s);
            const auto ref = exact_project_trajectory(model, bath, labels, grid, fopt);
            const auto r = propagate_trajectory(model, bath, labels, grid, opt);
            CHECK(max_state_error(r.states, ref.psi) < 1e-6);
        }
    }
    SUBCASE("N = 2, j = 1/2, all couplings active, finite temperature frames") {
        BathSpec bath{SpinLength(1), {0.6, 0.4}, {0.7, 1.9}};
        auto model = testing::generic_qubit();
        opt.max_order = 2;
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto labels = random_labels(bath, 10 + s, 0.8);
            const auto ref = exact_project_trajectory(model, bath, labels, grid, fopt);
            const auto r = propagate_trajectory(model, bath, labels, grid, opt);
            CHECK(max_state_error(r.states, ref.psi) < 1e-6);
        }
    }
    SUBCASE("N = 2, j = 1, cap 2") {
        BathSpec bath{SpinLength(2), {0.5, 0.3}, {1.2, 0.4}};
        auto model = testing::generic_qubit();
        opt.max_order = 4;
        const auto labels = random_labels(bath, 21);
        const auto ref = exact_project_trajectory(model, bath, labels, grid, fopt);
        const auto r = propagate_trajectory(model, bath, labels, grid, opt);
        CHECK(max_state_error(r.states, ref.psi) < 1e-6);
    }
}

TEST_CASE("hierarchy matches the pure-dephasing trajectory formula") {
    auto model = testing::dephasing_qubit(1.0);
    BathSpec bath{SpinLength(1), {0.9, 0.5, 0.7}, {0.3, 1.7, 2.4}};
    const auto grid = TimeGrid::uniform(4.0, 9);
    const auto deph = DephasingModel::from_model(model);
    TrajectoryOptions opt;
    opt.max_order = 3;
    opt.dt = 1e-3;
    for (double beta : {0.0, 0.7}) {
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto labels = random_labels(bath, 100 + s, beta);
            const auto r = propagate_trajectory(model, bath, labels, grid, opt);
            const CMatrix d = dephasing_trajectory(deph, bath, labels, grid, 1e-3);
            // The closed form carries the gauge phase of <n'(t)|, common to all components.
            for (Eigen::Index t = 0; t < d.cols(); ++t) {
                const CMatrix pa = r.states.col(t) * r.states.col(t).adjoint();
                const CMatrix pb = d.col(t) * d.col(t).adjoint();
                CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-5);
            }
        }
    }
}

TEST_CASE("scale covariance and rescale flag") {
    auto model = testing::generic_qubit();
    BathSpec bath{SpinLength(1), {0.9, 0.6, 0.8}, {0.5, 1.0, 2.0}};
    const auto labels = random_labels(bath, 3, 1.0);
    const auto grid = TimeGrid::uniform(8.0, 17);
    TrajectoryOptions opt;
    opt.max_order = 2;
    opt.dt = 5e-3;
    const auto a = propagate_trajectory(model, bath, labels, grid, opt);
    opt.rescale = false;
    const auto b = propagate_trajectory(model, bath, labels, grid, opt);
    opt.initial_scale = 4e-7;
    const auto c = propagate_trajectory(model, bath, labels, grid, opt);
    // A complex scale only multiplies the normalized state by its phase.
    const cplx scale(3e-5, -7e-5);
    opt.rescale = true;
    opt.initial_scale = scale;
    const auto e = propagate_trajectory(model, bath, labels, grid, opt);
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.states - c.states).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.states * (scale / std::abs(scale)) - e.states).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index t = 0; t < a.states.cols(); ++t) CHECK(a.states.col(t).norm() == doctest::Approx(1.0));
    CHECK(a.log_norm.back() == doctest::Approx(b.log_norm.back()).epsilon(1e-9));
}

TEST_CASE("RK4 step halving shows fourth order") {
    auto model = testing::generic_qubit();
    BathSpec bath{SpinLength(1), {0.9, 0.6}, {0.5, 1.4}};
    const auto labels = random_labels(bath, 8);
    const auto grid = TimeGrid::uniform(2.0, 2);
    TrajectoryOptions opt;
    opt.max_order = 2;
    std::vector<CVector> out;
    for (double dt : {0.08, 0.04, 0.02}) {
        opt.dt = dt;
        out.push_back(propagate_trajectory(model, bath, labels, grid, opt).states.col(1));
    }
    const double order = std::log2((out[0] - out[1]).norm() / (out[1] - out[2]).norm());
    CAPTURE(order);
    CHECK(order >= 3.5);
}

TEST_CASE("label count mismatch is rejected") {
    auto model = testing::spin_boson_like();
    BathSpec bath{SpinLength(1), {0.1, 0.2}, {1.0, 2.0}};
    BathSpec other{SpinLength(1), {0.1}, {1.0}};
    const auto labels = random_labels(other, 1);
    CHECK_THROWS_AS(HierarchyPropagator(model, bath, labels, 2), ConfigError);
}
