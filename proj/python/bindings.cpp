#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "spinqsd/cli.hpp"
#include "spinqsd/config.hpp"
#include "spinqsd/ensemble.hpp"
#include "spinqsd/oracles.hpp"
#include "spinqsd/version.hpp"

namespace py = pybind11;
using namespace spinqsd;

namespace {

RunConfig load(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

py::dict series_dict(const std::vector<double>& times, const std::vector<CMatrix>& rho,
                     const std::vector<ObservableSeries>& observables) {
    py::dict out;
    out["times"] = times;
    out["rho"] = rho;
    py::dict obs;
    for (const auto& o : observables) {
        std::vector<double> err;
        for (const auto& e : o.std_error) err.push_back(e.value_or(std::nan("")));
        obs[py::str(o.name)] = py::make_tuple(o.mean, err);
    }
    out["observables"] = obs;
    return out;
}

py::tuple labels_tuple(const TrajectoryLabels& l) {
    Eigen::MatrixX3d n(l.n.size(), 3), m(l.m.size(), 3);
    for (std::size_t i = 0; i < l.n.size(); ++i) {
        n.row(Eigen::Index(i)) = l.n[i].vec();
        m.row(Eigen::Index(i)) = l.m[i].vec();
    }
    return py::make_tuple(n, m);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spin-bath stochastic state diffusion: trajectories, ensembles and exact oracles.";
    m.attr("__version__") = kVersion;

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
    static py::exception<DimensionError> dimension_error(m, "DimensionError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            std::string msg;
            for (const auto& v : e.violations()) msg += (msg.empty() ? "" : "\n") + v;
            py::set_error(config_error, msg.c_str());
        } catch (const NumericalError& e) {
            py::set_error(numerical_error, e.what());
        } catch (const DimensionError& e) {
            py::set_error(dimension_error, e.what());
        }
    });

    // spin algebra
    m.def("spin_operators", [](int two_j) {
        const auto o = build_spin_operators(SpinLength(two_j));
        return py::make_tuple(o.x, o.y, o.z);
    }, py::arg("two_j"), "(Jx, Jy, Jz) in the |j,m> basis, m descending.");
    m.def("bargmann_state", [](int two_j, cplx z, double z_max) {
        return CVector(bargmann_state(SpinLength(two_j), BargmannLabel(z), z_max));
    }, py::arg("two_j"), py::arg("z"), py::arg("z_max") = kDefaultZMax);
    m.def("coherent_state", [](int two_j, const Vec3& n) {
        return CVector(coherent_state(SpinLength(two_j), UnitVector3(n)));
    }, py::arg("two_j"), py::arg("n"));
    m.def("stereographic", [](const Vec3& n) { return stereographic(UnitVector3(n)).value; }, py::arg("n"));
    m.def("inverse_stereographic", [](cplx z) { return inverse_stereographic(BargmannLabel(z)).vec(); }, py::arg("z"));
    m.def("bare_rotation", &bare_rotation, py::arg("omega"), py::arg("t"));
    m.def("axis_to_rotation", [](const Vec3& v) { return Mat3(axis_to_rotation(UnitVector3(v))); }, py::arg("m"));

    // bath
    m.def("discretize_ohmic", [](double alpha, double omega_c, int two_j, std::size_t n, double omega_max) {
        const auto b = discretize_spectral_density({alpha, omega_c}, SpinLength(two_j), n, omega_max);
        return py::make_tuple(b.g, b.omega);
    }, py::arg("alpha"), py::arg("omega_c"), py::arg("two_j"), py::arg("n"), py::arg("omega_max"),
          "Midpoint discretization; returns (g, omega).");
    m.def("thermal_jz_expectation", [](double beta, double omega, int two_j) {
        return thermal_jz_expectation(beta, omega, SpinLength(two_j));
    }, py::arg("beta"), py::arg("omega"), py::arg("two_j"));
    m.def("thermal_partition_function", [](double beta, int two_j, std::vector<double> omega) {
        BathSpec b{SpinLength(two_j), std::vector<double>(omega.size(), 0.0), std::move(omega)};
        return thermal_partition_function({beta}, b);
    }, py::arg("beta"), py::arg("two_j"), py::arg("omega"));
    m.def("draw_labels", [](int two_j, std::vector<double> g, std::vector<double> omega, std::optional<double> beta,
                            std::uint64_t seed, std::uint64_t index) {
        BathSpec b{SpinLength(two_j), std::move(g), std::move(omega)};
        b.validate();
        const ThermalSpec th = beta ? ThermalSpec{*beta} : ThermalSpec::zero_temperature();
        return labels_tuple(draw_trajectory_labels(b, th, seed, index));
    }, py::arg("two_j"), py::arg("g"), py::arg("omega"), py::arg("beta"), py::arg("seed"), py::arg("index"),
          "Labels (n, m) of one trajectory as N x 3 arrays.");

    m.def("hs_distance", &hs_distance, py::arg("a"), py::arg("b"));

    // config-driven pipelines; configs are JSON text
    m.def("canonical_config", [](const std::string& text) { return to_json(load(text)).dump(); }, py::arg("config"),
          "Validate a config and return its canonical JSON.");
    m.def("simulate", [](const std::string& text, unsigned threads) {
        const auto c = load(text);
        EnsembleResult r;
        {
            py::gil_scoped_release release;
            r = run_ensemble(c.ensemble(threads), c.model, c.bath(), c.observables);
        }
        py::dict d = series_dict(r.times, r.rho, r.observables);
        d["completed"] = r.completed;
        d["aborted"] = r.aborted;
        return d;
    }, py::arg("config"), py::arg("threads") = 0);
    m.def("oracle_exact", [](const std::string& text) {
        const auto c = load(text);
        if (c.beta) throw ConfigError("oracle_exact binding supports beta = null only; use the CLI for thermal averages");
        std::vector<CMatrix> rho;
        {
            py::gil_scoped_release release;
            rho = exact_propagate(c.model, c.bath(), {}, c.grid(), {c.run.dt, c.run.dimension_cap});
        }
        return series_dict(c.grid().points(), rho, {});
    }, py::arg("config"));
    m.def("oracle_dephasing", [](const std::string& text) {
        const auto c = load(text);
        const auto rho = dephasing_reduced_state(DephasingModel::from_model(c.model), c.bath(), c.thermal(), c.grid());
        return series_dict(c.grid().points(), rho, {});
    }, py::arg("config"));
    m.def("dispatch", [](const std::string& command, const std::string& config_path, std::optional<std::string> out_dir,
                         unsigned threads, std::optional<std::uint64_t> seed) {
        cli::Options o;
        o.config_path = config_path;
        o.out_dir = std::move(out_dir);
        o.threads = threads;
        o.seed = seed;
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cli::dispatch(command, o, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("command"), py::arg("config_path"), py::arg("out_dir") = py::none(), py::arg("threads") = 0,
          py::arg("seed") = py::none(), "Run a CLI command; returns (exit_code, stdout, stderr).");
}
