#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "spinqsd/bath.hpp"
#include "spinqsd/ensemble.hpp"
#include "spinqsd/model.hpp"
#include "spinqsd/oracles.hpp"

namespace spinqsd {

struct ExplicitBath {
    std::vector<double> g;
    std::vector<double> omega;
};

struct OhmicBath {
    OhmicSpec spec;
    std::size_t modes = 1;
    double omega_max = 1.0;
};

struct RunBlock {
    Engine engine = Engine::hierarchy;
    std::size_t trajectories = 1;
    int max_order = 2;
    double dt = 1e-2;
    double t_max = 1.0;
    std::size_t n_outputs = 2;
    std::uint64_t seed = 0;
    bool rescale = true;
    double max_abort_fraction = 1e-3;
    std::size_t dimension_cap = kDefaultDimensionCap;
    double z_max = kDefaultZMax;
};

/// A complete, validated run description. Complex entries are [re, im] pairs in the document.
struct RunConfig {
    ModelSpec model;
    std::vector<NamedObservable> observables;
    int two_j = 1;
    std::optional<double> beta;  ///< empty = zero temperature
    std::variant<ExplicitBath, OhmicBath> bath_source;
    RunBlock run;
    std::vector<std::size_t> convergence_counts;
    std::string output_dir = ".";
    std::string output_prefix = "run";

    BathSpec bath() const;
    TimeGrid grid() const;
    ThermalSpec thermal() const;
    EnsembleConfig ensemble(unsigned threads = 0) const;
};

/// Parses and validates; throws ConfigError carrying every violation found.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_and_validate(const std::filesystem::path& path);

/// Canonical document (fixed field order); parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

/// FNV-1a 64-bit hash, used for the run manifest.
std::uint64_t fnv1a64(const std::string& bytes);

/// CSV: t, Re/Im rho_ij for i <= j (row-major), then <name>_mean, <name>_stderr per observable.
std::string csv_header(Eigen::Index dim, const std::vector<ObservableSeries>& observables);
std::string format_csv(const std::vector<double>& times, const std::vector<CMatrix>& rho,
                       const std::vector<ObservableSeries>& observables);

}  // namespace spinqsd
