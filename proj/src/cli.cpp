#include "spinqsd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spinqsd/config.hpp"
#include "spinqsd/version.hpp"

namespace spinqsd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct Run {
    RunConfig config;
    std::string canonical;  // canonical config document, hashed into the manifest
    fs::path out_dir;
    unsigned threads = 0;
    std::vector<std::string> outputs;
    json extra = json::object();
};

void write_file(Run& run, const std::string& name, const std::string& content) {
    fs::create_directories(run.out_dir);
    const fs::path p = run.out_dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << content;
    if (!f) throw Error("write to '" + p.string() + "' failed");
    run.outputs.push_back(name);
    spdlog::info("wrote {}", p.string());
}

void write_manifest(Run& run, const std::string& command, const std::string& name) {
    json m;
    m["command"] = command;
    m["config_hash"] = "fnv1a64:" + hex64(fnv1a64(run.canonical));
    m["config"] = json::parse(run.canonical);
    m["versions"] = {{"spinqsd", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                                    std::to_string(SPDLOG_VER_PATCH)}};
    m["seed"] = run.config.run.seed;
    m["threads"] = run.threads;
    m["outputs"] = run.outputs;
    for (auto it = run.extra.begin(); it != run.extra.end(); ++it) m[it.key()] = it.value();
    const std::string text = m.dump(2) + "\n";
    write_file(run, name, text);
}

std::string prefix(const Run& run) { return run.config.output_prefix; }

// Observables of deterministic reduced states: tr(rho O), no error bar.
std::vector<ObservableSeries> exact_observables(const std::vector<CMatrix>& rho,
                                                const std::vector<NamedObservable>& observables) {
    std::vector<ObservableSeries> out;
    for (const auto& o : observables) {
        ObservableSeries s{o.name, {}, {}};
        for (const auto& r : rho) {
            s.mean.push_back((r * o.op).trace().real());
            s.std_error.push_back(std::nullopt);
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct ExactRun {
    std::vector<CMatrix> rho;
    std::vector<ObservableSeries> observables;
    std::size_t samples = 1;
};

// Zero temperature: a single propagation. Finite beta: average over sampled thermal frames.
ExactRun run_exact(const RunConfig& c) {
    const BathSpec bath = c.bath();
    const TimeGrid grid = c.grid();
    const FullPropagationOptions opts{c.run.dt, c.run.dimension_cap};
    ExactRun out;
    if (c.thermal().is_zero_temperature()) {
        out.rho = exact_propagate(c.model, bath, {}, grid, opts);
        out.observables = exact_observables(out.rho, c.observables);
        return out;
    }
    out.samples = c.run.trajectories;
    out.rho.assign(grid.size(), CMatrix::Zero(c.model.dim(), c.model.dim()));
    std::vector<SeriesAccumulator> acc(c.observables.size(), SeriesAccumulator(grid.size()));
    for (std::size_t s = 0; s < out.samples; ++s) {
        const TrajectoryLabels labels = draw_trajectory_labels(bath, c.thermal(), c.run.seed, s, c.run.z_max);
        const auto rho = exact_propagate(c.model, bath, labels.m, grid, opts);
        for (std::size_t t = 0; t < grid.size(); ++t) out.rho[t] += rho[t];
        for (std::size_t o = 0; o < c.observables.size(); ++o) {
            std::vector<double> v(grid.size());
            for (std::size_t t = 0; t < grid.size(); ++t) v[t] = (rho[t] * c.observables[o].op).trace().real();
            acc[o].add(v);
        }
        spdlog::debug("thermal frame sample {} of {}", s + 1, out.samples);
    }
    for (auto& r : out.rho) r /= static_cast<double>(out.samples);
    for (std::size_t o = 0; o < c.observables.size(); ++o) out.observables.push_back(acc[o].result(c.observables[o].name));
    return out;
}

std::vector<CMatrix> dephasing_reference(const RunConfig& c) {
    const auto deph = DephasingModel::from_model(c.model);
    return dephasing_reduced_state(deph, c.bath(), c.thermal(), c.grid());
}

void record_ensemble(Run& run, const EnsembleResult& r) {
    run.extra["trajectories"] = run.config.run.trajectories;
    run.extra["completed"] = r.completed;
    run.extra["aborted"] = r.aborted;
    run.extra["aborted_samples"] = r.aborted_samples;
}

int cmd_simulate(Run& run) {
    const RunConfig& c = run.config;
    const auto result = run_ensemble(c.ensemble(run.threads), c.model, c.bath(), c.observables);
    record_ensemble(run, result);
    write_file(run, prefix(run) + ".csv", format_csv(result.times, result.rho, result.observables));
    write_manifest(run, "simulate", prefix(run) + "_manifest.json");
    return kOk;
}

int cmd_oracle_exact(Run& run) {
    const auto r = run_exact(run.config);
    run.extra["thermal_samples"] = r.samples;
    write_file(run, prefix(run) + "_exact.csv", format_csv(run.config.grid().points(), r.rho, r.observables));
    write_manifest(run, "oracle-exact", prefix(run) + "_exact_manifest.json");
    return kOk;
}

int cmd_oracle_dephasing(Run& run) {
    const auto rho = dephasing_reference(run.config);
    write_file(run, prefix(run) + "_dephasing.csv",
               format_csv(run.config.grid().points(), rho, exact_observables(rho, run.config.observables)));
    write_manifest(run, "oracle-dephasing", prefix(run) + "_dephasing_manifest.json");
    return kOk;
}


int cmd_convergence(Run& run) {
    const RunConfig& c = run.config;
    std::vector<std::size_t> counts = c.convergence_counts;
    if (counts.empty()) counts.push_back(c.run.trajectories);

    std::vector<CMatrix> reference;
    std::string reference_kind;
    if (c.run.engine == Engine::dephasing) {
        reference = dephasing_reference(c);
        reference_kind = "dephasing-closed-form";
    } else {
        if (!c.thermal().is_zero_temperature())
            throw ConfigError("convergence with the hierarchy engine requires beta = null (exact reference)");
        reference = run_exact(c).rho;
        reference_kind = "exact-propagation";
    }
    const auto report = convergence_study(c.ensemble(run.threads), c.model, c.bath(), counts, reference);

    std::string table = "M,median_hs_distance,final_hs_distance\n";
    char buf[128];
    for (std::size_t i = 0; i < report.sample_counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", report.sample_counts[i], report.median_distance[i],
                      report.final_distance[i]);
        table += buf;
    }
    std::string series = "t";
    for (auto m : report.sample_counts) series += ",hs_M" + std::to_string(m);
    series += '\n';
    const auto& times = c.grid().points();
    for (std::size_t t = 0; t < times.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g", times[t]);
        series += buf;
        for (const auto& d : report.distances) {
            std::snprintf(buf, sizeof buf, ",%.17g", d[t]);
            series += buf;
        }
        series += '\n';
    }
    run.extra["reference"] = reference_kind;
    run.extra["sample_counts"] = report.sample_counts;
    run.extra["median_slope"] = report.median_slope ? json(*report.median_slope) : json(nullptr);
    run.extra["final_slope"] = report.final_slope ? json(*report.final_slope) : json(nullptr);
    write_file(run, prefix(run) + "_convergence.csv", table);
    write_file(run, prefix(run) + "_convergence_series.csv", series);
    write_manifest(run, "convergence", prefix(run) + "_convergence_manifest.json");
    return kOk;
}

// Per-mode label statistics against their analytic expectations.
int cmd_sample_stats(Run& run) {
    const RunConfig& c = run.config;
    const BathSpec bath = c.bath();
    const ThermalSpec thermal = c.thermal();
    const double j = bath.j.j();
    const std::size_t n = bath.size();
    std::vector<double> nz_sum(n, 0.0), nz_sq(n, 0.0), mz_sum(n, 0.0), mz_sq(n, 0.0);
    for (std::size_t s = 0; s < c.run.trajectories; ++s) {
        const auto labels = draw_trajectory_labels(bath, thermal, c.run.seed, s, c.run.z_max);
        for (std::size_t l = 0; l < n; ++l) {
            const double a = labels.n[l].vec().z();
            const double b = j * labels.m[l].vec().z();
            nz_sum[l] += a;
            nz_sq[l] += a * a;
            mz_sum[l] += b;
            mz_sq[l] += b * b;
        }
    }
    const double m = static_cast<double>(c.run.trajectories);
    auto stderr_of = [m](double sum, double sq) {
        if (m < 2) return std::nan("");
        const double mean = sum / m;
        return std::sqrt(std::max(0.0, (sq - m * mean * mean) / (m - 1.0)) / m);
    };
    std::string out = "mode,omega,mean_nz,stderr_nz,expected_nz,mean_j_mz,stderr_j_mz,expected_j_mz\n";
    char buf[512];
    for (std::size_t l = 0; l < n; ++l) {
        const double expected_mz =
            thermal.is_zero_temperature() ? j : thermal_jz_expectation(thermal.beta, bath.omega[l], bath.j);
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", l, bath.omega[l],
                      nz_sum[l] / m, stderr_of(nz_sum[l], nz_sq[l]), j / (j + 1.0), mz_sum[l] / m,
                      stderr_of(mz_sum[l], mz_sq[l]), expected_mz);
        out += buf;
    }
    write_file(run, prefix(run) + "_sample_stats.csv", out);
    write_manifest(run, "sample-stats", prefix(run) + "_sample_stats_manifest.json");
    return kOk;
}

}  // namespace

std::string usage() {
    return "usage: spinqsd <command> --config PATH [--out DIR] [--threads N] [--seed S] [--log-level LEVEL]\n"
           "commands:\n"
           "  simulate          Monte Carlo ensemble (hierarchy or dephasing engine)\n"
           "  oracle-exact      brute-force propagation of system and bath\n"
           "  oracle-dephasing  closed-form reduced state for pure dephasing models\n"
           "  convergence       HS distance to the oracle for the configured M list\n"
           "  sample-stats      label sampler statistics per bath mode\n"
           "  validate-config   parse and validate only\n";
}

int dispatch(const std::string& command, const Options& options, std::ostream& out, std::ostream& err) {
    static const char* const kCommands[] = {"simulate",     "oracle-exact", "oracle-dephasing",
                                            "convergence",  "sample-stats", "validate-config"};
    if (std::find(std::begin(kCommands), std::end(kCommands), command) == std::end(kCommands)) {
        err << "unknown command '" << command << "'\n" << usage();
        return kUsage;
    }
    if (options.config_path.empty()) {
        err << "missing --config\n" << usage();
        return kUsage;
    }
    try {
        Run run;
        run.config = parse_and_validate(options.config_path);
        if (options.seed) run.config.run.seed = *options.seed;
        if (options.out_dir) run.config.output_dir = *options.out_dir;
        run.canonical = to_json(run.config).dump();
        run.out_dir = run.config.output_dir;
        run.threads = options.threads;

        if (command == "validate-config") {
            out << "config ok: " << options.config_path << " (fnv1a64:" << hex64(fnv1a64(run.canonical)) << ")\n";
            return kOk;
        }
        if (command == "simulate") return cmd_simulate(run);
        if (command == "oracle-exact") return cmd_oracle_exact(run);
        if (command == "oracle-dephasing") return cmd_oracle_dephasing(run);
        if (command == "convergence") return cmd_convergence(run);
        return cmd_sample_stats(run);
    } catch (const ConfigError& e) {
        err << "config error:\n";
        for (const auto& v : e.violations()) err << "  - " << v << "\n";
        return kConfigError;
    } catch (const DimensionError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return kNumericalAbort;
    }
}

}  // namespace spinqsd::cli
