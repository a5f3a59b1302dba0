#include "spinqsd/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

#include "spinqsd/oracles.hpp"

namespace spinqsd {

const char* to_string(Engine e) {
    return e == Engine::hierarchy ? "hierarchy" : "dephasing";
}

Engine engine_from_string(const std::string& name) {
    if (name == "hierarchy") return Engine::hierarchy;
    if (name == "dephasing" || name == "dephasing-analytic") return Engine::dephasing;
    throw ConfigError("unknown engine '" + name + "' (expected hierarchy or dephasing)");
}

void EnsembleConfig::validate() const {
    std::vector<std::string> errors;
    if (trajectories < 1) errors.emplace_back("run: M must be >= 1");
    if (max_order < 0) errors.emplace_back("run: K must be >= 0");
    if (!(dt > 0.0)) errors.emplace_back("run: dt must be positive");
    if (!(thermal.beta >= 0.0)) errors.emplace_back("temperature: beta must be >= 0");
    if (!(max_abort_fraction >= 0.0)) errors.emplace_back("run: max_abort_fraction must be >= 0");
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
        if (checkpoints[i] <= checkpoints[i - 1]) errors.emplace_back("checkpoints must be strictly increasing");
    if (dt > 0.0) {
        try {
            grid.steps_per_interval(dt);
        } catch (const ConfigError& e) {
            errors.insert(errors.end(), e.violations().begin(), e.violations().end());
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

void SeriesAccumulator::add(const std::vector<double>& values) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        const double delta = values[i] - mean_[i];
        mean_[i] += delta / n;
        m2_[i] += delta * (values[i] - mean_[i]);
    }
}

ObservableSeries SeriesAccumulator::result(std::string name) const {
    ObservableSeries out{std::move(name), mean_, {}};
    out.std_error.resize(mean_.size());
    if (count_ >= 2) {
        const double n = static_cast<double>(count_);
        for (std::size_t i = 0; i < mean_.size(); ++i)
            out.std_error[i] = std::sqrt(std::max(0.0, m2_[i] / (n - 1.0)) / n);
    }
    return out;
}

namespace {

void check_observables(const std::vector<NamedObservable>& observables, Eigen::Index dim) {
    std::vector<std::string> errors;
    for (const auto& o : observables) {
        if (o.op.rows() != dim || o.op.cols() != dim)
            errors.push_back("observable '" + o.name + "' has the wrong dimension");
        else if (hermiticity_violation(o.op) > 1e-12)
            errors.push_back("observable '" + o.name + "' is not Hermitian");
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

std::vector<double> expectation_series(const CMatrix& states, const CMatrix& op) {
    std::vector<double> out(static_cast<std::size_t>(states.cols()));
    for (Eigen::Index t = 0; t < states.cols(); ++t)
        out[static_cast<std::size_t>(t)] = states.col(t).dot(op * states.col(t)).real();
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EnsembleResult run_ensemble(const EnsembleConfig& config, const ModelSpec& model, const BathSpec& bath,
                            const std::vector<NamedObservable>& observables) {
    config.validate();
    model.validate();
    bath.validate();
    check_observables(observables, model.dim());

    std::optional<DephasingModel> deph;
    if (config.engine == Engine::dephasing) deph = DephasingModel::from_model(model);

    TrajectoryOptions topt;
    topt.max_order = config.max_order;
    topt.dt = config.dt;
    topt.rescale = config.rescale;

    auto run_sample = [&](std::size_t index) -> CMatrix {
        const TrajectoryLabels labels =
            draw_trajectory_labels(bath, config.thermal, config.seed, index, config.z_max);
        if (deph) return dephasing_trajectory(*deph, bath, labels, config.grid, config.dt);
        return propagate_trajectory(model, bath, labels, config.grid, topt).states;
    };

    const std::size_t nt = config.grid.size();
    const Eigen::Index d = model.dim();
    EnsembleResult result;
    result.times = config.grid.points();
    std::vector<CMatrix> sum(nt, CMatrix::Zero(d, d));
    std::vector<SeriesAccumulator> acc(observables.size(), SeriesAccumulator(nt));

    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    const std::size_t total = config.trajectories;
    const std::size_t chunk = std::max<std::size_t>(64, 16 * threads);
    std::size_t next_checkpoint = 0;

    auto snapshot = [&](std::size_t samples) {
        EnsembleSnapshot snap{samples, result.completed, {}};
        snap.rho.reserve(nt);
        for (const auto& s : sum) snap.rho.push_back(result.completed ? CMatrix(s / double(result.completed)) : s);
        result.snapshots.push_back(std::move(snap));
    };

    std::vector<std::optional<CMatrix>> slots;
    for (std::size_t begin = 0; begin < total; begin += chunk) {
        const std::size_t end = std::min(total, begin + chunk);
        slots.assign(end - begin, std::nullopt);
        std::atomic<std::size_t> cursor{begin};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= end) return;
                try {
                    slots[i - begin] = run_sample(i);
                } catch (const NumericalError& e) {
                    spdlog::warn("trajectory {} aborted: {}", i, e.what());
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    cursor.store(end);
                }
            }
        };
        const unsigned n_workers = static_cast<unsigned>(std::min<std::size_t>(threads, end - begin));
        if (n_workers <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(n_workers);
            for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        }
        if (failure) std::rethrow_exception(failure);

        // Ordered reduction.
        for (std::size_t i = begin; i < end; ++i) {
            auto& slot = slots[i - begin];
            if (slot) {
                const CMatrix& states = *slot;
                for (std::size_t t = 0; t < nt; ++t) {
                    const auto col = states.col(static_cast<Eigen::Index>(t));
                    sum[t].noalias() += col * col.adjoint();
                }
                for (std::size_t o = 0; o < observables.size(); ++o)
                    acc[o].add(expectation_series(states, observables[o].op));
                ++result.completed;
                if (config.keep_states) result.states.push_back(std::move(*slot));
            } else {
                ++result.aborted;
                result.aborted_samples.push_back(i);
            }
            while (next_checkpoint < config.checkpoints.size() && config.checkpoints[next_checkpoint] == i + 1) {
                snapshot(i + 1);
                ++next_checkpoint;
            }
        }
    }

    if (static_cast<double>(result.aborted) > config.max_abort_fraction * static_cast<double>(total) ||
        result.completed == 0) {
        throw NumericalError(std::to_string(result.aborted) + " of " + std::to_string(total) +
                             " trajectories aborted (limit " + std::to_string(config.max_abort_fraction) + ")");
    }
    result.rho.reserve(nt);
    for (const auto& s : sum) result.rho.push_back(s / static_cast<double>(result.completed));
    for (std::size_t o = 0; o < observables.size(); ++o) result.observables.push_back(acc[o].result(observables[o].name));
    return result;
}

double hs_distance(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("hs_distance: shape mismatch");
    return (a - b).norm();
}

ObservableSeries observable_series(const EnsembleResult& result, const CMatrix& op, std::string name) {
    if (result.states.empty() && result.completed > 0)
        throw std::logic_error("observable_series requires an ensemble run with keep_states");
    if (hermiticity_violation(op) > 1e-12) throw ConfigError("observable '" + name + "' is not Hermitian");
    SeriesAccumulator acc(result.times.size());
    for (const auto& s : result.states) {
        if (s.rows() != op.rows()) throw ConfigError("observable '" + name + "' has the wrong dimension");
        acc.add(expectation_series(s, op));
    }
    return acc.result(std::move(name));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

ConvergenceReport convergence_study(EnsembleConfig config, const ModelSpec& model, const BathSpec& bath,
                                    std::vector<std::size_t> counts, const std::vector<CMatrix>& reference,
                                    const std::vector<NamedObservable>& observables) {
    if (counts.empty()) throw ConfigError("convergence: sample count list is empty");
    for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] <= counts[i - 1]) throw ConfigError("convergence: sample counts must be strictly increasing");
    if (reference.size() != config.grid.size())
        throw ConfigError("convergence: reference is not on the output grid");
    config.trajectories = counts.back();
    config.checkpoints = counts;
    const EnsembleResult res = run_ensemble(config, model, bath, observables);

    ConvergenceReport report;
    report.sample_counts = counts;
    report.observables = res.observables;
    for (const auto& snap : res.snapshots) {
        std::vector<double> dist(reference.size());
        for (std::size_t t = 0; t < reference.size(); ++t) dist[t] = hs_distance(snap.rho[t], reference[t]);
        report.median_distance.push_back(median_of(std::vector<double>(dist.begin() + 1, dist.end())));
        report.final_distance.push_back(dist.back());
        report.distances.push_back(std::move(dist));
    }
    if (counts.size() >= 2) {
        std::vector<double> xs(counts.begin(), counts.end());
        const auto positive = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double d) { return d > 0.0; });
        };
        if (positive(report.median_distance)) report.median_slope = loglog_slope(xs, report.median_distance);
        if (positive(report.final_distance)) report.final_slope = loglog_slope(xs, report.final_distance);
    }
    return report;
}

}  // namespace spinqsd
