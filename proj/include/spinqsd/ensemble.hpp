#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinqsd/bath.hpp"
#include "spinqsd/hierarchy.hpp"
#include "spinqsd/model.hpp"

namespace spinqsd {

enum class Engine { hierarchy, dephasing };

const char* to_string(Engine e);
Engine engine_from_string(const std::string& name);

struct EnsembleConfig {
    std::size_t trajectories = 1;
    std::uint64_t seed = 0;
    int max_order = 2;
    double dt = 1e-2;
    TimeGrid grid = TimeGrid::uniform(1.0, 2);
    ThermalSpec thermal{};
    Engine engine = Engine::hierarchy;
    bool rescale = true;
    /// The run fails when more than this fraction of trajectories abort.
    double max_abort_fraction = 1e-3;
    /// Worker threads; 0 selects the hardware concurrency.
    unsigned threads = 0;
    double z_max = kDefaultZMax;
    /// Sample counts at which the running estimate of rho is snapshotted (nested prefixes).
    std::vector<std::size_t> checkpoints;
    /// Retain every normalized trajectory (dim x times per sample).
    bool keep_states = false;

    void validate() const;
};

struct NamedObservable {
    std::string name;
    CMatrix op;
};

/// Mean of <psi|O|psi> over trajectories with the sample standard error
/// (absent for fewer than two samples).
struct ObservableSeries {
    std::string name;
    std::vector<double> mean;
    std::vector<std::optional<double>> std_error;
};

/// Streaming mean/variance (Welford) of a real time series.
class SeriesAccumulator {
public:
    explicit SeriesAccumulator(std::size_t length) : mean_(length, 0.0), m2_(length, 0.0) {}

    void add(const std::vector<double>& values);
    std::size_t count() const noexcept { return count_; }
    ObservableSeries result(std::string name) const;

private:
    std::size_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

struct EnsembleSnapshot {
    std::size_t samples = 0;    ///< prefix length in sample indices
    std::size_t completed = 0;  ///< trajectories averaged within the prefix
    std::vector<CMatrix> rho;
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<CMatrix> rho;
    std::vector<ObservableSeries> observables;
    std::size_t completed = 0;
    std::size_t aborted = 0;
    std::vector<std::size_t> aborted_samples;
    std::vector<EnsembleSnapshot> snapshots;
    std::vector<CMatrix> states;  ///< per completed sample, when keep_states
};

/// Monte Carlo average of normalized trajectories. Samples are independent streams derived
/// from (seed, index); the reduction runs in ascending sample order, so results do not depend
/// on the number of threads.
EnsembleResult run_ensemble(const EnsembleConfig& config, const ModelSpec& model, const BathSpec& bath,
                            const std::vector<NamedObservable>& observables = {});

/// sqrt(tr[(a - b)^2]) for Hermitian a, b.
double hs_distance(const CMatrix& a, const CMatrix& b);

/// Observable series from retained trajectories (requires keep_states).
ObservableSeries observable_series(const EnsembleResult& result, const CMatrix& op, std::string name = "O");

struct ConvergenceReport {
    std::vector<std::size_t> sample_counts;
    std::vector<std::vector<double>> distances;  ///< [count][time]
    std::vector<double> median_distance;         ///< median over t > 0
    std::vector<double> final_distance;
    std::optional<double> median_slope;  ///< log-log slope, absent for a single count
    std::optional<double> final_slope;
    std::vector<ObservableSeries> observables;  ///< at the largest count
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// HS distance to `reference` for nested prefixes of one ensemble of max(counts) samples.
ConvergenceReport convergence_study(EnsembleConfig config, const ModelSpec& model, const BathSpec& bath,
                                    std::vector<std::size_t> counts, const std::vector<CMatrix>& reference,
                                    const std::vector<NamedObservable>& observables = {});

}  // namespace spinqsd
