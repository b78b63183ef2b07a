#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "patdet/lif.hpp"
#include "patdet/spikes.hpp"

namespace patdet {

/// Potentiation-only additive STDP: each presynaptic spike bumps that
/// synapse's trace by trace_increment; at each postsynaptic spike every
/// weight receives its trace plus the (negative) homeostatic term, then is
/// clipped into [0, 1]. Depression is purely rate-based through the
/// homeostatic term.
struct StdpConfig {
    double trace_increment = 0.01;
    double trace_tau_ms = 20.0;
    double homeostatic_term = -1.6e-3; // w_out, must be negative
    double threshold = 250.0;          // LIF threshold in summed-weight units
    double initial_weight = 0.5;       // uniform starting point, in [0, 1]

    void validate() const;
};

/// Input protocol for a learning run: background noise, per-presentation
/// jitter and the presentation period.
struct LearnProtocol {
    PoissonConfig noise;
    JitterConfig jitter;
    double period_ms = 400.0;
};

struct MatchedWindow {
    double start_ms = 0.0;
    double duration_ms = 0.0;
};

struct LearningOutcome {
    std::vector<double> final_weights;
    bool binarized = false; // < 1% of weights left in (0.05, 0.95)
    std::vector<std::uint32_t> reinforced_set; // afferents with w > 0.95
    std::optional<MatchedWindow> matched_window;
    double post_spikes_per_presentation = 0.0; // median over the last 50 presentations
    bool is_optimal = false;
    int mode = 0; // 1 or 2 postsynaptic spikes per presentation; 0 = neither
    bool divergent = false; // tripped the runaway-firing guard
    std::vector<double> post_spike_times_ms;
    double min_weight_seen = 1.0; // extrema immediately after any update
    double max_weight_seen = 0.0;
    std::uint64_t n_presentations = 0;
};

using WeightSnapshotFn =
    std::function<void(std::uint64_t presentation, const std::vector<double>& weights)>;

/// Simulates the full noise + presentations stream with threshold, reset and
/// plastic weights. `lif.threshold` must be unset; the threshold comes from
/// the STDP configuration. Runs sustaining more than 500 postsynaptic spikes
/// per second are flagged divergent and stopped early. The outcome's
/// is_optimal / matched_window fields are left for classify_optimality.
LearningOutcome run_learning(const FrozenPattern& pattern, const LearnProtocol& protocol,
                             const LifConfig& lif, const StdpConfig& stdp,
                             std::uint64_t n_presentations = 500,
                             std::uint64_t snapshot_every = 0,
                             const WeightSnapshotFn& on_snapshot = {});

/// Uniform initial weight w0 solving  tau*f*N*w0 = theta + 2 * w0 * sqrt(tau*f*N/2),
/// i.e. the noise-driven mean potential starts two standard deviations above
/// threshold. Throws when no solution lies in (0, 1].
double initial_weight_for(double threshold, const LifConfig& lif, std::uint32_t n_afferents,
                          double rate_hz);

struct OptimalityCall {
    bool is_optimal = false;
    std::optional<MatchedWindow> window;
};

/// A converged run is optimal when the reinforced afferents are exactly the
/// set that fires at least once inside some pattern window whose duration
/// matches the optimal window within the margin. Window starts are scanned
/// at 0.1 ms; the margin applies to the duration only, set equality is
/// exact. Throws unless the outcome is binarized.
OptimalityCall classify_optimality(const LearningOutcome& outcome, const FrozenPattern& pattern,
                                   double optimal_window_ms, double margin = 0.1);

/// Externals shared by every run of a theta x w_out sweep.
struct StdpExternals {
    std::uint32_t n_afferents = 10000;
    double rate_hz = 3.2;
    double jitter_half_width_ms = 3.2;
    double tau_ms = 18.0;
    double dt_bin_ms = 0.1;
    double pattern_ms = 100.0;
    double period_ms = 400.0;
    double trace_increment = 0.01;
    double trace_tau_ms = 20.0;
    std::uint64_t n_presentations = 500;
    double optimal_window_ms = 23.0;
    double margin = 0.1;
    std::uint64_t seed = 1;
    unsigned jobs = 0;
};

struct RunSummary {
    bool optimal = false;
    bool binarized = false;
    bool divergent = false;
    double post_spikes_per_presentation = 0.0;
    int mode = 0;
};

struct CellOutcome {
    double theta = 0.0;
    double w_out = 0.0;
    std::vector<RunSummary> runs;
    double p = 0.0; // fraction of optimal runs
    std::uint32_t n_divergent = 0;
    int mode = 0; // from the median spikes/presentation over converged runs
    double median_spikes = 0.0;
};

/// n_runs learning runs at one (theta, w_out) cell. Run r uses pattern and
/// stream substreams keyed by r alone, so different cells see identical
/// inputs and differ only in their parameters.
CellOutcome run_mode_cell(double theta, double w_out, std::uint64_t n_runs,
                          const StdpExternals& externals);

struct ModeSweepResult {
    std::vector<double> theta_grid;
    std::vector<double> w_out_grid; // negative values
    std::vector<CellOutcome> cells; // cells[i * w_out_grid.size() + j]

    const CellOutcome& cell(std::size_t ti, std::size_t wj) const {
        return cells[ti * w_out_grid.size() + wj];
    }
};

/// Full grid sweep; cells and runs execute in parallel, aggregation is
/// order-independent.
ModeSweepResult sweep_modes(const std::vector<double>& theta_grid,
                            const std::vector<double>& w_out_grid, std::uint64_t n_runs,
                            const StdpExternals& externals);

/// Geometric grid with the given ratio, from lo up to at most hi (inclusive
/// within one part in 10^9).
std::vector<double> geometric_grid(double lo, double hi, double ratio);

std::string to_json(const LearningOutcome& outcome);
void write_mode_sweep_csv(std::ostream& os, const ModeSweepResult& sweep);

} // namespace patdet
