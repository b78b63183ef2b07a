#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "patdet/spikes.hpp"

namespace patdet {

/// Clock-based LIF with instantaneous synapses: per bin the potential decays
/// by (1 - dt/tau), then every spike delivered in the bin adds its synaptic
/// weight, then (if a threshold is set) the neuron fires and resets. Without
/// a threshold the potential is left free, which is what the SNR measurement
/// uses.
struct LifConfig {
    double tau_ms = 18.0;
    double dt_bin_ms = 0.1;
    std::optional<double> threshold; // absent = threshold-free
    double reset_potential = 0.0;

    double decay_factor() const { return 1.0 - dt_bin_ms / tau_ms; }

    void validate() const;
};

struct LifState {
    double potential = 0.0;
    std::vector<double> weights; // one per afferent, each in [0, 1]
    double time_ms = 0.0;
};

/// Advances one bin: decay, deliver `spikes_in_bin` through the weights,
/// threshold test. Returns true when a postsynaptic spike was emitted.
bool lif_step(LifState& state, const LifConfig& config, std::span<const Spike> spikes_in_bin);

/// Binary detector wiring: weight 1 for every afferent with at least
/// `strategy` spikes in [window_start, window_start + window), 0 otherwise.
std::vector<std::uint8_t> select_afferents(const FrozenPattern& pattern, std::uint32_t strategy,
                                           double window_start_ms, double window_ms);

/// Presentation protocol plus the stochastic inputs for an SNR measurement.
struct SnrProtocol {
    std::uint64_t n_presentations = 1000;
    double period_ms = 400.0;
    PoissonConfig noise;  // rates/seeds of the background activity
    JitterConfig jitter;  // per-presentation pattern jitter
};

struct SnrMeasurement {
    double v_max_mean = 0.0;   // mean over presentations of the per-presentation peak
    double v_noise_mean = 0.0; // bins far away from any presentation
    double v_noise_std = 0.0;
    double snr = 0.0;
    std::uint64_t n_presentations = 0;
    std::uint64_t n_noise_bins = 0;
    double delivered_weight_total = 0.0; // sum of all potential jumps
};

/// Optional dump targets for a measurement run.
struct TraceSink {
    std::vector<float>* potential = nullptr;           // V at every bin
    std::vector<double>* presentation_peaks = nullptr; // per-presentation max
};

/// Threshold-free run of the full noise + presentations stream through the
/// given binary weights. The per-presentation peak is taken over
/// [onset - T, onset + L + T + 3*tau]; noise statistics use only bins at
/// least 5*tau away from every presentation window. Throws when the
/// measurement is degenerate (no presentations, all-zero weights, or fewer
/// than 10^4 admissible noise bins).
SnrMeasurement measure_snr(const FrozenPattern& pattern, const std::vector<std::uint8_t>& weights,
                           const LifConfig& config, const SnrProtocol& protocol,
                           TraceSink* sink = nullptr);

} // namespace patdet
