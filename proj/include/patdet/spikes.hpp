#pragma once

#include <cstdint>
#include <vector>

namespace patdet {

/// One spike: which afferent fired and when (milliseconds).
struct Spike {
    std::uint32_t afferent;
    double time_ms;

    friend bool operator==(const Spike&, const Spike&) = default;
};

/// Homogeneous Poisson population: every afferent fires independently at the
/// same rate. The seed is the master seed; each afferent draws from its own
/// substream, so afferent i's train does not change when n_afferents does.
struct PoissonConfig {
    std::uint32_t n_afferents = 1;
    double rate_hz = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// A fixed realization of the Poisson process over [0, duration_ms): the
/// repeating pattern. Spikes are sorted by time, indices < n_afferents.
struct FrozenPattern {
    std::uint32_t n_afferents = 0;
    double duration_ms = 0.0;
    std::vector<Spike> spikes;
};

/// Per-presentation uniform time displacement in [-half_width, +half_width].
struct JitterConfig {
    double half_width_ms = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Full input: Poisson noise interleaved with jittered pattern presentations.
/// Presentation k starts at k * period. Jittered spikes may fall slightly
/// outside their presentation window (including before t = 0 for k = 0);
/// they are kept as generated.
struct InputStream {
    double total_duration_ms = 0.0;
    std::vector<double> pattern_onsets_ms;
    std::vector<Spike> spikes; // non-decreasing in time
};

/// Sorts by (time, afferent); a total order, so output bytes are reproducible.
void sort_spikes(std::vector<Spike>& spikes);

/// Poisson spike trains for all afferents over [0, duration_ms), time-sorted.
/// Exact exponential inter-spike intervals; nothing is snapped to a grid here.
std::vector<Spike> generate_poisson(const PoissonConfig& config, double duration_ms);

/// One frozen realization of the process ("the pattern").
FrozenPattern freeze_pattern(const PoissonConfig& config, double duration_ms);

/// Appends one afferent's Poisson train on [t_begin, t_end) using the given
/// substream seed. Building block shared by generate_poisson and the
/// segment-wise stream assembly in the simulators.
void append_poisson_train(std::vector<Spike>& out, std::uint32_t afferent, double rate_hz,
                          std::uint64_t stream_seed, double t_begin, double t_end);

/// The pattern with every spike independently displaced by U[-T, T].
/// Spike count is preserved; output re-sorted; times may leave [0, L).
std::vector<Spike> jitter_pattern(const FrozenPattern& pattern, const JitterConfig& jitter);

/// Jittered copy of the pattern for presentation `index`, shifted to start at
/// `onset_ms`. Each presentation uses a fresh jitter substream.
std::vector<Spike> jittered_presentation(const FrozenPattern& pattern, const JitterConfig& jitter,
                                         std::uint64_t index, double onset_ms);

/// Noise + presentations every `period_ms`, total duration n * period
/// (one noise period when n = 0). Noise afferents fire at their Poisson rate
/// strictly outside the presentation windows [k*period, k*period + L).
InputStream build_stream(const FrozenPattern& pattern, const PoissonConfig& noise,
                         const JitterConfig& jitter, double period_ms,
                         std::uint64_t n_presentations);

namespace seed_tag {
inline constexpr std::uint64_t poisson_train = 1; // (afferent, segment)
inline constexpr std::uint64_t jitter = 2;        // (presentation)
} // namespace seed_tag

} // namespace patdet
