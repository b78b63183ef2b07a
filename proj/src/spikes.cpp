#include "patdet/spikes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "patdet/rng.hpp"

namespace patdet {

void PoissonConfig::validate() const {
    if (n_afferents < 1) throw std::invalid_argument("PoissonConfig: n_afferents must be >= 1");
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
        throw std::invalid_argument("PoissonConfig: rate_hz must be positive");
}

void JitterConfig::validate() const {
    if (!(half_width_ms >= 0.0) || !std::isfinite(half_width_ms))
        throw std::invalid_argument("JitterConfig: half_width_ms must be >= 0");
}

void sort_spikes(std::vector<Spike>& spikes) {
    std::sort(spikes.begin(), spikes.end(), [](const Spike& a, const Spike& b) {
        if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
        return a.afferent < b.afferent;
    });
}

void append_poisson_train(std::vector<Spike>& out, std::uint32_t afferent, double rate_hz,
                          std::uint64_t stream_seed, double t_begin, double t_end) {
    const double rate_per_ms = rate_hz / 1000.0;
    Rng rng(stream_seed);
    double t = t_begin + rng.exponential(rate_per_ms);
    while (t < t_end) {
        out.push_back({afferent, t});
        t += rng.exponential(rate_per_ms);
    }
}

std::vector<Spike> generate_poisson(const PoissonConfig& config, double duration_ms) {
    config.validate();
    if (!(duration_ms > 0.0) || !std::isfinite(duration_ms))
        throw std::invalid_argument("generate_poisson: duration_ms must be positive");

    std::vector<Spike> spikes;
    spikes.reserve(static_cast<std::size_t>(
        config.n_afferents * config.rate_hz * duration_ms / 1000.0 * 1.1) + 16);
    for (std::uint32_t i = 0; i < config.n_afferents; ++i) {
        append_poisson_train(spikes, i, config.rate_hz,
                             derive_seed(config.seed, seed_tag::poisson_train, i, 0), 0.0,
                             duration_ms);
    }
    sort_spikes(spikes);
    return spikes;
}

FrozenPattern freeze_pattern(const PoissonConfig& config, double duration_ms) {
    return FrozenPattern{config.n_afferents, duration_ms, generate_poisson(config, duration_ms)};
}

namespace {

std::vector<Spike> jitter_spikes(const std::vector<Spike>& spikes, double half_width_ms,
                                 std::uint64_t stream_seed, double shift_ms) {
    std::vector<Spike> out;
    out.reserve(spikes.size());
    Rng rng(stream_seed);
    for (const Spike& s : spikes) {
        const double lag =
            half_width_ms > 0.0 ? rng.uniform(-half_width_ms, half_width_ms) : 0.0;
        out.push_back({s.afferent, s.time_ms + lag + shift_ms});
    }
    sort_spikes(out);
    return out;
}

} // namespace

std::vector<Spike> jitter_pattern(const FrozenPattern& pattern, const JitterConfig& jitter) {
    jitter.validate();
    return jitter_spikes(pattern.spikes, jitter.half_width_ms,
                         derive_seed(jitter.seed, seed_tag::jitter, 0), 0.0);
}

std::vector<Spike> jittered_presentation(const FrozenPattern& pattern, const JitterConfig& jitter,
                                         std::uint64_t index, double onset_ms) {
    jitter.validate();
    return jitter_spikes(pattern.spikes, jitter.half_width_ms,
                         derive_seed(jitter.seed, seed_tag::jitter, index), onset_ms);
}

InputStream build_stream(const FrozenPattern& pattern, const PoissonConfig& noise,
                         const JitterConfig& jitter, double period_ms,
                         std::uint64_t n_presentations) {
    noise.validate();
    jitter.validate();
    if (noise.n_afferents != pattern.n_afferents)
        throw std::invalid_argument("build_stream: noise and pattern afferent counts differ");
    if (!(period_ms >= pattern.duration_ms + 2.0 * jitter.half_width_ms))
        throw std::invalid_argument(
            "build_stream: period must be >= pattern duration + 2 * jitter half-width");

    InputStream stream;
    const std::uint64_t n_segments = std::max<std::uint64_t>(n_presentations, 1);
    stream.total_duration_ms = static_cast<double>(n_segments) * period_ms;
    stream.pattern_onsets_ms.reserve(n_presentations);

    const double expected =
        noise.n_afferents * noise.rate_hz * stream.total_duration_ms / 1000.0;
    stream.spikes.reserve(static_cast<std::size_t>(expected * 1.1) + 64);

    for (std::uint64_t k = 0; k < n_segments; ++k) {
        const double seg_begin = static_cast<double>(k) * period_ms;
        const double seg_end = seg_begin + period_ms;
        // Noise only on the complement of the presentation window. Starting
        // the exponential walk at the window end is exact: the process is
        // memoryless, and disjoint segments use independent substreams.
        const double noise_begin =
            k < n_presentations ? seg_begin + pattern.duration_ms : seg_begin;
        for (std::uint32_t i = 0; i < noise.n_afferents; ++i) {
            append_poisson_train(stream.spikes, i, noise.rate_hz,
                                 derive_seed(noise.seed, seed_tag::poisson_train, i, k),
                                 noise_begin, seg_end);
        }
        if (k < n_presentations) {
            stream.pattern_onsets_ms.push_back(seg_begin);
            auto presented = jittered_presentation(pattern, jitter, k, seg_begin);
            stream.spikes.insert(stream.spikes.end(), presented.begin(), presented.end());
        }
    }
    sort_spikes(stream.spikes);
    return stream;
}

} // namespace patdet
