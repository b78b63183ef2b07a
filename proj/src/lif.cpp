#include "patdet/lif.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "patdet/rng.hpp"

namespace patdet {

void LifConfig::validate() const {
    if (!(tau_ms > 0.0)) throw std::invalid_argument("LifConfig: tau_ms must be positive");
    if (!(dt_bin_ms > 0.0)) throw std::invalid_argument("LifConfig: dt_bin_ms must be positive");
    if (!(dt_bin_ms <= tau_ms / 10.0))
        throw std::invalid_argument("LifConfig: dt_bin_ms must be <= tau_ms / 10");
    if (threshold && !(*threshold > 0.0))
        throw std::invalid_argument("LifConfig: threshold must be positive when set");
}

bool lif_step(LifState& state, const LifConfig& config, std::span<const Spike> spikes_in_bin) {
    state.potential *= config.decay_factor();
    for (const Spike& s : spikes_in_bin) state.potential += state.weights[s.afferent];
    state.time_ms += config.dt_bin_ms;
    if (config.threshold && state.potential >= *config.threshold) {
        state.potential = config.reset_potential;
        return true;
    }
    return false;
}

std::vector<std::uint8_t> select_afferents(const FrozenPattern& pattern, std::uint32_t strategy,
                                           double window_start_ms, double window_ms) {
    if (strategy < 1) throw std::invalid_argument("select_afferents: strategy must be >= 1");
    if (window_start_ms < 0.0 || window_start_ms + window_ms > pattern.duration_ms + 1e-9)
        throw std::invalid_argument("select_afferents: window must lie inside the pattern");

    std::vector<std::uint32_t> counts(pattern.n_afferents, 0);
    const double window_end = window_start_ms + window_ms;
    for (const Spike& s : pattern.spikes) {
        if (s.time_ms >= window_start_ms && s.time_ms <= window_end) ++counts[s.afferent];
    }
    std::vector<std::uint8_t> weights(pattern.n_afferents, 0);
    for (std::uint32_t i = 0; i < pattern.n_afferents; ++i)
        weights[i] = counts[i] >= strategy ? 1 : 0;
    return weights;
}

namespace {

// Keeps only the spikes of afferents selected by the binary weight vector.
void filter_selected(std::vector<Spike>& spikes, const std::vector<std::uint8_t>& weights) {
    std::erase_if(spikes, [&](const Spike& s) { return weights[s.afferent] == 0; });
}

} // namespace

SnrMeasurement measure_snr(const FrozenPattern& pattern, const std::vector<std::uint8_t>& weights,
                           const LifConfig& config, const SnrProtocol& protocol,
                           TraceSink* sink) {
    config.validate();
    protocol.noise.validate();
    protocol.jitter.validate();
    if (config.threshold)
        throw std::invalid_argument("measure_snr: requires a threshold-free configuration");
    if (weights.size() != pattern.n_afferents || protocol.noise.n_afferents != pattern.n_afferents)
        throw std::invalid_argument("measure_snr: afferent count mismatch");
    for (const auto w : weights)
        if (w > 1) throw std::invalid_argument("measure_snr: weights must be binary");
    if (protocol.n_presentations == 0)
        throw std::runtime_error("measure_snr: no presentations, peak potential undefined");

    const double period = protocol.period_ms;
    const double len = pattern.duration_ms;
    const double half_jitter = protocol.jitter.half_width_ms;
    const double tau = config.tau_ms;
    const double dt = config.dt_bin_ms;
    if (!(period >= len + 2.0 * half_jitter))
        throw std::invalid_argument("measure_snr: period shorter than the jittered pattern");
    if (len + 2.0 * half_jitter + 3.0 * tau > period)
        throw std::runtime_error("measure_snr: period too short for disjoint peak windows");

    const bool any_selected = std::any_of(weights.begin(), weights.end(),
                                          [](std::uint8_t w) { return w != 0; });
    if (!any_selected)
        throw std::runtime_error("measure_snr: all-zero weights give a zero-variance potential");

    const double peak_end = len + half_jitter + 3.0 * tau;   // window after onset
    const double noise_lo = len + half_jitter + 5.0 * tau;   // admissible noise band
    const double noise_hi = period - half_jitter - 5.0 * tau;

    const std::int64_t bins_per_segment = std::llround(period / dt);
    const std::uint64_t n_segments = protocol.n_presentations;

    std::vector<double> peaks(n_segments, -std::numeric_limits<double>::infinity());
    double noise_sum = 0.0, noise_sumsq = 0.0;
    std::uint64_t noise_bins = 0;
    double delivered = 0.0;

    // Presentation k's jittered spikes can precede its onset by up to T, so
    // the following presentation is generated one segment ahead and split at
    // the segment boundary.
    std::vector<Spike> pending = jittered_presentation(pattern, protocol.jitter, 0, 0.0);
    filter_selected(pending, weights);
    std::erase_if(pending, [](const Spike& s) { return s.time_ms < 0.0; });

    std::vector<Spike> events, next_pending;
    double potential = 0.0;

    for (std::uint64_t k = 0; k < n_segments; ++k) {
        const double seg_begin = static_cast<double>(k) * period;
        const double seg_end = seg_begin + period;

        events.swap(pending);
        pending.clear();
        for (std::uint32_t i = 0; i < pattern.n_afferents; ++i) {
            if (!weights[i]) continue;
            append_poisson_train(events, i, protocol.noise.rate_hz,
                                 derive_seed(protocol.noise.seed, seed_tag::poisson_train, i, k),
                                 seg_begin + len, seg_end);
        }
        if (k + 1 < n_segments) {
            next_pending = jittered_presentation(pattern, protocol.jitter, k + 1, seg_end);
            filter_selected(next_pending, weights);
            for (const Spike& s : next_pending) {
                if (s.time_ms < seg_end) events.push_back(s);
                else pending.push_back(s);
            }
            next_pending.clear();
        }
        // Bin each event relative to the segment origin; boundary rounding
        // can push an event one bin outside, so clamp.
        std::vector<std::pair<std::int64_t, std::uint32_t>> binned;
        binned.reserve(events.size());
        for (const Spike& s : events) {
            auto bin = static_cast<std::int64_t>(std::floor((s.time_ms - seg_begin) / dt));
            bin = std::clamp<std::int64_t>(bin, 0, bins_per_segment - 1);
            binned.emplace_back(bin, s.afferent);
        }
        std::sort(binned.begin(), binned.end());

        std::size_t ev = 0;
        for (std::int64_t j = 0; j < bins_per_segment; ++j) {
            potential *= config.decay_factor();
            while (ev < binned.size() && binned[ev].first == j) {
                potential += 1.0;
                delivered += 1.0;
                ++ev;
            }
            const double pos = static_cast<double>(j) * dt;
            if (pos <= peak_end) peaks[k] = std::max(peaks[k], potential);
            if (k + 1 < n_segments && pos >= period - half_jitter)
                peaks[k + 1] = std::max(peaks[k + 1], potential);
            if (pos >= noise_lo && pos <= noise_hi) {
                noise_sum += potential;
                noise_sumsq += potential * potential;
                ++noise_bins;
            }
            if (sink && sink->potential) sink->potential->push_back(static_cast<float>(potential));
        }
        events.clear();
    }

    if (noise_bins < 10000)
        throw std::runtime_error("measure_snr: fewer than 10^4 noise bins; widen the period "
                                 "or add presentations");

    SnrMeasurement m;
    m.n_presentations = protocol.n_presentations;
    m.n_noise_bins = noise_bins;
    m.delivered_weight_total = delivered;
    m.v_noise_mean = noise_sum / static_cast<double>(noise_bins);
    const double var =
        std::max(0.0, noise_sumsq / static_cast<double>(noise_bins) - m.v_noise_mean * m.v_noise_mean);
    m.v_noise_std = std::sqrt(var);
    if (!(m.v_noise_std > 0.0))
        throw std::runtime_error("measure_snr: zero noise variance, SNR undefined");

    double peak_sum = 0.0;
    for (double p : peaks) peak_sum += p;
    m.v_max_mean = peak_sum / static_cast<double>(peaks.size());
    m.snr = (m.v_max_mean - m.v_noise_mean) / m.v_noise_std;

    if (sink && sink->presentation_peaks) *sink->presentation_peaks = peaks;
    return m;
}

} // namespace patdet
