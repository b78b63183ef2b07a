#pragma once

#include <cstdint>
#include <string>

namespace patdet {

/// Detector parameterization. N, f and T describe the input (externals);
/// strategy n, membrane time constant tau and selection window describe the
/// detector itself. The detector is wired to the afferents that fire at
/// least `strategy` spikes inside a window of length `window_ms`.
struct DetectorParams {
    std::uint32_t n_afferents = 1;   // N
    double rate_hz = 1.0;            // f
    double jitter_half_width_ms = 0; // T
    std::uint32_t strategy = 1;      // n (>= 1)
    double tau_ms = 1.0;             // membrane time constant
    double window_ms = 1.0;          // selection window

    /// Expected spike count of one afferent inside the window.
    double mean_window_count() const { return rate_hz * window_ms / 1000.0; }

    void validate() const;
};

/// The dimensionless effective input current produced by uniformly jittering
/// a rectangular window: a trapezoid that rises over t1, holds h over t2 and
/// falls over t3. Jitter redistributes spikes without adding or removing
/// any, so the area always equals the window length.
struct TrapezoidCurrent {
    double t1_ms = 0.0;
    double t2_ms = 0.0;
    double t3_ms = 0.0;
    double plateau = 1.0; // h

    double duration_ms() const { return t1_ms + t2_ms + t3_ms; }
    double area_ms() const { return 0.5 * plateau * (t1_ms + t3_ms) + plateau * t2_ms; }

    /// Current at time t (t = 0 at the start of the rise).
    double value_at(double t_ms) const;
};

/// Peak of the reduced (low-pass filtered) response to the trapezoid.
/// v is normalized so that 0 is the noise level and 1 the plateau steady
/// state; times are relative to the start of the rise.
struct TransientPeak {
    double v1 = 0.0;     // v at the end of the rise
    double v2 = 0.0;     // v at the end of the plateau
    double t_max_ms = 0; // where the peak occurs
    double v_max = 0.0;  // in [0, 1]
};

/// Everything the closed-form SNR evaluation produces, kept together so runs
/// can be snapshotted and compared.
struct AnalyticReport {
    double lambda = 0.0;          // expected in-window count per afferent
    double selected_count = 0.0;  // M, expected number of wired afferents
    double effective_rate_hz = 0; // r, input rate during the window
    double v1 = 0.0;
    double v2 = 0.0;
    double t_max_ms = 0.0;
    double v_max = 0.0;
    double noise_mean = 0.0; // mean potential under noise, unitary weights
    double noise_std = 0.0;
    double snr = 0.0;
};

/// P[Poisson(lambda) >= n], summed forward from the n-th term so small tails
/// come out accurate instead of cancelling.
double poisson_tail(double lambda, std::uint32_t n);

/// P[Poisson(lambda) = n].
double poisson_pmf(double lambda, std::uint32_t n);

/// Expected number of afferents with at least `strategy` spikes in the window.
double selected_count(const DetectorParams& params);

/// Expected input spike rate (Hz) through the selected afferents during the
/// window. Selection discards the least active afferents, so this is at
/// least rate * selected_count.
double effective_rate(const DetectorParams& params);

/// Geometry of the jittered-window current.
TrapezoidCurrent trapezoid(double window_ms, double jitter_half_width_ms);

/// Closed-form peak of the filtered trapezoid response.
TransientPeak transient_peak(const DetectorParams& params);

/// Full closed-form SNR: (peak - noise mean) / noise std, with all
/// intermediate quantities reported.
AnalyticReport snr_report(const DetectorParams& params);

/// JSON rendering of the report (regression snapshots).
std::string to_json(const AnalyticReport& report);

} // namespace patdet
