#include "patdet/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace patdet {

void DetectorParams::validate() const {
    if (n_afferents < 1) throw std::invalid_argument("DetectorParams: n_afferents must be >= 1");
    if (!(rate_hz > 0.0)) throw std::invalid_argument("DetectorParams: rate_hz must be positive");
    if (!(jitter_half_width_ms >= 0.0))
        throw std::invalid_argument("DetectorParams: jitter_half_width_ms must be >= 0");
    if (strategy < 1) throw std::invalid_argument("DetectorParams: strategy must be >= 1");
    if (!(tau_ms > 0.0)) throw std::invalid_argument("DetectorParams: tau_ms must be positive");
    if (!(window_ms > 0.0))
        throw std::invalid_argument("DetectorParams: window_ms must be positive");
}

double poisson_pmf(double lambda, std::uint32_t n) {
    double term = std::exp(-lambda);
    for (std::uint32_t k = 1; k <= n; ++k) term *= lambda / k;
    return term;
}

double poisson_tail(double lambda, std::uint32_t n) {
    if (n == 0) return 1.0;
    if (lambda <= 0.0) return 0.0;
    // Sum P[X = k] upward from k = n until the terms stop contributing.
    double term = poisson_pmf(lambda, n);
    double tail = term;
    for (std::uint32_t k = n + 1; term > 0.0; ++k) {
        term *= lambda / k;
        const double next = tail + term;
        if (next == tail) break;
        tail = next;
    }
    return std::min(tail, 1.0);
}

double selected_count(const DetectorParams& params) {
    params.validate();
    return params.n_afferents * poisson_tail(params.mean_window_count(), params.strategy);
}

double effective_rate(const DetectorParams& params) {
    params.validate();
    // Discarding afferents with fewer than n window spikes removes, on
    // average, the mass of the first n-1 Poisson terms; what remains is
    // N * f * P[X >= n-1].
    return params.n_afferents * params.rate_hz *
           poisson_tail(params.mean_window_count(), params.strategy - 1);
}

double TrapezoidCurrent::value_at(double t_ms) const {
    if (t_ms < 0.0 || t_ms > duration_ms()) return 0.0;
    if (t_ms < t1_ms) return plateau * t_ms / t1_ms;
    if (t_ms <= t1_ms + t2_ms) return plateau;
    return plateau * (duration_ms() - t_ms) / t3_ms;
}

TrapezoidCurrent trapezoid(double window_ms, double jitter_half_width_ms) {
    if (!(window_ms > 0.0)) throw std::invalid_argument("trapezoid: window_ms must be positive");
    if (!(jitter_half_width_ms >= 0.0))
        throw std::invalid_argument("trapezoid: jitter_half_width_ms must be >= 0");
    const double spread = 2.0 * jitter_half_width_ms;
    if (spread == 0.0) {
        // No jitter: the current is the bare rectangular window.
        return TrapezoidCurrent{0.0, window_ms, 0.0, 1.0};
    }
    TrapezoidCurrent tz;
    tz.t1_ms = std::min(window_ms, spread);
    tz.t2_ms = std::abs(window_ms - spread);
    tz.t3_ms = tz.t1_ms;
    tz.plateau = std::min(1.0, window_ms / spread);
    return tz;
}

TransientPeak transient_peak(const DetectorParams& params) {
    params.validate();
    const double tau = params.tau_ms;
    const double dt = params.window_ms;
    const double spread = 2.0 * params.jitter_half_width_ms;

    TransientPeak peak;
    if (spread == 0.0) {
        // Rectangle limit: the general expression has a 0/0 form at T = 0,
        // so use the step response directly. The peak sits at the end of
        // the window.
        peak.v1 = 0.0;
        peak.v2 = 1.0 - std::exp(-dt / tau);
        peak.t_max_ms = dt;
        peak.v_max = peak.v2;
        return peak;
    }

    const TrapezoidCurrent tz = trapezoid(dt, params.jitter_half_width_ms);
    const double h = tz.plateau;

    // Filtering the rising edge (slope h / t1) from v = 0:
    peak.v1 = (tz.t1_ms + tau * std::expm1(-tz.t1_ms / tau)) / spread;
    // Relaxation toward the plateau over t2:
    peak.v2 = h + (peak.v1 - h) * std::exp(-tz.t2_ms / tau);
    // On the falling edge v keeps rising until it meets the edge itself
    // (before the crossing the drive exceeds v, after it the drive is
    // below v), so the peak lies on the edge:
    const double cross = tau * std::log1p(spread * (h - peak.v2) / tau);
    peak.t_max_ms = tz.t1_ms + tz.t2_ms + cross;

    // Same value, written in the externals. The excess term
    // exp(-|dt-2T|/tau) - exp(-max(dt,2T)/tau) is factored as
    // exp(-max/tau) * expm1(min/tau) so nearly-degenerate trapezoids
    // (tiny T) do not cancel.
    const double excess = std::exp(-std::max(dt, spread) / tau) *
                          std::expm1(std::min(dt, spread) / tau);
    peak.v_max = h - tau / spread * std::log1p(excess);

    // Guard against last-ulp excursions only; anything bigger is a bug.
    if (peak.v_max < -1e-9 || peak.v_max > 1.0 + 1e-9)
        throw std::logic_error("transient_peak: v_max escaped [0, 1]");
    peak.v_max = std::clamp(peak.v_max, 0.0, 1.0);
    return peak;
}

AnalyticReport snr_report(const DetectorParams& params) {
    params.validate();
    AnalyticReport rep;
    rep.lambda = params.mean_window_count();
    rep.selected_count = selected_count(params);
    rep.effective_rate_hz = effective_rate(params);

    const TransientPeak peak = transient_peak(params);
    rep.v1 = peak.v1;
    rep.v2 = peak.v2;
    rep.t_max_ms = peak.t_max_ms;
    rep.v_max = peak.v_max;

    // Shot noise of M unitary-weight Poisson afferents through the membrane:
    // mean tau*f*M, variance tau*f*M/2 (tau in seconds against f in Hz).
    const double tau_s = params.tau_ms / 1000.0;
    rep.noise_mean = tau_s * params.rate_hz * rep.selected_count;
    rep.noise_std = std::sqrt(std::max(rep.noise_mean, 0.0) / 2.0);

    // (peak - noise mean) / noise std with the steady-state gap
    // tau * (r - f*M) expressed through the Poisson terms; the tail in the
    // denominator is the selection probability behind M.
    const double tail = poisson_tail(rep.lambda, params.strategy);
    if (tail <= 0.0) {
        rep.snr = 0.0;
        return rep;
    }
    rep.snr = rep.v_max * poisson_pmf(rep.lambda, params.strategy - 1) *
              std::sqrt(2.0 * tau_s * params.n_afferents * params.rate_hz / tail);
    return rep;
}

std::string to_json(const AnalyticReport& rep) {
    char buf[640];
    std::snprintf(buf, sizeof buf,
                  "{\n"
                  "  \"lambda\": %.17g,\n"
                  "  \"selected_count\": %.17g,\n"
                  "  \"effective_rate_hz\": %.17g,\n"
                  "  \"v1\": %.17g,\n"
                  "  \"v2\": %.17g,\n"
                  "  \"t_max_ms\": %.17g,\n"
                  "  \"v_max\": %.17g,\n"
                  "  \"noise_mean\": %.17g,\n"
                  "  \"noise_std\": %.17g,\n"
                  "  \"snr\": %.17g\n"
                  "}\n",
                  rep.lambda, rep.selected_count, rep.effective_rate_hz, rep.v1, rep.v2,
                  rep.t_max_ms, rep.v_max, rep.noise_mean, rep.noise_std, rep.snr);
    return buf;
}

} // namespace patdet
