#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "patdet/lif.hpp"

namespace patdet {

/// Numerical-vs-analytic SNR comparison: random frozen patterns measured
/// with the clock-based simulation against the closed form, per strategy
/// and membrane time constant.
struct ValidationParams {
    std::uint32_t n_afferents = 10000;
    double rate_hz = 5.0;
    double jitter_half_width_ms = 0.0;
    double pattern_ms = 20.0; // the selection window is the whole pattern
    std::vector<double> taus_ms{5.0, 10.0, 18.0, 30.0, 60.0};
    std::vector<std::uint32_t> strategies{1, 2};
    std::uint64_t n_patterns = 20;
    std::uint64_t n_presentations = 200;
    double period_ms = 0.0; // 0 = derive from tau (see validation_period_ms)
    double dt_bin_ms = 0.1;
    std::uint64_t seed = 1;
    unsigned jobs = 0;
};

struct ValidationPoint {
    double tau_ms = 0.0;
    std::uint32_t strategy = 0;
    double snr_analytic = 0.0;
    double snr_sim_mean = 0.0;
    double snr_sim_sd = 0.0;
    std::uint64_t n_patterns = 0;
    bool within_tolerance = false; // |mean - analytic| <= max(3*SE, 5% relative)
};

/// Presentation period for a given tau: at least the canonical 400 ms, and
/// always wide enough that the 5*tau noise-exclusion zones leave plenty of
/// admissible bins between presentations.
double validation_period_ms(const ValidationParams& params, double tau_ms);

std::vector<ValidationPoint> run_validation(const ValidationParams& params);

bool validation_passes(const std::vector<ValidationPoint>& points);

void write_validation_csv(std::ostream& os, const std::vector<ValidationPoint>& points);

} // namespace patdet
