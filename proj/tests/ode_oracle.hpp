#pragma once

// Test-only reference integrator for the reduced membrane equation
// tau * dv/dt = -v + i(t) with the trapezoidal drive: classic RK4 at a fixed
// step, peak picked off the dense trajectory. Independent of the closed-form
// expressions it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "patdet/analytic.hpp"

namespace patdet::testing {

inline double ode_peak(double tau_ms, double window_ms, double jitter_ms,
                       double step_ms = 1e-3) {
    const TrapezoidCurrent tz = trapezoid(window_ms, jitter_ms);
    const double duration = tz.duration_ms();
    const auto n_steps = static_cast<std::size_t>(std::ceil(duration / step_ms));
    const double h = duration / static_cast<double>(n_steps);

    const auto slope = [&](double t, double v) { return (-v + tz.value_at(t)) / tau_ms; };

    double v = 0.0, v_peak = 0.0, t = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double k1 = slope(t, v);
        const double k2 = slope(t + 0.5 * h, v + 0.5 * h * k1);
        const double k3 = slope(t + 0.5 * h, v + 0.5 * h * k2);
        const double k4 = slope(t + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        v_peak = std::max(v_peak, v);
    }
    return v_peak;
}

} // namespace patdet::testing
