#include "patdet/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "patdet/analytic.hpp"
#include "patdet/parallel.hpp"
#include "patdet/rng.hpp"

namespace patdet {

namespace {

namespace validation_seed_tag {
constexpr std::uint64_t pattern = 31;
constexpr std::uint64_t noise = 32;
constexpr std::uint64_t jitter = 33;
} // namespace validation_seed_tag

} // namespace

double validation_period_ms(const ValidationParams& params, double tau_ms) {
    const double needed =
        params.pattern_ms + 2.0 * params.jitter_half_width_ms + 10.0 * tau_ms + 60.0;
    const double period = std::max(400.0, needed);
    // Round up to a whole number of bins.
    return std::ceil(period / params.dt_bin_ms) * params.dt_bin_ms;
}

std::vector<ValidationPoint> run_validation(const ValidationParams& params) {
    if (params.taus_ms.empty() || params.strategies.empty())
        throw std::invalid_argument("run_validation: no grid points");
    if (params.n_patterns == 0)
        throw std::invalid_argument("run_validation: need at least one pattern");

    const std::size_t n_points = params.taus_ms.size() * params.strategies.size();
    std::vector<double> snr(params.n_patterns * n_points, 0.0);

    parallel_for(params.n_patterns, params.jobs, [&](std::size_t p) {
        const FrozenPattern pattern = freeze_pattern(
            PoissonConfig{params.n_afferents, params.rate_hz,
                          derive_seed(params.seed, validation_seed_tag::pattern, p)},
            params.pattern_ms);
        for (std::size_t si = 0; si < params.strategies.size(); ++si) {
            const auto weights =
                select_afferents(pattern, params.strategies[si], 0.0, params.pattern_ms);
            for (std::size_t ti = 0; ti < params.taus_ms.size(); ++ti) {
                LifConfig config;
                config.tau_ms = params.taus_ms[ti];
                config.dt_bin_ms = params.dt_bin_ms;
                SnrProtocol protocol;
                protocol.n_presentations = params.n_presentations;
                protocol.period_ms = params.period_ms > 0.0
                                         ? params.period_ms
                                         : validation_period_ms(params, params.taus_ms[ti]);
                protocol.noise =
                    PoissonConfig{params.n_afferents, params.rate_hz,
                                  derive_seed(params.seed, validation_seed_tag::noise, p)};
                protocol.jitter =
                    JitterConfig{params.jitter_half_width_ms,
                                 derive_seed(params.seed, validation_seed_tag::jitter, p)};
                snr[p * n_points + si * params.taus_ms.size() + ti] =
                    measure_snr(pattern, weights, config, protocol).snr;
            }
        }
    });

    std::vector<ValidationPoint> points;
    points.reserve(n_points);
    for (std::size_t si = 0; si < params.strategies.size(); ++si) {
        for (std::size_t ti = 0; ti < params.taus_ms.size(); ++ti) {
            ValidationPoint point;
            point.tau_ms = params.taus_ms[ti];
            point.strategy = params.strategies[si];
            point.n_patterns = params.n_patterns;

            DetectorParams dp;
            dp.n_afferents = params.n_afferents;
            dp.rate_hz = params.rate_hz;
            dp.jitter_half_width_ms = params.jitter_half_width_ms;
            dp.strategy = params.strategies[si];
            dp.tau_ms = params.taus_ms[ti];
            dp.window_ms = params.pattern_ms;
            point.snr_analytic = snr_report(dp).snr;

            double sum = 0.0, sumsq = 0.0;
            for (std::size_t p = 0; p < params.n_patterns; ++p) {
                const double v = snr[p * n_points + si * params.taus_ms.size() + ti];
                sum += v;
                sumsq += v * v;
            }
            const auto n = static_cast<double>(params.n_patterns);
            point.snr_sim_mean = sum / n;
            const double var =
                n > 1.0 ? std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0)) : 0.0;
            point.snr_sim_sd = std::sqrt(var);

            const double standard_error = point.snr_sim_sd / std::sqrt(n);
            const double tolerance =
                std::max(3.0 * standard_error, 0.05 * std::abs(point.snr_analytic));
            point.within_tolerance =
                std::abs(point.snr_sim_mean - point.snr_analytic) <= tolerance;
            points.push_back(point);
        }
    }
    return points;
}

bool validation_passes(const std::vector<ValidationPoint>& points) {
    for (const auto& point : points)
        if (!point.within_tolerance) return false;
    return !points.empty();
}

void write_validation_csv(std::ostream& os, const std::vector<ValidationPoint>& points) {
    os << "tau_ms,strategy,snr_analytic,snr_sim_mean,snr_sim_sd,n_patterns\n";
    char buf[192];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.10g,%u,%.10g,%.10g,%.10g,%llu\n", p.tau_ms, p.strategy,
                      p.snr_analytic, p.snr_sim_mean, p.snr_sim_sd,
                      static_cast<unsigned long long>(p.n_patterns));
        os << buf;
    }
}

} // namespace patdet
