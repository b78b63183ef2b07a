#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "patdet/analytic.hpp"

namespace patdet {

/// Search space and solver knobs for the SNR maximization. The continuity
/// approximation behind the closed form needs tau * f * M to stay above
/// `min_continuity_product`; candidates below that are projected onto the
/// boundary or discarded.
struct OptimizerSettings {
    double tau_min_ms = 0.5;
    double tau_max_ms = 1000.0;
    double window_min_ms = 0.5;
    double window_max_ms = 1000.0;
    std::uint32_t coarse_points = 40;     // per axis, log-spaced
    std::uint32_t max_refine_evals = 500; // pattern-search budget per strategy
    double refine_step_tol = 1e-6;        // log-space step at which to stop
    double min_continuity_product = 10.0; // tau[s] * f[Hz] * M
};

/// Best (tau, window) for one strategy number.
struct StrategyOptimum {
    std::uint32_t strategy = 0;
    bool feasible = false;
    double tau_ms = 0.0;
    double window_ms = 0.0;
    double snr = 0.0;
    bool constraint_active = false;
};

struct OptimizationResult {
    bool feasible = false;
    std::uint32_t best_strategy = 0;
    double best_tau_ms = 0.0;
    double best_window_ms = 0.0;
    double best_snr = 0.0;
    bool constraint_active = false;
    std::vector<StrategyOptimum> per_strategy;
};

/// tau*f*M at a candidate point, in the constraint's units.
double continuity_product(double rate_hz, std::uint32_t n_afferents, std::uint32_t strategy,
                          double tau_ms, double window_ms);

/// Maximizes the closed-form SNR over (strategy, tau, window) for fixed
/// externals. Coarse log-grid scan followed by a deterministic compass
/// (pattern) search per strategy; ties across strategies resolve to the
/// smaller strategy number.
OptimizationResult optimize(double rate_hz, double jitter_half_width_ms, std::uint32_t n_afferents,
                            std::uint32_t max_strategy = 5, const OptimizerSettings& settings = {});

/// True when no feasible point of a 21 x 21 local grid spanning +/-20% around
/// the returned optimum (with constraint-violating points projected onto the
/// boundary) improves on it.
bool verify_optimum(const OptimizationResult& result, double rate_hz, double jitter_half_width_ms,
                    std::uint32_t n_afferents, const OptimizerSettings& settings = {});

/// One optimization per (f, T) grid cell; cells are independent and solved in
/// parallel, output order is row-major over (f, T) regardless of thread count.
struct PlaneSweep {
    std::vector<double> f_grid_hz;
    std::vector<double> t_grid_ms;
    std::vector<OptimizationResult> cells; // cells[i * t_grid.size() + j]

    const OptimizationResult& cell(std::size_t fi, std::size_t tj) const {
        return cells[fi * t_grid_ms.size() + tj];
    }
};

PlaneSweep sweep_plane(const std::vector<double>& f_grid_hz, const std::vector<double>& t_grid_ms,
                       std::uint32_t n_afferents, std::uint32_t max_strategy = 5,
                       unsigned jobs = 0, const OptimizerSettings& settings = {});

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Long-form CSV: f, T, n*, tau*, dt*, snr*, constraint_active.
void write_sweep_csv(std::ostream& os, const PlaneSweep& sweep);

/// Gnuplot-style matrix (one row per f value, columns over T) of one field.
enum class SweepField { strategy, tau, window_over_tau, snr };
void write_sweep_matrix(std::ostream& os, const PlaneSweep& sweep, SweepField field);

std::string to_json(const OptimizationResult& result);

} // namespace patdet
