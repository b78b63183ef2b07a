#include "patdet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "patdet/parallel.hpp"

namespace patdet {

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: need 0 < lo <= hi");
    if (n < 1) throw std::invalid_argument("log_grid: need at least one point");
    std::vector<double> grid(n);
    if (n == 1) {
        grid[0] = lo;
        return grid;
    }
    const double ratio = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo * std::exp(ratio * static_cast<double>(i));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

double continuity_product(double rate_hz, std::uint32_t n_afferents, std::uint32_t strategy,
                          double tau_ms, double window_ms) {
    const double lambda = rate_hz * window_ms / 1000.0;
    const double selected = n_afferents * poisson_tail(lambda, strategy);
    return tau_ms / 1000.0 * rate_hz * selected;
}

namespace {

struct Objective {
    double rate_hz;
    double jitter_ms;
    std::uint32_t n_afferents;
    std::uint32_t strategy;
    const OptimizerSettings& settings;

    // Smallest tau satisfying the continuity constraint at this window.
    double tau_floor_ms(double window_ms) const {
        const double lambda = rate_hz * window_ms / 1000.0;
        const double selected = n_afferents * poisson_tail(lambda, strategy);
        if (selected <= 0.0) return std::numeric_limits<double>::infinity();
        return std::max(settings.tau_min_ms,
                        settings.min_continuity_product * 1000.0 / (rate_hz * selected));
    }

    double snr(double tau_ms, double window_ms) const {
        DetectorParams p;
        p.n_afferents = n_afferents;
        p.rate_hz = rate_hz;
        p.jitter_half_width_ms = jitter_ms;
        p.strategy = strategy;
        p.tau_ms = tau_ms;
        p.window_ms = window_ms;
        return snr_report(p).snr;
    }
};

struct Candidate {
    double tau_ms = 0.0;
    double window_ms = 0.0;
    double snr = -1.0;
};

void consider(Candidate& best, const Objective& obj, double tau_ms, double window_ms) {
    const double s = obj.snr(tau_ms, window_ms);
    if (s > best.snr) best = {tau_ms, window_ms, s};
}

StrategyOptimum optimize_strategy(const Objective& obj) {
    const OptimizerSettings& st = obj.settings;
    StrategyOptimum out;
    out.strategy = obj.strategy;

    const auto tau_grid = log_grid(st.tau_min_ms, st.tau_max_ms, st.coarse_points);
    const auto win_grid = log_grid(st.window_min_ms, st.window_max_ms, st.coarse_points);

    Candidate best;
    for (double w : win_grid) {
        const double floor = obj.tau_floor_ms(w);
        if (floor > st.tau_max_ms) continue; // no feasible tau at this window
        consider(best, obj, floor, w);
        for (double tau : tau_grid)
            if (tau > floor) consider(best, obj, tau, w);
    }
    if (best.snr < 0.0) {
        out.feasible = false;
        return out;
    }

    // Compass search over (log tau, log window), projecting tau onto the
    // constraint boundary. Deterministic: fixed direction order, move to the
    // best improving neighbor, halve the step when none improves.
    const double initial_step =
        std::log(st.tau_max_ms / st.tau_min_ms) / static_cast<double>(st.coarse_points - 1);
    double lx = std::log(best.tau_ms);
    double ly = std::log(best.window_ms);
    double step = initial_step;
    std::uint32_t evals = 0;

    const double lx_min = std::log(st.tau_min_ms), lx_max = std::log(st.tau_max_ms);
    const double ly_min = std::log(st.window_min_ms), ly_max = std::log(st.window_max_ms);

    while (step > st.refine_step_tol && evals < st.max_refine_evals) {
        Candidate move = best;
        bool improved = false;
        constexpr double dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : dirs) {
            const double cy = std::clamp(ly + step * d[1], ly_min, ly_max);
            const double w = std::exp(cy);
            const double floor = obj.tau_floor_ms(w);
            if (floor > st.tau_max_ms) continue;
            double tau = std::exp(std::clamp(lx + step * d[0], lx_min, lx_max));
            tau = std::max(tau, floor);
            const double s = obj.snr(tau, w);
            ++evals;
            if (s > move.snr) {
                move = {tau, w, s};
                improved = true;
            }
        }
        if (improved) {
            best = move;
            lx = std::log(best.tau_ms);
            ly = std::log(best.window_ms);
        } else {
            step *= 0.5;
        }
    }

    out.feasible = true;
    out.tau_ms = best.tau_ms;
    out.window_ms = best.window_ms;
    out.snr = best.snr;
    const double product =
        continuity_product(obj.rate_hz, obj.n_afferents, obj.strategy, best.tau_ms, best.window_ms);
    out.constraint_active = product <= st.min_continuity_product * 1.001;
    return out;
}

} // namespace

OptimizationResult optimize(double rate_hz, double jitter_half_width_ms, std::uint32_t n_afferents,
                            std::uint32_t max_strategy, const OptimizerSettings& settings) {
    if (!(rate_hz > 0.0)) throw std::invalid_argument("optimize: rate_hz must be positive");
    if (!(jitter_half_width_ms >= 0.0))
        throw std::invalid_argument("optimize: jitter_half_width_ms must be >= 0");
    if (max_strategy < 1) throw std::invalid_argument("optimize: max_strategy must be >= 1");

    OptimizationResult result;
    result.per_strategy.reserve(max_strategy);
    for (std::uint32_t n = 1; n <= max_strategy; ++n) {
        Objective obj{rate_hz, jitter_half_width_ms, n_afferents, n, settings};
        StrategyOptimum strat = optimize_strategy(obj);
        if (strat.feasible && (!result.feasible || strat.snr > result.best_snr)) {
            result.feasible = true;
            result.best_strategy = n;
            result.best_tau_ms = strat.tau_ms;
            result.best_window_ms = strat.window_ms;
            result.best_snr = strat.snr;
            result.constraint_active = strat.constraint_active;
        }
        result.per_strategy.push_back(strat);
    }
    return result;
}

bool verify_optimum(const OptimizationResult& result, double rate_hz, double jitter_half_width_ms,
                    std::uint32_t n_afferents, const OptimizerSettings& settings) {
    if (!result.feasible) return false;
    Objective obj{rate_hz, jitter_half_width_ms, n_afferents, result.best_strategy, settings};

    const auto factors = [] {
        std::vector<double> f(21);
        for (int i = 0; i < 21; ++i) f[static_cast<std::size_t>(i)] = 0.8 + 0.02 * i;
        return f;
    }();

    const double tolerance = result.best_snr * 1e-9;
    for (double ft : factors) {
        for (double fw : factors) {
            const double w = std::clamp(result.best_window_ms * fw, settings.window_min_ms,
                                        settings.window_max_ms);
            const double floor = obj.tau_floor_ms(w);
            if (floor > settings.tau_max_ms) continue;
            double tau =
                std::clamp(result.best_tau_ms * ft, settings.tau_min_ms, settings.tau_max_ms);
            tau = std::max(tau, floor);
            if (obj.snr(tau, w) > result.best_snr + tolerance) return false;
        }
    }
    return true;
}

PlaneSweep sweep_plane(const std::vector<double>& f_grid_hz, const std::vector<double>& t_grid_ms,
                       std::uint32_t n_afferents, std::uint32_t max_strategy, unsigned jobs,
                       const OptimizerSettings& settings) {
    if (f_grid_hz.empty() || t_grid_ms.empty())
        throw std::invalid_argument("sweep_plane: grids must be non-empty");
    for (std::size_t i = 1; i < f_grid_hz.size(); ++i)
        if (!(f_grid_hz[i] > f_grid_hz[i - 1]))
            throw std::invalid_argument("sweep_plane: f grid must be strictly increasing");
    for (std::size_t j = 1; j < t_grid_ms.size(); ++j)
        if (!(t_grid_ms[j] > t_grid_ms[j - 1]))
            throw std::invalid_argument("sweep_plane: T grid must be strictly increasing");

    PlaneSweep sweep;
    sweep.f_grid_hz = f_grid_hz;
    sweep.t_grid_ms = t_grid_ms;
    sweep.cells.resize(f_grid_hz.size() * t_grid_ms.size());

    parallel_for(sweep.cells.size(), jobs, [&](std::size_t idx) {
        const std::size_t fi = idx / t_grid_ms.size();
        const std::size_t tj = idx % t_grid_ms.size();
        sweep.cells[idx] =
            optimize(f_grid_hz[fi], t_grid_ms[tj], n_afferents, max_strategy, settings);
    });
    return sweep;
}

void write_sweep_csv(std::ostream& os, const PlaneSweep& sweep) {
    os << "f_hz,T_ms,strategy,tau_ms,window_ms,snr,constraint_active\n";
    char buf[256];
    for (std::size_t fi = 0; fi < sweep.f_grid_hz.size(); ++fi) {
        for (std::size_t tj = 0; tj < sweep.t_grid_ms.size(); ++tj) {
            const OptimizationResult& c = sweep.cell(fi, tj);
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%u,%.10g,%.10g,%.10g,%d\n",
                          sweep.f_grid_hz[fi], sweep.t_grid_ms[tj], c.best_strategy, c.best_tau_ms,
                          c.best_window_ms, c.best_snr, c.constraint_active ? 1 : 0);
            os << buf;
        }
    }
}

void write_sweep_matrix(std::ostream& os, const PlaneSweep& sweep, SweepField field) {
    char buf[64];
    for (std::size_t fi = 0; fi < sweep.f_grid_hz.size(); ++fi) {
        for (std::size_t tj = 0; tj < sweep.t_grid_ms.size(); ++tj) {
            const OptimizationResult& c = sweep.cell(fi, tj);
            double value = 0.0;
            switch (field) {
            case SweepField::strategy: value = c.best_strategy; break;
            case SweepField::tau: value = c.best_tau_ms; break;
            case SweepField::window_over_tau:
                value = c.best_tau_ms > 0.0 ? c.best_window_ms / c.best_tau_ms : 0.0;
                break;
            case SweepField::snr: value = c.best_snr; break;
            }
            std::snprintf(buf, sizeof buf, "%.10g", value);
            os << buf << (tj + 1 < sweep.t_grid_ms.size() ? " " : "\n");
        }
    }
}

std::string to_json(const OptimizationResult& result) {
    std::string json = "{\n";
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "  \"feasible\": %s,\n"
                  "  \"best_strategy\": %u,\n"
                  "  \"best_tau_ms\": %.17g,\n"
                  "  \"best_window_ms\": %.17g,\n"
                  "  \"best_snr\": %.17g,\n"
                  "  \"constraint_active\": %s,\n"
                  "  \"per_strategy\": [\n",
                  result.feasible ? "true" : "false", result.best_strategy, result.best_tau_ms,
                  result.best_window_ms, result.best_snr, result.constraint_active ? "true" : "false");
    json += buf;
    for (std::size_t i = 0; i < result.per_strategy.size(); ++i) {
        const StrategyOptimum& s = result.per_strategy[i];
        std::snprintf(buf, sizeof buf,
                      "    {\"strategy\": %u, \"feasible\": %s, \"tau_ms\": %.17g, "
                      "\"window_ms\": %.17g, \"snr\": %.17g, \"constraint_active\": %s}%s\n",
                      s.strategy, s.feasible ? "true" : "false", s.tau_ms, s.window_ms, s.snr,
                      s.constraint_active ? "true" : "false",
                      i + 1 < result.per_strategy.size() ? "," : "");
        json += buf;
    }
    json += "  ]\n}\n";
    return json;
}

} // namespace patdet
