#include "patdet/stdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "patdet/parallel.hpp"
#include "patdet/rng.hpp"

namespace patdet {

void StdpConfig::validate() const {
    if (!(trace_increment > 0.0))
        throw std::invalid_argument("StdpConfig: trace_increment must be positive");
    if (!(trace_tau_ms > 0.0))
        throw std::invalid_argument("StdpConfig: trace_tau_ms must be positive");
    if (!(homeostatic_term < 0.0))
        throw std::invalid_argument("StdpConfig: homeostatic_term must be negative");
    if (!(threshold > 0.0)) throw std::invalid_argument("StdpConfig: threshold must be positive");
    if (initial_weight < 0.0 || initial_weight > 1.0)
        throw std::invalid_argument("StdpConfig: initial_weight must lie in [0, 1]");
}

namespace {

// Powers of a per-bin decay factor, indexed by bin gap. Gaps beyond the
// table are treated as fully decayed; at the table sizes used here the true
// value is below 1e-35, far under anything a weight update can resolve.
class DecayTable {
public:
    DecayTable(double factor, std::size_t size) : table_(size) {
        double value = 1.0;
        for (auto& slot : table_) {
            slot = value;
            value *= factor;
        }
    }

    double operator()(std::int64_t gap) const {
        if (gap < 0) return 1.0;
        if (static_cast<std::size_t>(gap) >= table_.size()) return 0.0;
        return table_[static_cast<std::size_t>(gap)];
    }

private:
    std::vector<double> table_;
};

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

int mode_from_median_spikes(double median_spikes) {
    if (std::abs(median_spikes - 1.0) < 0.01) return 1;
    if (std::abs(median_spikes - 2.0) < 0.01) return 2;
    return 0;
}

constexpr double kReinforcedAbove = 0.95;
constexpr double kDepressedBelow = 0.05;
constexpr double kBinarizedMaxMiddleFraction = 0.01;
constexpr std::uint64_t kMedianWindowPresentations = 50;
constexpr double kRunawayWindowMs = 1000.0;
constexpr std::size_t kRunawaySpikes = 500;

} // namespace

LearningOutcome run_learning(const FrozenPattern& pattern, const LearnProtocol& protocol,
                             const LifConfig& lif, const StdpConfig& stdp,
                             std::uint64_t n_presentations, std::uint64_t snapshot_every,
                             const WeightSnapshotFn& on_snapshot) {
    lif.validate();
    stdp.validate();
    protocol.noise.validate();
    protocol.jitter.validate();
    if (lif.threshold)
        throw std::invalid_argument(
            "run_learning: set the threshold in StdpConfig, not LifConfig");
    if (protocol.noise.n_afferents != pattern.n_afferents)
        throw std::invalid_argument("run_learning: noise and pattern afferent counts differ");
    if (!(protocol.period_ms >=
          pattern.duration_ms + 2.0 * protocol.jitter.half_width_ms))
        throw std::invalid_argument("run_learning: period shorter than the jittered pattern");
    if (n_presentations == 0)
        throw std::invalid_argument("run_learning: need at least one presentation");

    const std::uint32_t n = pattern.n_afferents;
    const double dt = lif.dt_bin_ms;
    const double period = protocol.period_ms;
    const double len = pattern.duration_ms;
    const double half_jitter = protocol.jitter.half_width_ms;
    const double v_decay = lif.decay_factor();
    const double trace_decay = 1.0 - dt / stdp.trace_tau_ms;
    const std::int64_t bins_per_segment = std::llround(period / dt);

    // Traces decay lazily: each synapse stores its value at the bin of its
    // last touch, and the gap is closed through the decay table whenever the
    // trace is next needed (its own presynaptic spike or any postsynaptic
    // spike).
    const DecayTable trace_pow(trace_decay, 1 << 14);
    std::vector<double> weights(n, stdp.initial_weight);
    std::vector<double> trace(n, 0.0);
    std::vector<std::int64_t> trace_bin(n, 0);

    LearningOutcome out;
    out.n_presentations = n_presentations;
    out.min_weight_seen = stdp.initial_weight;
    out.max_weight_seen = stdp.initial_weight;
    std::vector<std::uint32_t> spikes_in_presentation(n_presentations, 0);

    double potential = 0.0;
    std::vector<Spike> pending = jittered_presentation(pattern, protocol.jitter, 0, 0.0);
    std::erase_if(pending, [](const Spike& s) { return s.time_ms < 0.0; });

    std::vector<Spike> events;
    std::vector<std::pair<std::int64_t, std::uint32_t>> binned;

    for (std::uint64_t k = 0; k < n_presentations && !out.divergent; ++k) {
        const double seg_begin = static_cast<double>(k) * period;
        const double seg_end = seg_begin + period;

        events.swap(pending);
        pending.clear();
        for (std::uint32_t i = 0; i < n; ++i) {
            append_poisson_train(events, i, protocol.noise.rate_hz,
                                 derive_seed(protocol.noise.seed, seed_tag::poisson_train, i, k),
                                 seg_begin + len, seg_end);
        }
        if (k + 1 < n_presentations) {
            for (const Spike& s :
                 jittered_presentation(pattern, protocol.jitter, k + 1, seg_end)) {
                if (s.time_ms < seg_end) events.push_back(s);
                else pending.push_back(s);
            }
        }

        binned.clear();
        binned.reserve(events.size());
        for (const Spike& s : events) {
            auto bin = static_cast<std::int64_t>(std::floor((s.time_ms - seg_begin) / dt));
            bin = std::clamp<std::int64_t>(bin, 0, bins_per_segment - 1);
            binned.emplace_back(bin, s.afferent);
        }
        std::sort(binned.begin(), binned.end());

        std::size_t ev = 0;
        for (std::int64_t j = 0; j < bins_per_segment; ++j) {
            potential *= v_decay;
            const std::int64_t gbin = static_cast<std::int64_t>(k) * bins_per_segment + j;
            bool delivered = false;
            while (ev < binned.size() && binned[ev].first == j) {
                const std::uint32_t i = binned[ev].second;
                potential += weights[i];
                trace[i] = trace[i] * trace_pow(gbin - trace_bin[i]) + stdp.trace_increment;
                trace_bin[i] = gbin;
                delivered = true;
                ++ev;
            }
            if (!delivered || potential < stdp.threshold) continue;

            // Postsynaptic spike: potentiate through the traces, apply the
            // homeostatic term everywhere, clip, reset.
            const double pos = static_cast<double>(j) * dt;
            const double t_spike = seg_begin + pos;
            out.post_spike_times_ms.push_back(t_spike);
            if (pos <= len + half_jitter) {
                ++spikes_in_presentation[k];
            } else if (pos >= period - half_jitter && k + 1 < n_presentations) {
                ++spikes_in_presentation[k + 1];
            }

            double lo = 1.0, hi = 0.0;
            for (std::uint32_t i = 0; i < n; ++i) {
                const double a = trace[i] * trace_pow(gbin - trace_bin[i]);
                trace[i] = a;
                trace_bin[i] = gbin;
                const double w =
                    std::clamp(weights[i] + a + stdp.homeostatic_term, 0.0, 1.0);
                weights[i] = w;
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
            out.min_weight_seen = std::min(out.min_weight_seen, lo);
            out.max_weight_seen = std::max(out.max_weight_seen, hi);
            potential = lif.reset_potential;

            const std::size_t n_posts = out.post_spike_times_ms.size();
            if (n_posts > kRunawaySpikes &&
                t_spike - out.post_spike_times_ms[n_posts - 1 - kRunawaySpikes] <
                    kRunawayWindowMs) {
                out.divergent = true;
                break;
            }
        }
        if (snapshot_every != 0 && on_snapshot && (k + 1) % snapshot_every == 0)
            on_snapshot(k + 1, weights);
    }

    out.final_weights = std::move(weights);
    std::size_t middle = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const double w = out.final_weights[i];
        if (w > kReinforcedAbove) out.reinforced_set.push_back(i);
        if (w > kDepressedBelow && w < kReinforcedAbove) ++middle;
    }
    out.binarized = !out.divergent &&
                    static_cast<double>(middle) <
                        kBinarizedMaxMiddleFraction * static_cast<double>(n);

    const std::uint64_t window =
        std::min<std::uint64_t>(kMedianWindowPresentations, n_presentations);
    std::vector<double> last(window);
    for (std::uint64_t i = 0; i < window; ++i)
        last[i] = spikes_in_presentation[n_presentations - window + i];
    out.post_spikes_per_presentation = median(std::move(last));
    out.mode = out.binarized ? mode_from_median_spikes(out.post_spikes_per_presentation) : 0;
    return out;
}

double initial_weight_for(double threshold, const LifConfig& lif, std::uint32_t n_afferents,
                          double rate_hz) {
    lif.validate();
    if (!(threshold > 0.0))
        throw std::invalid_argument("initial_weight_for: threshold must be positive");
    if (n_afferents < 1 || !(rate_hz > 0.0))
        throw std::invalid_argument("initial_weight_for: invalid externals");

    // mean = tau*f*N*w0 and std = w0*sqrt(tau*f*N/2); starting two standard
    // deviations above threshold gives w0 = theta / (drive - sqrt(2*drive)).
    const double drive = lif.tau_ms / 1000.0 * rate_hz * n_afferents;
    const double denom = drive - std::sqrt(2.0 * drive);
    if (!(denom > 0.0))
        throw std::invalid_argument("initial_weight_for: drive too weak for any valid weight");
    const double w0 = threshold / denom;
    if (w0 > 1.0 + 1e-9)
        throw std::invalid_argument("initial_weight_for: no solution in (0, 1]");
    return std::clamp(w0, 0.0, 1.0);
}

OptimalityCall classify_optimality(const LearningOutcome& outcome, const FrozenPattern& pattern,
                                   double optimal_window_ms, double margin) {
    if (!outcome.binarized)
        throw std::invalid_argument("classify_optimality: outcome is not binarized");
    if (!(optimal_window_ms > 0.0) || !(margin >= 0.0))
        throw std::invalid_argument("classify_optimality: invalid window or margin");

    OptimalityCall call;
    if (outcome.reinforced_set.empty()) return call;

    const double d_lo = (1.0 - margin) * optimal_window_ms;
    const double d_hi = (1.0 + margin) * optimal_window_ms;
    const double len = pattern.duration_ms;
    if (d_lo > len) return call;

    // Spike times split into reinforced afferents (each must fire in the
    // window) and the rest (none may fire in it).
    std::vector<std::uint8_t> reinforced(pattern.n_afferents, 0);
    for (std::uint32_t i : outcome.reinforced_set) reinforced[i] = 1;

    std::vector<std::vector<double>> member_times(outcome.reinforced_set.size());
    std::vector<std::uint32_t> member_slot(pattern.n_afferents, 0);
    for (std::size_t s = 0; s < outcome.reinforced_set.size(); ++s)
        member_slot[outcome.reinforced_set[s]] = static_cast<std::uint32_t>(s);
    std::vector<double> foreign_times;
    for (const Spike& s : pattern.spikes) {
        if (reinforced[s.afferent]) member_times[member_slot[s.afferent]].push_back(s.time_ms);
        else foreign_times.push_back(s.time_ms);
    }
    for (const auto& times : member_times)
        if (times.empty()) return call; // reinforced afferent silent in the pattern

    // Scan window starts at 0.1 ms. Pointers only move forward as t0 grows.
    std::vector<std::size_t> member_ptr(member_times.size(), 0);
    std::size_t foreign_ptr = 0;
    const double step = 0.1;
    const auto n_steps = static_cast<std::size_t>(std::floor((len - d_lo) / step)) + 1;

    for (std::size_t si = 0; si < n_steps; ++si) {
        const double t0 = static_cast<double>(si) * step;

        bool covered = true;
        double d_need = 0.0;
        for (std::size_t m = 0; m < member_times.size(); ++m) {
            const auto& times = member_times[m];
            auto& ptr = member_ptr[m];
            while (ptr < times.size() && times[ptr] < t0) ++ptr;
            if (ptr == times.size()) {
                covered = false;
                break;
            }
            d_need = std::max(d_need, times[ptr] - t0);
        }
        if (!covered) break; // no later t0 can cover this afferent either

        while (foreign_ptr < foreign_times.size() && foreign_times[foreign_ptr] < t0)
            ++foreign_ptr;
        const double d_limit = foreign_ptr < foreign_times.size()
                                   ? foreign_times[foreign_ptr] - t0
                                   : std::numeric_limits<double>::infinity();

        const double lo = std::max(d_lo, d_need);
        const double hi = std::min(d_hi, len - t0);
        if (lo <= hi && lo < d_limit) {
            call.is_optimal = true;
            call.window = MatchedWindow{t0, lo};
            return call;
        }
    }
    return call;
}

namespace {

namespace cell_seed_tag {
constexpr std::uint64_t pattern = 21;
constexpr std::uint64_t noise = 22;
constexpr std::uint64_t jitter = 23;
} // namespace cell_seed_tag

} // namespace

CellOutcome run_mode_cell(double theta, double w_out, std::uint64_t n_runs,
                          const StdpExternals& ext) {
    CellOutcome cell;
    cell.theta = theta;
    cell.w_out = w_out;
    cell.runs.resize(n_runs);

    LifConfig lif;
    lif.tau_ms = ext.tau_ms;
    lif.dt_bin_ms = ext.dt_bin_ms;

    parallel_for(n_runs, ext.jobs, [&](std::size_t r) {
        const FrozenPattern pattern = freeze_pattern(
            PoissonConfig{ext.n_afferents, ext.rate_hz,
                          derive_seed(ext.seed, cell_seed_tag::pattern, r)},
            ext.pattern_ms);
        LearnProtocol protocol;
        protocol.noise = PoissonConfig{ext.n_afferents, ext.rate_hz,
                                       derive_seed(ext.seed, cell_seed_tag::noise, r)};
        protocol.jitter =
            JitterConfig{ext.jitter_half_width_ms, derive_seed(ext.seed, cell_seed_tag::jitter, r)};
        protocol.period_ms = ext.period_ms;

        StdpConfig stdp;
        stdp.trace_increment = ext.trace_increment;
        stdp.trace_tau_ms = ext.trace_tau_ms;
        stdp.homeostatic_term = w_out;
        stdp.threshold = theta;
        stdp.initial_weight = initial_weight_for(theta, lif, ext.n_afferents, ext.rate_hz);

        LearningOutcome outcome =
            run_learning(pattern, protocol, lif, stdp, ext.n_presentations);
        RunSummary& summary = cell.runs[r];
        summary.binarized = outcome.binarized;
        summary.divergent = outcome.divergent;
        summary.post_spikes_per_presentation = outcome.post_spikes_per_presentation;
        summary.mode = outcome.mode;
        if (outcome.binarized) {
            const OptimalityCall call =
                classify_optimality(outcome, pattern, ext.optimal_window_ms, ext.margin);
            summary.optimal = call.is_optimal;
        }
    });

    std::vector<double> converged_spikes;
    std::uint32_t n_optimal = 0;
    for (const RunSummary& s : cell.runs) {
        if (s.optimal) ++n_optimal;
        if (s.divergent) ++cell.n_divergent;
        if (s.binarized) converged_spikes.push_back(s.post_spikes_per_presentation);
    }
    cell.p = n_runs > 0 ? static_cast<double>(n_optimal) / static_cast<double>(n_runs) : 0.0;
    cell.median_spikes = median(std::move(converged_spikes));
    cell.mode = mode_from_median_spikes(cell.median_spikes);
    return cell;
}

ModeSweepResult sweep_modes(const std::vector<double>& theta_grid,
                            const std::vector<double>& w_out_grid, std::uint64_t n_runs,
                            const StdpExternals& externals) {
    for (const auto& grid : {theta_grid, w_out_grid}) {
        if (grid.empty()) throw std::invalid_argument("sweep_modes: empty grid");
    }
    for (double theta : theta_grid)
        if (!(theta > 0.0)) throw std::invalid_argument("sweep_modes: thresholds must be positive");
    for (double w : w_out_grid)
        if (!(w < 0.0)) throw std::invalid_argument("sweep_modes: w_out values must be negative");

    ModeSweepResult sweep;
    sweep.theta_grid = theta_grid;
    sweep.w_out_grid = w_out_grid;
    sweep.cells.resize(theta_grid.size() * w_out_grid.size());

    // Runs inside a cell already parallelize; iterate cells sequentially so
    // the pool is not oversubscribed.
    for (std::size_t ti = 0; ti < theta_grid.size(); ++ti) {
        for (std::size_t wj = 0; wj < w_out_grid.size(); ++wj) {
            sweep.cells[ti * w_out_grid.size() + wj] =
                run_mode_cell(theta_grid[ti], w_out_grid[wj], n_runs, externals);
        }
    }
    return sweep;
}

std::vector<double> geometric_grid(double lo, double hi, double ratio) {
    if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("geometric_grid: need 0 < lo <= hi");
    if (!(ratio > 1.0)) throw std::invalid_argument("geometric_grid: ratio must exceed 1");
    std::vector<double> grid;
    for (double v = lo; v <= hi * (1.0 + 1e-9); v *= ratio) grid.push_back(v);
    return grid;
}

std::string to_json(const LearningOutcome& outcome) {
    std::string json = "{\n";
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "  \"n_presentations\": %llu,\n  \"binarized\": %s,\n  \"divergent\": %s,\n"
                  "  \"is_optimal\": %s,\n  \"mode\": %d,\n"
                  "  \"post_spikes_per_presentation\": %.17g,\n"
                  "  \"n_post_spikes\": %zu,\n  \"n_reinforced\": %zu,\n",
                  static_cast<unsigned long long>(outcome.n_presentations),
                  outcome.binarized ? "true" : "false", outcome.divergent ? "true" : "false",
                  outcome.is_optimal ? "true" : "false", outcome.mode,
                  outcome.post_spikes_per_presentation, outcome.post_spike_times_ms.size(),
                  outcome.reinforced_set.size());
    json += buf;
    if (outcome.matched_window) {
        std::snprintf(buf, sizeof buf,
                      "  \"matched_window\": {\"start_ms\": %.17g, \"duration_ms\": %.17g},\n",
                      outcome.matched_window->start_ms, outcome.matched_window->duration_ms);
        json += buf;
    } else {
        json += "  \"matched_window\": null,\n";
    }
    json += "  \"reinforced_set\": [";
    for (std::size_t i = 0; i < outcome.reinforced_set.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%u", i == 0 ? "" : ",", outcome.reinforced_set[i]);
        json += buf;
    }
    json += "]\n}\n";
    return json;
}

void write_mode_sweep_csv(std::ostream& os, const ModeSweepResult& sweep) {
    os << "theta,w_out,p,mode,n_runs,n_divergent\n";
    char buf[160];
    for (std::size_t ti = 0; ti < sweep.theta_grid.size(); ++ti) {
        for (std::size_t wj = 0; wj < sweep.w_out_grid.size(); ++wj) {
            const CellOutcome& c = sweep.cell(ti, wj);
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.6g,%d,%zu,%u\n", c.theta, c.w_out, c.p,
                          c.mode, c.runs.size(), c.n_divergent);
            os << buf;
        }
    }
}

} // namespace patdet
