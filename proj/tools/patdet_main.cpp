// Command-line runner: every experiment in the library as a subcommand, with
// reproducible seeds, flat key=value config files and CSV/JSON artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "patdet/analytic.hpp"
#include "patdet/experiments.hpp"
#include "patdet/lif.hpp"
#include "patdet/optimizer.hpp"
#include "patdet/spike_io.hpp"
#include "patdet/stdp.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// 0 = success, 1 = an acceptance-style check failed, 2 = environment/I-O.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitEnvironment = 2;

void add_config_option(CLI::App* cmd) {
    cmd->set_config("--config", "", "Read options from a key=value file");
    cmd->allow_config_extras(CLI::config_extras_mode::error);
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

// The manifest is the resolved configuration (defaults included) in the same
// format --config reads, so a run can be reproduced byte-for-byte from it.
void write_manifest(const fs::path& dir, CLI::App* cmd) {
    std::ofstream os(dir / "manifest.ini");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
    os << "# patdet " << kVersion << " -- " << cmd->get_name() << "\n";
    os << cmd->config_to_str(true, false);
    if (!os) throw std::runtime_error("manifest write failed");
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

struct ValidateOptions {
    patdet::ValidationParams params;
    std::string out = "out-validate";
    bool dump_traces = false;
};

int cmd_validate(const ValidateOptions& opt, CLI::App* cmd) {
    const fs::path dir = prepare_out_dir(opt.out);
    write_manifest(dir, cmd);

    std::fprintf(stderr, "validate: %zu taus x %zu strategies, %llu patterns x %llu presentations\n",
                 opt.params.taus_ms.size(), opt.params.strategies.size(),
                 static_cast<unsigned long long>(opt.params.n_patterns),
                 static_cast<unsigned long long>(opt.params.n_presentations));

    const auto points = patdet::run_validation(opt.params);
    {
        std::ofstream os(dir / "validate.csv", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write validate.csv");
        patdet::write_validation_csv(os, points);
    }

    if (opt.dump_traces) {
        // One instrumented run: first pattern, first strategy, first tau.
        const auto& p = opt.params;
        const patdet::FrozenPattern pattern = patdet::freeze_pattern(
            patdet::PoissonConfig{p.n_afferents, p.rate_hz, patdet::derive_seed(p.seed, 31, 0)},
            p.pattern_ms);
        const auto weights =
            patdet::select_afferents(pattern, p.strategies.front(), 0.0, p.pattern_ms);
        patdet::LifConfig config;
        config.tau_ms = p.taus_ms.front();
        config.dt_bin_ms = p.dt_bin_ms;
        patdet::SnrProtocol protocol;
        protocol.n_presentations = p.n_presentations;
        protocol.period_ms = p.period_ms > 0.0 ? p.period_ms
                                               : patdet::validation_period_ms(p, config.tau_ms);
        protocol.noise =
            patdet::PoissonConfig{p.n_afferents, p.rate_hz, patdet::derive_seed(p.seed, 32, 0)};
        protocol.jitter =
            patdet::JitterConfig{p.jitter_half_width_ms, patdet::derive_seed(p.seed, 33, 0)};

        std::vector<float> trace;
        std::vector<double> peaks;
        patdet::TraceSink sink{&trace, &peaks};
        patdet::measure_snr(pattern, weights, config, protocol, &sink);

        std::ofstream ts(dir / "potential_trace.f32", std::ios::binary);
        ts.write(reinterpret_cast<const char*>(trace.data()),
                 static_cast<std::streamsize>(trace.size() * sizeof(float)));
        std::ofstream vs(dir / "presentation_peaks.csv");
        vs << "presentation_index,v_max\n";
        for (std::size_t i = 0; i < peaks.size(); ++i) vs << i << "," << peaks[i] << "\n";
    }

    const bool ok = patdet::validation_passes(points);
    std::fprintf(stderr, "validate: %s\n", ok ? "all points within tolerance" : "TOLERANCE EXCEEDED");
    return ok ? kExitOk : kExitCheckFailed;
}

struct OptimizeOptions {
    double rate_hz = 3.2;
    double jitter_ms = 3.2;
    std::uint32_t n_afferents = 10000;
    std::uint32_t max_strategy = 5;
    std::string out;
    bool verify = false;
};

int cmd_optimize(const OptimizeOptions& opt, CLI::App* cmd) {
    const auto result =
        patdet::optimize(opt.rate_hz, opt.jitter_ms, opt.n_afferents, opt.max_strategy);
    const std::string json = patdet::to_json(result);
    std::cout << json;
    if (!opt.out.empty()) {
        const fs::path dir = prepare_out_dir(opt.out);
        write_manifest(dir, cmd);
        write_text_file(dir / "optimize.json", json);
    }
    if (opt.verify) {
        const bool confirmed =
            patdet::verify_optimum(result, opt.rate_hz, opt.jitter_ms, opt.n_afferents);
        std::fprintf(stderr, "optimize: local grid verification %s\n",
                     confirmed ? "confirmed" : "FAILED");
        if (!confirmed) return kExitCheckFailed;
    }
    return kExitOk;
}

struct MapOptions {
    double f_min = 0.1, f_max = 100.0;
    double t_min = 0.1, t_max = 100.0;
    std::size_t points = 25;
    std::uint32_t n_afferents = 10000;
    std::uint32_t max_strategy = 5;
    unsigned jobs = 0;
    std::string out = "out-map";
};

int cmd_map(const MapOptions& opt, CLI::App* cmd) {
    const fs::path dir = prepare_out_dir(opt.out);
    write_manifest(dir, cmd);

    const auto f_grid = patdet::log_grid(opt.f_min, opt.f_max, opt.points);
    const auto t_grid = patdet::log_grid(opt.t_min, opt.t_max, opt.points);
    std::fprintf(stderr, "map: solving %zu x %zu cells\n", f_grid.size(), t_grid.size());
    const auto sweep =
        patdet::sweep_plane(f_grid, t_grid, opt.n_afferents, opt.max_strategy, opt.jobs);

    {
        std::ofstream os(dir / "map.csv", std::ios::binary);
        patdet::write_sweep_csv(os, sweep);
    }
    const std::pair<const char*, patdet::SweepField> matrices[] = {
        {"map_strategy.csv", patdet::SweepField::strategy},
        {"map_tau.csv", patdet::SweepField::tau},
        {"map_window_over_tau.csv", patdet::SweepField::window_over_tau},
        {"map_snr.csv", patdet::SweepField::snr},
    };
    for (const auto& [name, field] : matrices) {
        std::ofstream os(dir / name, std::ios::binary);
        patdet::write_sweep_matrix(os, sweep, field);
    }
    return kExitOk;
}

struct StdpRunOptions {
    patdet::StdpExternals ext;
    double theta = 250.0;
    double w_out = -1.6e-3;
    double initial_weight = 0.0; // 0 = derive from theta
    std::uint64_t snapshot_every = 0;
    std::string out = "out-stdp";
};

int cmd_stdp_run(const StdpRunOptions& opt, CLI::App* cmd) {
    const fs::path dir = prepare_out_dir(opt.out);
    write_manifest(dir, cmd);

    const patdet::StdpExternals& ext = opt.ext;
    const patdet::FrozenPattern pattern = patdet::freeze_pattern(
        patdet::PoissonConfig{ext.n_afferents, ext.rate_hz, patdet::derive_seed(ext.seed, 21, 0)},
        ext.pattern_ms);
    patdet::save_spikes_csv((dir / "pattern.csv").string(), pattern.spikes);

    patdet::LearnProtocol protocol;
    protocol.noise = patdet::PoissonConfig{ext.n_afferents, ext.rate_hz,
                                           patdet::derive_seed(ext.seed, 22, 0)};
    protocol.jitter = patdet::JitterConfig{ext.jitter_half_width_ms,
                                           patdet::derive_seed(ext.seed, 23, 0)};
    protocol.period_ms = ext.period_ms;

    patdet::LifConfig lif;
    lif.tau_ms = ext.tau_ms;
    lif.dt_bin_ms = ext.dt_bin_ms;

    patdet::StdpConfig stdp;
    stdp.trace_increment = ext.trace_increment;
    stdp.trace_tau_ms = ext.trace_tau_ms;
    stdp.homeostatic_term = opt.w_out;
    stdp.threshold = opt.theta;
    stdp.initial_weight =
        opt.initial_weight > 0.0
            ? opt.initial_weight
            : patdet::initial_weight_for(opt.theta, lif, ext.n_afferents, ext.rate_hz);

    std::ofstream snapshots;
    patdet::WeightSnapshotFn on_snapshot;
    if (opt.snapshot_every != 0) {
        snapshots.open(dir / "weight_snapshots.f32", std::ios::binary);
        if (!snapshots) throw std::runtime_error("cannot write weight_snapshots.f32");
        on_snapshot = [&](std::uint64_t, const std::vector<double>& w) {
            std::vector<float> row(w.begin(), w.end());
            snapshots.write(reinterpret_cast<const char*>(row.data()),
                            static_cast<std::streamsize>(row.size() * sizeof(float)));
        };
    }

    std::fprintf(stderr, "stdp-run: theta=%g w_out=%g w0=%g, %llu presentations\n", opt.theta,
                 opt.w_out, stdp.initial_weight,
                 static_cast<unsigned long long>(ext.n_presentations));
    patdet::LearningOutcome outcome = patdet::run_learning(
        pattern, protocol, lif, stdp, ext.n_presentations, opt.snapshot_every, on_snapshot);
    if (outcome.binarized) {
        const auto call =
            patdet::classify_optimality(outcome, pattern, ext.optimal_window_ms, ext.margin);
        outcome.is_optimal = call.is_optimal;
        outcome.matched_window = call.window;
    }

    write_text_file(dir / "outcome.json", patdet::to_json(outcome));
    {
        std::ofstream os(dir / "post_spikes.csv", std::ios::binary);
        os << "time_ms\n";
        char buf[48];
        for (double t : outcome.post_spike_times_ms) {
            std::snprintf(buf, sizeof buf, "%.10g\n", t);
            os << buf;
        }
    }
    std::fprintf(stderr, "stdp-run: binarized=%d optimal=%d mode=%d spikes/presentation=%g\n",
                 outcome.binarized, outcome.is_optimal, outcome.mode,
                 outcome.post_spikes_per_presentation);
    return kExitOk;
}

struct StdpSweepOptions {
    patdet::StdpExternals ext;
    double theta_min = 200.0, theta_max = 450.0;
    double ltd_min = 1.0e-3, ltd_max = 5.0e-3; // |w_out| range
    double ratio = 1.1;
    std::uint64_t runs = 50;
    std::string out = "out-stdp-sweep";
};

int cmd_stdp_sweep(const StdpSweepOptions& opt, CLI::App* cmd) {
    const fs::path dir = prepare_out_dir(opt.out);
    write_manifest(dir, cmd);

    const auto theta_grid = patdet::geometric_grid(opt.theta_min, opt.theta_max, opt.ratio);
    auto ltd_grid = patdet::geometric_grid(opt.ltd_min, opt.ltd_max, opt.ratio);
    std::vector<double> w_out_grid;
    w_out_grid.reserve(ltd_grid.size());
    for (double v : ltd_grid) w_out_grid.push_back(-v);

    std::fprintf(stderr, "stdp-sweep: %zu x %zu cells, %llu runs each\n", theta_grid.size(),
                 w_out_grid.size(), static_cast<unsigned long long>(opt.runs));
    const auto sweep = patdet::sweep_modes(theta_grid, w_out_grid, opt.runs, opt.ext);
    std::ofstream os(dir / "sweep.csv", std::ios::binary);
    patdet::write_mode_sweep_csv(os, sweep);
    return kExitOk;
}

void add_externals_options(CLI::App* cmd, patdet::StdpExternals& ext) {
    cmd->add_option("-N,--n-afferents", ext.n_afferents, "Number of afferents");
    cmd->add_option("-f,--rate", ext.rate_hz, "Afferent firing rate (Hz)");
    cmd->add_option("-T,--jitter", ext.jitter_half_width_ms, "Jitter half-width (ms)");
    cmd->add_option("--tau", ext.tau_ms, "Membrane time constant (ms)");
    cmd->add_option("--dt", ext.dt_bin_ms, "Integration bin (ms)");
    cmd->add_option("-L,--pattern", ext.pattern_ms, "Pattern duration (ms)");
    cmd->add_option("--period", ext.period_ms, "Presentation period (ms)");
    cmd->add_option("--da-pre", ext.trace_increment, "Trace increment per presynaptic spike");
    cmd->add_option("--tau-pre", ext.trace_tau_ms, "Trace time constant (ms)");
    cmd->add_option("--presentations", ext.n_presentations, "Number of pattern presentations");
    cmd->add_option("--optimal-window", ext.optimal_window_ms,
                    "Window duration the reinforced set must match (ms)");
    cmd->add_option("--margin", ext.margin, "Relative margin on the window duration");
    cmd->add_option("--seed", ext.seed, "Master seed");
    cmd->add_option("--jobs", ext.jobs, "Worker threads (0 = all cores)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal spike-pattern coincidence detection: closed-form SNR, parameter "
                 "optimization, simulation, and STDP learning"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // --- validate ---------------------------------------------------------
    ValidateOptions val;
    auto* validate = app.add_subcommand(
        "validate", "Compare simulated SNR against the closed form over a tau grid");
    validate->add_option("-N,--n-afferents", val.params.n_afferents, "Number of afferents");
    validate->add_option("-f,--rate", val.params.rate_hz, "Afferent firing rate (Hz)");
    validate->add_option("-T,--jitter", val.params.jitter_half_width_ms, "Jitter half-width (ms)");
    validate->add_option("-L,--pattern", val.params.pattern_ms,
                         "Pattern duration = selection window (ms)");
    validate->add_option("--taus", val.params.taus_ms, "Membrane time constants to test (ms)");
    validate->add_option("--strategies", val.params.strategies, "Strategy numbers to test");
    validate->add_option("--patterns", val.params.n_patterns, "Random patterns per point");
    validate->add_option("--presentations", val.params.n_presentations,
                         "Presentations per pattern");
    validate->add_option("--period", val.params.period_ms,
                         "Presentation period (ms); 0 derives it from tau");
    validate->add_option("--dt", val.params.dt_bin_ms, "Integration bin (ms)");
    validate->add_option("--seed", val.params.seed, "Master seed");
    validate->add_option("--jobs", val.params.jobs, "Worker threads (0 = all cores)");
    validate->add_option("-o,--out", val.out, "Output directory");
    validate->add_flag("--dump-traces", val.dump_traces,
                       "Also dump one instrumented potential trace");
    add_config_option(validate);

    // --- optimize ---------------------------------------------------------
    OptimizeOptions opt;
    auto* optimize = app.add_subcommand(
        "optimize", "Maximize the closed-form SNR over (strategy, tau, window)");
    optimize->add_option("-f,--rate", opt.rate_hz, "Afferent firing rate (Hz)");
    optimize->add_option("-T,--jitter", opt.jitter_ms, "Jitter half-width (ms)");
    optimize->add_option("-N,--n-afferents", opt.n_afferents, "Number of afferents");
    optimize->add_option("--max-strategy", opt.max_strategy, "Largest strategy number to try");
    optimize->add_option("-o,--out", opt.out, "Output directory (optional)");
    optimize->add_flag("--verify", opt.verify, "Check the result against a local grid");
    add_config_option(optimize);

    // --- map --------------------------------------------------------------
    MapOptions map;
    auto* map_cmd =
        app.add_subcommand("map", "Optimal parameters over a log-spaced (f, T) plane");
    map_cmd->add_option("--f-min", map.f_min, "Lowest rate (Hz)");
    map_cmd->add_option("--f-max", map.f_max, "Highest rate (Hz)");
    map_cmd->add_option("--t-min", map.t_min, "Lowest jitter half-width (ms)");
    map_cmd->add_option("--t-max", map.t_max, "Highest jitter half-width (ms)");
    map_cmd->add_option("--points", map.points, "Grid points per axis");
    map_cmd->add_option("-N,--n-afferents", map.n_afferents, "Number of afferents");
    map_cmd->add_option("--max-strategy", map.max_strategy, "Largest strategy number to try");
    map_cmd->add_option("--jobs", map.jobs, "Worker threads (0 = all cores)");
    map_cmd->add_option("-o,--out", map.out, "Output directory");
    add_config_option(map_cmd);

    // --- stdp-run ---------------------------------------------------------
    StdpRunOptions run;
    auto* stdp_run = app.add_subcommand("stdp-run", "One STDP learning run");
    add_externals_options(stdp_run, run.ext);
    stdp_run->add_option("--theta", run.theta, "LIF threshold (summed-weight units)");
    stdp_run->add_option("--w-out", run.w_out, "Homeostatic term (negative)");
    stdp_run->add_option("--initial-weight", run.initial_weight,
                         "Uniform initial weight; 0 derives it from theta");
    stdp_run->add_option("--snapshot-every", run.snapshot_every,
                         "Dump weights every k presentations (0 = off)");
    stdp_run->add_option("-o,--out", run.out, "Output directory");
    add_config_option(stdp_run);

    // --- stdp-sweep -------------------------------------------------------
    StdpSweepOptions sweep;
    auto* stdp_sweep =
        app.add_subcommand("stdp-sweep", "Proportion of optimal runs over a theta x w_out grid");
    add_externals_options(stdp_sweep, sweep.ext);
    stdp_sweep->add_option("--theta-min", sweep.theta_min, "Lowest threshold");
    stdp_sweep->add_option("--theta-max", sweep.theta_max, "Highest threshold");
    stdp_sweep->add_option("--ltd-min", sweep.ltd_min, "Lowest |w_out|");
    stdp_sweep->add_option("--ltd-max", sweep.ltd_max, "Highest |w_out|");
    stdp_sweep->add_option("--ratio", sweep.ratio, "Geometric grid ratio");
    stdp_sweep->add_option("--runs", sweep.runs, "Runs per cell");
    stdp_sweep->add_option("-o,--out", sweep.out, "Output directory");
    add_config_option(stdp_sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(val, validate);
        if (optimize->parsed()) return cmd_optimize(opt, optimize);
        if (map_cmd->parsed()) return cmd_map(map, map_cmd);
        if (stdp_run->parsed()) return cmd_stdp_run(run, stdp_run);
        if (stdp_sweep->parsed()) return cmd_stdp_sweep(sweep, stdp_sweep);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitEnvironment;
    }
    return kExitOk;
}
