#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "patdet/rng.hpp"
#include "patdet/stdp.hpp"

using namespace patdet;

namespace {

// Background rate that produces no spikes in any realistic run but still
// satisfies the positive-rate contract.
constexpr double kSilentRate = 1e-12;

FrozenPattern make_pattern(std::uint32_t n, double duration, std::vector<Spike> spikes) {
    sort_spikes(spikes);
    return FrozenPattern{n, duration, std::move(spikes)};
}

LearnProtocol silent_protocol(std::uint32_t n, double period = 400.0) {
    LearnProtocol protocol;
    protocol.noise = PoissonConfig{n, kSilentRate, 1};
    protocol.jitter = JitterConfig{0.0, 2};
    protocol.period_ms = period;
    return protocol;
}

LifConfig lif_default() {
    LifConfig lif;
    lif.tau_ms = 18.0;
    lif.dt_bin_ms = 0.1;
    return lif;
}

StdpConfig stdp_base(double theta, double w_out, double w0) {
    StdpConfig stdp;
    stdp.trace_increment = 0.01;
    stdp.trace_tau_ms = 20.0;
    stdp.homeostatic_term = w_out;
    stdp.threshold = theta;
    stdp.initial_weight = w0;
    return stdp;
}

StdpExternals mode_externals(std::uint64_t seed) {
    StdpExternals ext;
    ext.seed = seed;
    return ext; // defaults already describe the reference setup
}

} // namespace

TEST_CASE("a triggering spike contributes its fresh trace to its own update") {
    const auto pattern = make_pattern(1, 10.0, {{0, 5.0}});
    const auto outcome = run_learning(pattern, silent_protocol(1), lif_default(),
                                      stdp_base(0.4, -0.0035, 0.5), 1);
    REQUIRE(outcome.post_spike_times_ms.size() == 1);
    CHECK(outcome.final_weights[0] == doctest::Approx(0.5 + 0.01 - 0.0035).epsilon(1e-12));
    CHECK(outcome.post_spikes_per_presentation == 1.0);
}

TEST_CASE("weight updates clip at one") {
    // Two simultaneous spikes stack the trace to 0.02 before the update.
    const auto pattern = make_pattern(1, 10.0, {{0, 5.0}, {0, 5.0}});
    const auto outcome = run_learning(pattern, silent_protocol(1), lif_default(),
                                      stdp_base(1.5, -0.0016, 0.999), 1);
    REQUIRE(outcome.post_spike_times_ms.size() == 1);
    CHECK(outcome.final_weights[0] == 1.0);
    CHECK(outcome.max_weight_seen == 1.0);
    CHECK(outcome.min_weight_seen >= 0.0);
}

TEST_CASE("traces decay with the per-bin factor between touches") {
    // Afferent 0 spikes 7.3 ms before afferent 1 triggers the postsynaptic
    // spike; its potentiation reads the trace through 73 decay bins.
    const double delta_bins = 73.0;
    const auto pattern = make_pattern(2, 20.0, {{0, 5.0}, {1, 5.0 + delta_bins * 0.1}});
    const auto outcome = run_learning(pattern, silent_protocol(2), lif_default(),
                                      stdp_base(0.7, -0.0035, 0.6), 1);
    REQUIRE(outcome.post_spike_times_ms.size() == 1);

    const double decayed = 0.01 * std::pow(1.0 - 0.1 / 20.0, delta_bins);
    CHECK(outcome.final_weights[0] == doctest::Approx(0.6 + decayed - 0.0035).epsilon(1e-12));
    CHECK(outcome.final_weights[1] == doctest::Approx(0.6 + 0.01 - 0.0035).epsilon(1e-12));
    // The powered per-bin factor stays within the expected distance of the
    // exact exponential.
    CHECK(std::abs(std::pow(1.0 - 0.1 / 20.0, delta_bins) - std::exp(-7.3 / 20.0)) < 2e-3);
}

TEST_CASE("initial weight solves the two-sigma starting condition") {
    const LifConfig lif = lif_default();
    for (double theta : {370.0, 250.0}) {
        const double w0 = initial_weight_for(theta, lif, 10000, 3.2);
        const double drive = 0.018 * 3.2 * 10000.0;
        CHECK(drive * w0 ==
              doctest::Approx(theta + 2.0 * w0 * std::sqrt(drive / 2.0)).epsilon(1e-12));
    }
    CHECK(initial_weight_for(370.0, lif, 10000, 3.2) == doctest::Approx(0.6826).epsilon(1e-3));
    CHECK(initial_weight_for(250.0, lif, 10000, 3.2) == doctest::Approx(0.4612).epsilon(1e-3));
    CHECK(initial_weight_for(1e-6, lif, 10000, 3.2) < 1e-8);

    CHECK_THROWS_AS(initial_weight_for(600.0, lif, 10000, 3.2), std::invalid_argument);
    CHECK_THROWS_AS(initial_weight_for(10.0, lif, 10, 1.0), std::invalid_argument);
}

TEST_CASE("optimality classification on a hand-built pattern") {
    const auto pattern =
        make_pattern(6, 100.0, {{0, 2.0}, {1, 10.0}, {2, 18.0}, {3, 40.0}, {4, 60.0}});
    LearningOutcome outcome;
    outcome.binarized = true;

    SUBCASE("exact strategy-1 set within the duration margin") {
        outcome.reinforced_set = {0, 1, 2};
        const auto call = classify_optimality(outcome, pattern, 20.0, 0.1);
        CHECK(call.is_optimal);
        REQUIRE(call.window.has_value());
        CHECK(call.window->start_ms == doctest::Approx(0.0));
        CHECK(call.window->duration_ms == doctest::Approx(18.0));
    }
    SUBCASE("set needs a window longer than the margin allows") {
        outcome.reinforced_set = {0, 1, 2, 3, 4};
        CHECK(!classify_optimality(outcome, pattern, 20.0, 0.1).is_optimal);
    }
    SUBCASE("empty reinforced set") {
        outcome.reinforced_set = {};
        CHECK(!classify_optimality(outcome, pattern, 20.0, 0.1).is_optimal);
    }
    SUBCASE("a skipped afferent inside the span breaks set equality") {
        outcome.reinforced_set = {0, 2};
        CHECK(!classify_optimality(outcome, pattern, 20.0, 0.1).is_optimal);
    }
    SUBCASE("duration margin is enforced") {
        outcome.reinforced_set = {0, 1, 2};
        CHECK(!classify_optimality(outcome, pattern, 10.0, 0.1).is_optimal);
    }
    SUBCASE("a reinforced afferent that never fires disqualifies the run") {
        outcome.reinforced_set = {0, 1, 5};
        CHECK(!classify_optimality(outcome, pattern, 20.0, 0.1).is_optimal);
    }
    SUBCASE("interior windows are found") {
        outcome.reinforced_set = {1, 2};
        const auto call = classify_optimality(outcome, pattern, 16.0, 0.1);
        CHECK(call.is_optimal);
        REQUIRE(call.window.has_value());
        CHECK(call.window->start_ms == doctest::Approx(2.1));
    }
    SUBCASE("classification refuses non-binarized outcomes") {
        outcome.binarized = false;
        outcome.reinforced_set = {0};
        CHECK_THROWS_AS(classify_optimality(outcome, pattern, 20.0, 0.1),
                        std::invalid_argument);
    }
}

TEST_CASE("learning runs are reproducible") {
    const StdpExternals ext = mode_externals(71);
    const auto pattern = freeze_pattern(
        PoissonConfig{ext.n_afferents, ext.rate_hz, derive_seed(ext.seed, 21, 0)},
        ext.pattern_ms);
    LearnProtocol protocol;
    protocol.noise =
        PoissonConfig{ext.n_afferents, ext.rate_hz, derive_seed(ext.seed, 22, 0)};
    protocol.jitter = JitterConfig{ext.jitter_half_width_ms, derive_seed(ext.seed, 23, 0)};
    protocol.period_ms = ext.period_ms;

    const auto a = run_learning(pattern, protocol, lif_default(),
                                stdp_base(250.0, -1.6e-3, 0.4612), 150);
    const auto b = run_learning(pattern, protocol, lif_default(),
                                stdp_base(250.0, -1.6e-3, 0.4612), 150);
    CHECK(a.final_weights == b.final_weights);
    CHECK(a.post_spike_times_ms == b.post_spike_times_ms);
}

TEST_CASE("reference mode-2 cell: convergence, bounds, selectivity") {
    StdpExternals ext = mode_externals(2025);
    const auto cell = run_mode_cell(250.0, -1.6e-3, 3, ext);
    REQUIRE(cell.runs.size() == 3);
    CHECK(cell.n_divergent == 0);

    int n_binarized = 0, n_optimal = 0;
    for (const auto& run : cell.runs) {
        if (run.binarized) ++n_binarized;
        if (run.optimal) ++n_optimal;
    }
    CHECK(n_binarized >= 2);
    CHECK(n_optimal >= 1);
    CHECK(cell.p == doctest::Approx(n_optimal / 3.0));

    // Converged detectors answer the pattern, not the noise.
    const auto pattern = freeze_pattern(
        PoissonConfig{ext.n_afferents, ext.rate_hz, derive_seed(ext.seed, 21, 0)},
        ext.pattern_ms);
    LearnProtocol protocol;
    protocol.noise =
        PoissonConfig{ext.n_afferents, ext.rate_hz, derive_seed(ext.seed, 22, 0)};
    protocol.jitter = JitterConfig{ext.jitter_half_width_ms, derive_seed(ext.seed, 23, 0)};
    protocol.period_ms = ext.period_ms;
    StdpConfig stdp = stdp_base(250.0, -1.6e-3,
                                initial_weight_for(250.0, lif_default(), ext.n_afferents,
                                                   ext.rate_hz));
    const auto outcome =
        run_learning(pattern, protocol, lif_default(), stdp, ext.n_presentations);
    REQUIRE(outcome.binarized);
    CHECK(outcome.min_weight_seen >= 0.0);
    CHECK(outcome.max_weight_seen <= 1.0);
    for (double w : outcome.final_weights) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
    CHECK(outcome.post_spikes_per_presentation >= 1.0);

    // Postsynaptic rate outside the presentation windows, last 50
    // presentations: below 0.1 Hz.
    const double window_end = ext.pattern_ms + ext.jitter_half_width_ms + 3.0 * ext.tau_ms;
    const double t_begin = (500.0 - 50.0) * ext.period_ms;
    std::size_t outside = 0;
    for (double t : outcome.post_spike_times_ms) {
        if (t < t_begin) continue;
        const double pos = std::fmod(t, ext.period_ms);
        if (pos > window_end && pos < ext.period_ms - ext.jitter_half_width_ms) ++outside;
    }
    const double outside_seconds = 50.0 * (ext.period_ms - window_end) / 1000.0;
    CHECK(static_cast<double>(outside) / outside_seconds < 0.1);
}

TEST_CASE("presentation spacing matters early in learning") {
    // Slower presentation of the same patterns weakens learning.
    StdpExternals fast = mode_externals(505);
    StdpExternals slow = fast;
    slow.period_ms = 800.0;

    const std::uint64_t seeds = 12;
    const auto cell_fast = run_mode_cell(250.0, -1.6e-3, seeds, fast);
    const auto cell_slow = run_mode_cell(250.0, -1.6e-3, seeds, slow);
    int fast_optimal = 0, slow_optimal = 0;
    for (const auto& run : cell_fast.runs) fast_optimal += run.optimal ? 1 : 0;
    for (const auto& run : cell_slow.runs) slow_optimal += run.optimal ? 1 : 0;
    CHECK(fast_optimal > slow_optimal);
}

TEST_CASE("geometric grid construction") {
    const auto grid = geometric_grid(200.0, 450.0, 1.1);
    REQUIRE(grid.size() == 9);
    CHECK(grid.front() == 200.0);
    CHECK(grid.back() == doctest::Approx(200.0 * std::pow(1.1, 8)));
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] / grid[i - 1] == doctest::Approx(1.1));
}

TEST_CASE("outcome serialization is stable") {
    LearningOutcome outcome;
    outcome.binarized = true;
    outcome.mode = 2;
    outcome.post_spikes_per_presentation = 2.0;
    outcome.reinforced_set = {3, 5, 9};
    outcome.matched_window = MatchedWindow{1.5, 21.0};
    const auto json = to_json(outcome);
    CHECK(json == to_json(outcome));
    CHECK(json.find("\"mode\": 2") != std::string::npos);
    CHECK(json.find("\"matched_window\"") != std::string::npos);
}

TEST_CASE("configuration guards") {
    CHECK_THROWS_AS(stdp_base(250.0, 0.0016, 0.5).validate(), std::invalid_argument);
    CHECK_THROWS_AS(stdp_base(-1.0, -0.0016, 0.5).validate(), std::invalid_argument);
    CHECK_THROWS_AS(stdp_base(250.0, -0.0016, 1.5).validate(), std::invalid_argument);

    const auto pattern = make_pattern(1, 10.0, {{0, 5.0}});
    LifConfig with_threshold = lif_default();
    with_threshold.threshold = 1.0;
    CHECK_THROWS_AS(run_learning(pattern, silent_protocol(1), with_threshold,
                                 stdp_base(0.4, -0.0035, 0.5), 1),
                    std::invalid_argument);
}
