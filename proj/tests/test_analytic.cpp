#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ode_oracle.hpp"
#include "patdet/analytic.hpp"
#include "patdet/rng.hpp"

using namespace patdet;
using patdet::testing::ode_peak;

namespace {

DetectorParams make_params(std::uint32_t n, double f, double T, std::uint32_t strategy,
                           double tau, double window) {
    DetectorParams p;
    p.n_afferents = n;
    p.rate_hz = f;
    p.jitter_half_width_ms = T;
    p.strategy = strategy;
    p.tau_ms = tau;
    p.window_ms = window;
    return p;
}

} // namespace

TEST_CASE("poisson tail basics") {
    CHECK(poisson_tail(0.5, 0) == 1.0);
    CHECK(poisson_tail(0.1, 1) == doctest::Approx(1.0 - std::exp(-0.1)).epsilon(1e-14));
    CHECK(poisson_tail(0.1, 2) ==
          doctest::Approx(1.0 - std::exp(-0.1) * 1.1).epsilon(1e-12));
    CHECK(poisson_tail(2.0, 200) < 1e-200);
}

TEST_CASE("selected count matches a Monte Carlo draw and the frozen value") {
    const auto params = make_params(10000, 5.0, 0.0, 1, 18.0, 20.0);
    const double m = selected_count(params);
    CHECK(m == doctest::Approx(951.6258).epsilon(1e-5));

    // Monte Carlo oracle: fraction of Poisson(0.1) draws that reach 1.
    std::mt19937_64 gen(2024);
    std::poisson_distribution<int> draw(0.1);
    const int trials = 1000000;
    int hits = 0;
    for (int i = 0; i < trials; ++i)
        if (draw(gen) >= 1) ++hits;
    const double p_mc = static_cast<double>(hits) / trials;
    const double se = std::sqrt(p_mc * (1.0 - p_mc) / trials);
    CHECK(std::abs(m / 10000.0 - p_mc) <= 4.0 * se);
}

TEST_CASE("selected count limits") {
    CHECK(selected_count(make_params(10000, 5.0, 0.0, 1, 18.0, 1e-9)) ==
          doctest::Approx(0.0).epsilon(1e-6));
    double previous = selected_count(make_params(10000, 5.0, 0.0, 1, 18.0, 20.0));
    for (std::uint32_t n = 2; n <= 12; ++n) {
        const double current = selected_count(make_params(10000, 5.0, 0.0, n, 18.0, 20.0));
        CHECK(current < previous);
        previous = current;
    }
    CHECK(previous < 1e-8);
}

TEST_CASE("effective rate: strategy 1 is exact, strategy 2 matches Monte Carlo") {
    CHECK(effective_rate(make_params(10000, 5.0, 0.0, 1, 18.0, 20.0)) == 10000 * 5.0);

    const double r2 = effective_rate(make_params(10000, 5.0, 0.0, 2, 18.0, 20.0));
    CHECK(r2 == doctest::Approx(4758.129).epsilon(1e-5));

    // Oracle: expected spikes retained per window divided by the window.
    // Retained = k when k >= 2, else 0.
    std::mt19937_64 gen(7);
    std::poisson_distribution<int> draw(0.1);
    const int trials = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < trials; ++i) {
        const int k = draw(gen);
        const double kept = k >= 2 ? static_cast<double>(k) : 0.0;
        sum += kept;
        sumsq += kept * kept;
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sumsq / trials - mean * mean) / trials);
    const double r_mc = 10000.0 * mean / 0.020; // per-afferent retained rate times N
    const double se_r = 10000.0 * se / 0.020;
    CHECK(std::abs(r2 - r_mc) <= 5.0 * se_r);
}

TEST_CASE("selected afferents are at least as active as average") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto params =
            make_params(1000, rng.uniform(0.5, 50.0), 0.0,
                        static_cast<std::uint32_t>(1 + rng.operator()() % 4),
                        rng.uniform(2.0, 100.0), rng.uniform(1.0, 200.0));
        const double m = selected_count(params);
        if (m < 1e-12) continue;
        CHECK(effective_rate(params) >= params.rate_hz * m * (1.0 - 1e-12));
    }
}

TEST_CASE("effective rate decreases strictly with the strategy number") {
    double previous = effective_rate(make_params(10000, 5.0, 0.0, 1, 18.0, 200.0));
    for (std::uint32_t n = 2; n <= 12; ++n) {
        const double current = effective_rate(make_params(10000, 5.0, 0.0, n, 18.0, 200.0));
        CHECK(current < previous);
        previous = current;
    }
}

TEST_CASE("trapezoid geometry: wide window, narrow window, no jitter") {
    const auto wide = trapezoid(20.0, 5.0); // window wider than the jitter spread
    CHECK(wide.t1_ms == doctest::Approx(10.0));
    CHECK(wide.t2_ms == doctest::Approx(10.0));
    CHECK(wide.t3_ms == doctest::Approx(10.0));
    CHECK(wide.plateau == doctest::Approx(1.0));

    const auto narrow = trapezoid(10.0, 10.0); // spread dominates
    CHECK(narrow.t1_ms == doctest::Approx(10.0));
    CHECK(narrow.t2_ms == doctest::Approx(10.0));
    CHECK(narrow.t3_ms == doctest::Approx(10.0));
    CHECK(narrow.plateau == doctest::Approx(0.5));

    const auto rect = trapezoid(15.0, 0.0);
    CHECK(rect.t1_ms == 0.0);
    CHECK(rect.t2_ms == doctest::Approx(15.0));
    CHECK(rect.t3_ms == 0.0);
    CHECK(rect.plateau == 1.0);
}

TEST_CASE("trapezoid area equals the window for random shapes") {
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const double window = rng.uniform(0.01, 500.0);
        const double jitter = rng.uniform(0.0, 250.0);
        const auto tz = trapezoid(window, jitter);
        CHECK(tz.area_ms() == doctest::Approx(window).epsilon(1e-12));
    }
}

TEST_CASE("no-jitter peak is the step response") {
    const auto peak = transient_peak(make_params(10000, 5.0, 0.0, 1, 18.0, 18.0));
    CHECK(peak.v_max == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK(peak.t_max_ms == doctest::Approx(18.0));
}

TEST_CASE("tiny jitter converges to the step response") {
    const double reference = 1.0 - std::exp(-20.0 / 18.0);
    double prev_err = 1.0;
    for (double eps : {1e-3, 1e-5, 1e-7}) {
        const auto peak = transient_peak(make_params(10000, 5.0, eps, 1, 18.0, 20.0));
        const double err = std::abs(peak.v_max - reference);
        CHECK(err < prev_err + 1e-15);
        prev_err = err;
    }
    CHECK(prev_err < 1e-7);
}

TEST_CASE("peak is continuous where the window equals the jitter spread") {
    for (double t_jitter : {2.0, 7.0, 31.0}) {
        const double window = 2.0 * t_jitter;
        const auto below =
            transient_peak(make_params(100, 5.0, t_jitter, 1, 18.0, window * (1.0 - 1e-9)));
        const auto above =
            transient_peak(make_params(100, 5.0, t_jitter, 1, 18.0, window * (1.0 + 1e-9)));
        CHECK(std::abs(below.v_max - above.v_max) < 1e-9);
    }
}

TEST_CASE("triangular case agrees with its closed form and the integrator") {
    for (double t_jitter : {4.0, 10.0, 25.0}) {
        const double tau = 18.0;
        const double window = 2.0 * t_jitter;
        const auto peak = transient_peak(make_params(100, 5.0, t_jitter, 1, tau, window));
        const double expected =
            1.0 - tau / window * std::log(2.0 - std::exp(-window / tau));
        CHECK(peak.v_max == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(peak.v_max - ode_peak(tau, window, t_jitter)) < 1e-4);
    }
}

TEST_CASE("closed-form peak matches the integrator over random parameters") {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const double tau = rng.uniform(2.0, 150.0);
        const double window = rng.uniform(1.0, 150.0);
        const double jitter = rng.uniform(0.05, 75.0);
        const auto peak = transient_peak(make_params(100, 5.0, jitter, 1, tau, window));
        CHECK(std::abs(peak.v_max - ode_peak(tau, window, jitter)) < 1e-4);
    }
}

TEST_CASE("peak grows with the window at fixed tau and jitter") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const double tau = rng.uniform(2.0, 100.0);
        const double jitter = rng.uniform(0.0, 40.0);
        double previous = 0.0;
        for (double window = 1.0; window <= 256.0; window *= 2.0) {
            const double v =
                transient_peak(make_params(100, 5.0, jitter, 1, tau, window)).v_max;
            CHECK(v >= previous - 1e-12);
            previous = v;
        }
    }
}

TEST_CASE("snr at the reference operating point") {
    // f = 3.2 Hz, T = 3.2 ms, strategy 1, tau = 18 ms, window = 23 ms.
    const auto report = snr_report(make_params(10000, 3.2, 3.2, 1, 18.0, 23.0));
    CHECK(report.snr > 72.0);
    CHECK(report.snr < 88.0);
    CHECK(report.snr == doctest::Approx(80.95).epsilon(2e-3));
    CHECK(report.selected_count == doctest::Approx(10000.0 * (1 - std::exp(-0.0736))).epsilon(1e-12));
    CHECK(report.noise_mean == doctest::Approx(0.018 * 3.2 * report.selected_count).epsilon(1e-12));
}

TEST_CASE("both algebraic routes to the snr agree") {
    Rng rng(31);
    for (int i = 0; i < 300; ++i) {
        const auto params = make_params(
            10000, rng.uniform(0.5, 40.0), rng.uniform(0.0, 30.0),
            static_cast<std::uint32_t>(1 + rng.operator()() % 3), rng.uniform(3.0, 120.0),
            rng.uniform(2.0, 200.0));
        const auto report = snr_report(params);
        // Independent route: v_max * (steady-state gap) / noise std.
        const double tau_s = params.tau_ms / 1000.0;
        const double gap =
            tau_s * (report.effective_rate_hz - params.rate_hz * report.selected_count);
        if (report.noise_std <= 0.0) continue;
        const double alternative = report.v_max * gap / report.noise_std;
        CHECK(report.snr == doctest::Approx(alternative).epsilon(1e-9));
    }
}

TEST_CASE("snr vanishes for tiny windows and for large strategy numbers") {
    CHECK(snr_report(make_params(10000, 5.0, 0.0, 1, 18.0, 1e-7)).snr < 1e-3);
    const double base = snr_report(make_params(10000, 5.0, 0.0, 1, 18.0, 20.0)).snr;
    const double far = snr_report(make_params(10000, 5.0, 0.0, 50, 18.0, 20.0)).snr;
    CHECK(far < 1e-6 * base);
}

TEST_CASE("report serialization is deterministic and carries the fields") {
    const auto report = snr_report(make_params(10000, 3.2, 3.2, 1, 18.0, 23.0));
    const std::string a = to_json(report);
    CHECK(a == to_json(report));
    CHECK(a.find("\"snr\"") != std::string::npos);
    CHECK(a.find("\"v_max\"") != std::string::npos);
    CHECK(a.find("\"selected_count\"") != std::string::npos);
}

TEST_CASE("invalid detector parameters are rejected") {
    CHECK_THROWS_AS(selected_count(make_params(0, 5, 0, 1, 18, 20)), std::invalid_argument);
    CHECK_THROWS_AS(selected_count(make_params(10, -5, 0, 1, 18, 20)), std::invalid_argument);
    CHECK_THROWS_AS(selected_count(make_params(10, 5, 0, 0, 18, 20)), std::invalid_argument);
    CHECK_THROWS_AS(selected_count(make_params(10, 5, 0, 1, 0, 20)), std::invalid_argument);
    CHECK_THROWS_AS(selected_count(make_params(10, 5, 0, 1, 18, 0)), std::invalid_argument);
    CHECK_THROWS_AS(selected_count(make_params(10, 5, -1, 1, 18, 20)), std::invalid_argument);
}
