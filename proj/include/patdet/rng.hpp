#pragma once

#include <cmath>
#include <cstdint>

namespace patdet {

/// SplitMix64 mixer. Used to derive substream seeds and to initialize the
/// main generator state; never used as a generator on its own.
struct SplitMix64 {
    std::uint64_t state;

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

/// Derives an independent substream seed from a master seed, a domain tag and
/// up to two indices. All stochastic operations key their substreams through
/// this, so a given afferent's spike train (say) does not depend on how many
/// other afferents exist or on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    SplitMix64 sm{master};
    std::uint64_t h = sm.next();
    sm.state = h ^ (tag * 0x9e3779b97f4a7c15ull);
    h = sm.next();
    sm.state = h ^ (a * 0xd1b54a32d192ed03ull);
    h = sm.next();
    sm.state = h ^ (b * 0x8cb92ba72f3d8dd7ull);
    return sm.next();
}

/// xoshiro256++ generator. Small state, cheap construction (matters because
/// simulations create one generator per afferent per stream segment), and a
/// fully specified output sequence, so results are reproducible everywhere.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        SplitMix64 sm{seed};
        for (auto& w : s_) w = sm.next();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    std::uint64_t operator()() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 bits.
    double uniform01() noexcept { return static_cast<double>(operator()() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    /// Exponential deviate with the given rate (events per unit time).
    /// log1p keeps the tail exact and avoids log(0) since uniform01() < 1.
    double exponential(double rate) noexcept { return -std::log1p(-uniform01()) / rate; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

} // namespace patdet
