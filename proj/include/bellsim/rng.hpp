#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace bellsim {

namespace detail {

/// SplitMix64 step (Steele/Lea/Burton mixer). Passes BigCrush; one 64-bit
/// word of state, so a stream can be keyed from a hash cheaply.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// One-shot avalanche of a word, used to fold stream keys together.
inline std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t s = x;
    return splitmix64_next(s);
}

} // namespace detail

/// Counter-keyed random stream for one (seed, setting, pulse) triple.
///
/// Every pulse owns an independent substream derived purely from its key,
/// so generating pulses [0,N) in one pass, in chunks, or in parallel yields
/// bit-identical events. Draws within a pulse are consumed in a fixed,
/// documented order by the event generator.
class PulseRng {
public:
    PulseRng(std::uint64_t seed, std::uint32_t setting_id, std::uint64_t pulse_index) {
        std::uint64_t k = detail::mix64(seed);
        k = detail::mix64(k ^ (0x517cc1b727220a95ULL * (setting_id + 1)));
        k = detail::mix64(k ^ (0x2545f4914f6cdd1dULL * (pulse_index + 1)));
        state_ = k;
    }

    /// Direct keying, for auxiliary streams (e.g. splitting-scan noise).
    explicit PulseRng(std::uint64_t key) : state_(detail::mix64(key)) {}

    std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, width).
    double uniform(double width) { return width * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Exponential with the given mean; mean 0 returns 0 exactly.
    double exponential(double mean_value) {
        if (mean_value <= 0.0) return 0.0;
        // 1 - u in (0, 1], so the log argument never hits zero.
        return -mean_value * std::log(1.0 - uniform());
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no caching,
    /// so the per-pulse draw count stays a pure function of the code path).
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

    double normal(double mean_value, double sigma) { return mean_value + sigma * normal(); }

    /// Poisson count via Knuth's product method; adequate for the small
    /// per-pulse means used here. Draws nothing when mean is zero.
    unsigned poisson(double mean_value) {
        if (mean_value <= 0.0) return 0;
        if (mean_value > 50.0) throw std::invalid_argument("poisson mean too large for product method");
        const double limit = std::exp(-mean_value);
        unsigned k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

private:
    std::uint64_t state_ = 0;
};

} // namespace bellsim
