#pragma once

#include <cmath>
#include <cstdint>

namespace qsmc {

// Counter-based stream: output k is a pure function of (key, k), so streams
// can be split per trial and consumed in any order without coupling.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : key_(mix(seed)) {}

    // Derives an independent stream for one trial of a batch run. Streams for
    // distinct (master_seed, trial_index) pairs never share a key.
    static RngStream for_trial(std::uint64_t master_seed, std::uint64_t trial_index) {
        RngStream s(0);
        s.key_ = mix(master_seed ^ mix((trial_index + 1) * kGamma));
        return s;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller; consumes exactly two outputs.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += kGamma;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace qsmc
