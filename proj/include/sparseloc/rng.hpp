#pragma once

#include <cstdint>

#include "sparseloc/lattice.hpp"

namespace sparseloc {

// Stateless generator: every draw is a hash of (seed, stream, site, slot).
// Parallel Monte Carlo then reproduces bit-for-bit under any schedule.
// The standard <random> distributions are implementation-defined, so the
// transforms to uniform doubles are done here.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t site_hash(const Site& n);

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(seed ^ splitmix64(stream))) {}

    std::uint64_t bits(std::uint64_t counter, std::uint64_t slot = 0) const {
        return splitmix64(key_ ^ splitmix64(counter + 0x632be59bd9b4e019ULL * (slot + 1)));
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter, std::uint64_t slot = 0) const {
        return static_cast<double>(bits(counter, slot) >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1), safe for logarithms.
    double uniform_open(std::uint64_t counter, std::uint64_t slot = 0) const {
        return (static_cast<double>(bits(counter, slot) >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

}  // namespace sparseloc
