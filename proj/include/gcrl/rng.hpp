#pragma once

#include <cstdint>

namespace gcrl {

// Deterministic splitmix64 generator. The standard <random> engines are
// portable but the distributions are not, so bounded draws are done here
// to keep datasets and environments bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, n). n must be > 0.
    std::uint32_t below(std::uint32_t n) {
        // Multiply-shift with rejection (Lemire).
        std::uint64_t x = next_u64() & 0xFFFFFFFFULL;
        std::uint64_t m = x * n;
        std::uint32_t l = static_cast<std::uint32_t>(m);
        if (l < n) {
            std::uint32_t t = -n % n;
            while (l < t) {
                x = next_u64() & 0xFFFFFFFFULL;
                m = x * n;
                l = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and stream ids.
// Used so that episodes collected in parallel match serial collection.
inline std::uint64_t sub_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    Rng r(base ^ (a * 0xD6E8FEB86659FD93ULL) ^ (b * 0xA3B195354A39B70DULL));
    r.next_u64();
    return r.next_u64();
}

} // namespace gcrl
