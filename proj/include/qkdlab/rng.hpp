#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <numeric>
#include <vector>

namespace qkdlab {

// Seedable, splittable deterministic generator. Streams are derived from
// (master seed, stream index) so independent trials can run in any order or
// on any thread and still reproduce bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(derive(seed, stream)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with exactly 53 random bits; fully specified output.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Unbiased uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    // First `count` entries of a Fisher-Yates shuffle of 0..population-1,
    // returned sorted ascending.
    std::vector<int> sample_indices(int population, int count) {
        std::vector<int> pool(static_cast<std::size_t>(population));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < count; ++i) {
            const auto j = i + static_cast<int>(below(static_cast<std::uint64_t>(population - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        std::vector<int> picked(pool.begin(), pool.begin() + count);
        std::sort(picked.begin(), picked.end());
        return picked;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        const std::uint64_t a = splitmix64(s);
        s ^= stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL;
        return a ^ splitmix64(s);
    }

    std::mt19937_64 engine_;
};

} // namespace qkdlab
