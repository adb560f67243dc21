#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dsnet {

// mt19937_64 with hand-rolled value mappings. The standard pins the engine's
// output sequence but not the distributions, so the mappings live here to keep
// streams identical across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream for (seed, stream): training draws are keyed by the
    // step index so that resuming from a checkpoint replays the exact stream.
    static Rng at(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix(seed, stream));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Uniform in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }

    // Box-Muller; two engine draws per sample, no cached half.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = 1.0 - unit();  // (0, 1]
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = last - first;
        for (decltype(n) i = n - 1; i > 0; --i) {
            auto j = static_cast<decltype(n)>(below(static_cast<std::uint64_t>(i) + 1));
            std::swap(first[i], first[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        // splitmix64 over the pair
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace dsnet
