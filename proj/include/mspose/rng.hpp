#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mspose {

// Deterministic random stream. Distribution transforms are written out here
// instead of using <random> distributions so that streams are bit-identical
// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi)
    {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r = engine_();
        while (r >= limit) r = engine_();
        return lo + static_cast<int>(r % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        while (u <= 0.0) u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2.0 * M_PI * v);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * v);
    }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Independent child stream; children with different ids never overlap in
    // practice because seeds are passed through splitmix64.
    Rng split(std::uint64_t stream_id) const { return Rng(base_ ^ mix(stream_id + 0x9e3779b97f4a7c15ULL)); }

    static std::uint64_t mix(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t base_ = engine_();
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mspose
