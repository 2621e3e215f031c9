// Deterministic random streams. All randomness in the library flows from one
// root seed through named substreams, and every draw is computed by hand
// (no std:: distributions) so results are bit-identical across platforms.

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace azil {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-free xoshiro256** generator with hand-rolled samplers.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Substream derived from (root seed, name, index); independent streams
    /// for simulation, init, shuffle, ...
    static Rng stream(uint64_t root_seed, std::string_view name, uint64_t index = 0) {
        uint64_t sm = root_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        uint64_t mixed = splitmix64(sm) ^ fnv1a64(name);
        return Rng(mixed);
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (no cached spare, keeps state simple).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    double exponential(double mean) {
        double u = uniform();
        while (u >= 1.0) u = uniform();
        return -mean * std::log1p(-u);
    }

    /// Index drawn proportionally to non-negative weights.
    size_t weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t s_[4]{};
};

}  // namespace azil
