#pragma once

#include "mlphash/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace mlphash {

/// SplitMix64 finalizer. Used for stream-seed derivation and for mixing
/// counters into fresh seeds (trial keys, per-victim attack streams).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Deterministic value stream, fully determined by (key, stream_id).
///
/// Generator spec (v1, frozen; the unit tests pin golden values):
///   engine      = std::mt19937_64 seeded with mix64(mix64(key.seed) + stream_id)
///   uniform01() = (engine() >> 11) * 2^-53, in [0, 1)
///   normal()    = Marsaglia polar method on pairs of uniforms; the primary
///                 variate is returned first and the spare is cached
///   bounded(n)  = rejection-sampled engine() modulo n (unbiased)
///
/// mt19937_64 and its single-value seeding are pinned by the C++ standard,
/// so a given (key, stream_id) yields the same sequence on every platform.
class SeededStream {
public:
    SeededStream(UserKey key, std::uint64_t stream_id)
        : engine_(mix64(mix64(key.seed) + stream_id)) {}

    std::uint64_t raw() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    /// Uniform integer in [0, n), n >= 1.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw InvalidParameter("bounded(0) is undefined");
        const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x > limit);
        return x % n;
    }

    /// Fills `v` with standard normals in index order.
    void fill_normal(Vector& v) {
        for (Index i = 0; i < v.size(); ++i) v[i] = normal();
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// FNV-1a 64-bit hash. Stable across platforms; used to derive per-identity
/// keys from string identifiers.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace mlphash
