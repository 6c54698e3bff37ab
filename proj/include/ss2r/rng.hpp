#pragma once

#include <cmath>
#include <cstdint>

namespace ss2r {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so independently seeded work items can run in any
// order and still reproduce bit-exactly.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {}

    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    uint64_t bits(uint64_t stream, uint64_t counter) const {
        uint64_t h = mix(seed_ + 0x9e3779b97f4a7c15ull);
        h = mix(h ^ (stream + 0x9e3779b97f4a7c15ull));
        return mix(h ^ counter);
    }

    // [0, 1)
    double uniform(uint64_t stream, uint64_t counter) const {
        return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; one counter consumes two sub-draws
    double normal(uint64_t stream, uint64_t counter) const {
        uint64_t b = bits(stream, counter * 2);
        double u1 = (static_cast<double>(b >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform(stream, counter * 2 + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    uint64_t seed() const { return seed_; }

    // derive a child seed for an independent substream
    uint64_t derive(uint64_t tag, uint64_t index) const { return bits(tag, index); }

private:
    uint64_t seed_;
};

// Stateful convenience wrapper over one stream.
class RngStream {
public:
    RngStream(const Rng& rng, uint64_t stream) : rng_(rng), stream_(stream) {}

    double uniform() { return rng_.uniform(stream_, counter_++); }
    double normal() { return rng_.normal(stream_, counter_++); }
    uint64_t bits() { return rng_.bits(stream_, counter_++); }

    // uniform integer in [0, n)
    int64_t index(int64_t n) { return static_cast<int64_t>(uniform() * static_cast<double>(n)); }

private:
    Rng rng_;
    uint64_t stream_;
    uint64_t counter_ = 0;
};

}  // namespace ss2r
