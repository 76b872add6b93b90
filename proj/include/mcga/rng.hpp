#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace mcga {

// 64-bit mixer used to expand seeds and derive substream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ stream. Substreams are derived by mixing the parent seed with
// a stream key, so (seed, replicate, field) triples give non-overlapping
// sequences for all practical purposes and results do not depend on thread
// scheduling.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    RngStream(std::uint64_t seed, std::uint64_t key) : RngStream(mix(seed, key)) {}

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t key) {
        std::uint64_t sm = seed ^ (0x632be59bd9b4e019ULL + key);
        std::uint64_t a = splitmix64(sm);
        sm ^= key * 0xff51afd7ed558ccdULL;
        return a ^ splitmix64(sm);
    }

    RngStream substream(std::uint64_t key) const {
        return RngStream(state_[0] ^ state_[2], key);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // pair of independent standard normals (Marsaglia polar method)
    std::pair<double, double> normal_pair() {
        while (true) {
            const double u = 2.0 * unit() - 1.0;
            const double v = 2.0 * unit() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                const double f = std::sqrt(-2.0 * std::log(s) / s);
                return {u * f, v * f};
            }
        }
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto [a, b] = normal_pair();
        spare_ = b;
        have_spare_ = true;
        return a;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mcga
