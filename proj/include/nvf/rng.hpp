#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

#include "nvf/vec.hpp"

namespace nvf {

// Deterministic portable generator (splitmix64 core). std:: distributions are
// implementation-defined, so all draws go through this class to keep runs
// byte-identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed + 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

    double normal() {
        // Box-Muller; one value per call keeps the stream layout simple.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Vec3 uniform_in(const Aabb& box) {
        return {uniform(box.min.x, box.max.x), uniform(box.min.y, box.max.y),
                uniform(box.min.z, box.max.z)};
    }

    // Named substream: same parent seed + same tag -> same child stream.
    Rng substream(std::string_view tag) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (char c : tag) h = (h ^ static_cast<uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ull;
        return Rng(state_ ^ h);
    }
    Rng substream(uint64_t tag) const {
        uint64_t z = tag + 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        return Rng(state_ ^ z);
    }

private:
    uint64_t state_;
};

}  // namespace nvf
