#pragma once

#include <cmath>
#include <cstdint>

namespace spinodal {

// Fixed 64-bit mixing function (splitmix64 finalizer). Path seeds are
// derived as mix_seed(run_seed, path_index), which makes every path an
// independent stream regardless of how work is scheduled across threads.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
    return splitmix64_next(s);
}

// xoshiro256++ (Blackman & Vigna). Small, fast, and fully specified, so
// streams are reproducible across platforms and standard-library versions.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64_next(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0,1]; never returns 0 so it is safe under log().
    double uniform01() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Standard-normal stream via Box-Muller (explicit formulas only, no
// distribution objects, so draws are bit-stable everywhere).
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed = 0) : eng_(seed) {}

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = eng_.uniform01();
        const double u2 = eng_.uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform01() { return eng_.uniform01(); }

private:
    Xoshiro256pp eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace spinodal
