#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace bmmp {

// Counter-based generator built on the splitmix64 finalizer: the i-th output
// is mix(seed + i*GOLDEN). Streams derived through derive() are independent
// for distinct paths, which gives every Monte Carlo trial its own stream
// without any sequential draw coupling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    // Fold a path of tags into a base seed. derive(s, {a}) != derive(s, {b})
    // for a != b, and nesting extends the path.
    static std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = mix(base + 0x9e3779b97f4a7c15ULL);
        for (std::uint64_t p : path)
            s = mix(s ^ mix(p + 0x9e3779b97f4a7c15ULL));
        return s;
    }

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix(seed_ + counter_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second deviate is cached.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        if (u1 <= 0.0)
            u1 = 0x1.0p-53;
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        have_cached_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace bmmp
