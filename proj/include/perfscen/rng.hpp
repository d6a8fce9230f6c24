// rng.hpp
//
// Counter-based random streams. Every draw is a pure function of
// (seed, step, purpose, index, counter), so results do not depend on how
// work is chunked or scheduled across threads.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace perfscen {

// Stream purposes. Training draws and evaluation draws never share a stream.
enum class StreamPurpose : std::uint64_t {
    train = 1,
    evaluate = 2,
    oracle = 3,
    scatter = 4,
    check = 5,
};

struct StreamKey {
    std::uint64_t seed{0};
    std::uint64_t step{0};
    std::uint64_t purpose{0};

    StreamKey() = default;
    StreamKey(std::uint64_t seed_, std::uint64_t step_, StreamPurpose p)
        : seed(seed_), step(step_), purpose(static_cast<std::uint64_t>(p)) {}
    StreamKey(std::uint64_t seed_, std::uint64_t step_, std::uint64_t purpose_)
        : seed(seed_), step(step_), purpose(purpose_) {}
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One substream per (key, index); draws advance an internal counter.
class CounterRng {
public:
    CounterRng(const StreamKey& key, std::uint64_t index) {
        std::uint64_t h = splitmix64(key.seed);
        h = splitmix64(h ^ key.step);
        h = splitmix64(h ^ key.purpose);
        base_ = splitmix64(h ^ index);
    }

    std::uint64_t next_u64() { return splitmix64(base_ ^ splitmix64(++counter_)); }

    // Uniform on (0,1): 53 random bits, offset by half an ulp so 0 is never returned.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t base_{0};
    std::uint64_t counter_{0};
    double spare_{0.0};
    bool has_spare_{false};
};

}  // namespace perfscen
