#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace fragstop {

/// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

/// FNV-1a over the label bytes. Stable across platforms and runs.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combine a parent key with a child index into a new stream key.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(parent ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

/// splitmix64 generator. Cheap to seed, so every replicate and every
/// fragmentation block can own a stream. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

using Rng = SplitMix64;

/// Uniform on [0, 1) with 53 random bits.
template <class G>
double uniform01(G& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform on the open interval (0, 1).
template <class G>
double uniform_open(G& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

/// Exponential holding time; +inf when the rate is zero.
template <class G>
double exponential(G& g, double rate) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log(uniform_open(g)) / rate;
}

/// Named substreams derived from one master seed. A stream is identified by
/// (purpose label, replicate index), so results do not depend on how
/// replicates are scheduled across workers.
class StreamPlan {
public:
    explicit constexpr StreamPlan(std::uint64_t master_seed) noexcept : master_(master_seed) {}

    constexpr std::uint64_t master_seed() const noexcept { return master_; }

    constexpr std::uint64_t key(std::string_view purpose, std::uint64_t index = 0) const noexcept {
        return derive_key(mix64(master_ ^ hash_label(purpose)), index);
    }

    Rng stream(std::string_view purpose, std::uint64_t index = 0) const noexcept {
        return Rng(key(purpose, index));
    }

private:
    std::uint64_t master_;
};

}  // namespace fragstop
