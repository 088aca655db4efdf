#pragma once

#include <cstdint>
#include <limits>

namespace bandlab {

// SplitMix64 finalizer; also used to fold keys into a starting state.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter engine keyed by (seed, a, b, stream). Two engines with the same key
// produce the same sequence no matter in which order they are created, which is
// what makes entrywise sampling independent of traversal order.
class KeyedEngine {
public:
    using result_type = std::uint64_t;

    KeyedEngine() noexcept : KeyedEngine(0) {}
    explicit KeyedEngine(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                         std::uint64_t stream = 0) noexcept {
        std::uint64_t s = mix64(seed);
        s = mix64(s ^ (a * 0xd1342543de82ef95ULL));
        s = mix64(s ^ (b * 0xaf251af3b0f025b5ULL));
        key_ = mix64(s ^ (stream + 0x632be59bd9b4e019ULL));
        ctr_ = 0;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

    // Uniform in [0,1) with 53 bits.
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    void discard(unsigned long long n) noexcept { ctr_ += n; }

    bool operator==(const KeyedEngine&) const = default;

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

// Derive a child seed, e.g. one per trial index.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t salt = 0) noexcept {
    return mix64(mix64(master ^ 0x5851f42d4c957f2dULL) + index * 0x14057b7ef767814fULL + salt);
}

}  // namespace bandlab
