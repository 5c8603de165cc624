// rng.hpp — Counter-based random streams (Philox4x32-10) and Gaussian deviates.
// Streams are keyed by (master seed, stream tag, stream index); the n-th deviate
// of a stream is a pure function of the key, so samples are reproducible for any
// worker count or draw interleaving.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace stoq::rng {

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

} // namespace detail

// One 128-bit Philox4x32 block, 10 rounds (standard round constants).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 2> key,
                                               std::array<std::uint32_t, 4> ctr) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo(kMul0, ctr[0], hi0, lo0);
        detail::mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

// Identifies an independent stream of deviates.
struct StreamKey {
    std::uint64_t master_seed{0};
    std::uint32_t tag{0};    // e.g. initial-state branch index, or a reserved tag
    std::uint64_t index{0};  // e.g. trajectory index
};

// Standard normal deviates via Box-Muller over Philox counter blocks.
class NormalStream {
public:
    explicit NormalStream(const StreamKey& k)
        : key_{static_cast<std::uint32_t>(k.master_seed),
               static_cast<std::uint32_t>(k.master_seed >> 32)},
          base_{static_cast<std::uint32_t>(k.index),
                static_cast<std::uint32_t>(k.index >> 32), k.tag, 0} {}

    double next() {
        if (!have_cached_) {
            auto ctr = base_;
            ctr[3] = block_++;
            const auto r = philox4x32(key_, ctr);
            const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
            const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
            // u1 in (0,1], u2 in [0,1)
            const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1p-53;
            const double u2 = static_cast<double>(b >> 11) * 0x1p-53;
            const double radius = std::sqrt(-2.0 * std::log(u1));
            const double angle = 2.0 * 3.14159265358979323846 * u2;
            value_ = radius * std::cos(angle);
            cached_ = radius * std::sin(angle);
            have_cached_ = true;
            return value_;
        }
        have_cached_ = false;
        return cached_;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_;
    std::uint32_t block_{0};
    bool have_cached_{false};
    double value_{0.0};
    double cached_{0.0};
};

} // namespace stoq::rng
