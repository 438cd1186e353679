#pragma once

// Philox4x32-10 counter-based generator. A stream is addressed by
// (seed, tag, path index); draws are a pure function of that address and a
// block counter, so results never depend on scheduling.

#include <array>
#include <cmath>
#include <cstdint>

namespace bsdelab {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

enum class StreamTag : std::uint32_t { Jumps = 1, Brownian = 2, Stable = 3, Gaussian = 4, Battery = 5 };

class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, StreamTag tag, std::uint64_t path_index)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          tag_(static_cast<std::uint32_t>(tag)),
          path_lo_(std::uint32_t(path_index)),
          path_hi_(std::uint32_t(path_index >> 32)) {}

    std::uint32_t next_u32() {
        if (used_ == 4) {
            buffer_ = philox4x32_10({block_++, tag_, path_lo_, path_hi_}, key_);
            used_ = 0;
        }
        return buffer_[used_++];
    }

    /// Uniform on (0,1) with 53 random bits; never returns 0 or 1.
    double uniform() {
        const std::uint64_t hi = next_u32() >> 5, lo = next_u32() >> 6;
        return (double((hi << 26) | lo) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

private:
    PhiloxKey key_;
    std::uint32_t tag_, path_lo_, path_hi_;
    std::uint32_t block_ = 0;
    PhiloxBlock buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bsdelab
