#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qmfg {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
// pure function of (key, counter), so streams can be evaluated in any order
// on any number of workers and still reproduce bit-identically.
namespace philox {

inline constexpr std::uint32_t kW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

inline void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = std::uint64_t(a) * std::uint64_t(b);
    lo = std::uint32_t(p);
    hi = std::uint32_t(p >> 32);
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mul_hilo(kM4x32A, ctr[0], lo0, hi0);
        mul_hilo(kM4x32B, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW32A;
        key[1] += kW32B;
    }
    return ctr;
}

}  // namespace philox

/// Stateless draw sequence addressed by (seed, stream, step, lane, draw).
/// Lane separates independent uses within one (stream, step) cell, e.g.
/// Brownian increments vs. jump marks vs. initial-state sampling.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint32_t step, std::uint32_t lane)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          base_{0u, lane, step, stream} {}

    std::uint64_t next_u64() {
        if (have_ == 0) refill();
        --have_;
        const std::uint64_t w =
            std::uint64_t(buf_[2 * have_]) | (std::uint64_t(buf_[2 * have_ + 1]) << 32);
        return w;
    }

    /// Uniform on (0, 1]; never returns 0, so log(u) is safe.
    double uniform() {
        return double((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (one fresh pair of uniforms per call).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson count by Knuth's product method, chunked so large means do not
    /// underflow exp().
    long poisson(double mean) {
        long total = 0;
        while (mean > 0.0) {
            const double m = mean > 20.0 ? 20.0 : mean;
            mean -= m;
            const double limit = std::exp(-m);
            double p = 1.0;
            long k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > limit);
            total += k - 1;
        }
        return total;
    }

private:
    void refill() {
        auto ctr = base_;
        ctr[0] = draw_++;
        buf_ = philox::block(ctr, key_);
        have_ = 2;
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_;
    std::array<std::uint32_t, 4> buf_{};
    std::uint32_t draw_ = 0;
    int have_ = 0;
};

}  // namespace qmfg
