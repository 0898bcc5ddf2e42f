// rng.hpp
//
// Counter-based random number generation for reproducible, order-independent
// simulation streams. The core block cipher is Philox4x64-10 (Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11). Streams are addressed
// by (seed, purpose, repetition, unit), so any draw can be reproduced without
// replaying the draws that preceded it in wall-clock order.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace gelc {

namespace philox {

inline constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ull;
inline constexpr std::uint64_t M1 = 0xCA5A826395121157ull;
inline constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t W1 = 0xBB67AE8584CAA73Bull;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

// One 10-round Philox4x64 block: 256 bits of counter -> 256 bits of output.
inline std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> x,
                                          std::array<std::uint64_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(M0, x[0], hi0, lo0);
        mulhilo(M1, x[2], hi1, lo1);
        x = {hi1 ^ x[1] ^ key[0], lo1, hi0 ^ x[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return x;
}

}  // namespace philox

// FNV-1a over a label and a list of doubles (by bit pattern). Used to derive
// stable stream "purpose" identifiers from scenario parameters.
inline std::uint64_t stream_tag(std::string_view label, std::initializer_list<double> params = {}) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001B3ull;
    };
    for (char c : label) mix(static_cast<unsigned char>(c));
    for (double v : params) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int k = 0; k < 8; ++k) mix(static_cast<unsigned char>(bits >> (8 * k)));
    }
    return h;
}

// Inverse standard-normal CDF, Wichura's algorithm AS241 (PPND16 variant).
// Accurate to about 1e-15 over (0, 1); saturates gracefully in the far tails.
double inverse_normal_cdf(double p);

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t rep = 0,
                 std::uint64_t unit = 0)
        : key_{seed, purpose}, ctr_{0, unit, rep, 0} {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = philox::block(ctr_, key_);
            ++ctr_[0];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1): never returns an exact endpoint, safe for inverse CDFs.
    double next_double_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_uniform(double a, double b) { return a + (b - a) * next_double(); }

    double next_exponential(double mean) { return -mean * std::log1p(-next_double()); }

    double next_normal(double mu, double sd) {
        return mu + sd * inverse_normal_cdf(next_double_open());
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Gamma(shape, 1) via Marsaglia & Tsang's squeeze method; shape < 1 handled
    // by the usual boost Gamma(shape+1) * U^{1/shape}.
    double next_gamma(double shape) {
        if (shape < 1.0) {
            double u = next_double_open();
            return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = next_normal(0.0, 1.0);
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = next_double_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> ctr_;
    std::array<std::uint64_t, 4> buf_{};
    int pos_ = 4;
};

}  // namespace gelc
