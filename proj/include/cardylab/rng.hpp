#pragma once

// Philox4x32-10 counter-based generator (Salmon et al. constants).

#include <array>
#include <cmath>
#include <cstdint>

namespace cardylab {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Ctr philox4x32(Philox4x32Ctr c, Philox4x32Key k) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = std::uint64_t(M0) * c[0];
        std::uint64_t p1 = std::uint64_t(M1) * c[2];
        Philox4x32Ctr n{std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ c[3] ^ k[1],
                        std::uint32_t(p0)};
        c = n;
        k[0] += W0;
        k[1] += W1;
    }
    return c;
}

inline Philox4x32Key stream_key(std::uint64_t stream) { return {std::uint32_t(stream), std::uint32_t(stream >> 32)}; }

// splitmix64 finalizer, used to derive sub-streams
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t base, std::uint64_t tag) { return mix64(base ^ mix64(tag)); }

// 128 random bits for (sample index, block), block = (row, column group)
inline Philox4x32Ctr block_bits(Philox4x32Key key, std::uint64_t index, std::int32_t row, std::int32_t group) {
    return philox4x32({std::uint32_t(index), std::uint32_t(index >> 32), std::uint32_t(row), std::uint32_t(group)}, key);
}

// small sequential generator over a counter, for bootstrap resampling
class PhiloxEngine {
public:
    using result_type = std::uint32_t;
    explicit PhiloxEngine(std::uint64_t stream, std::uint64_t sub = 0) : key_(stream_key(stream)), sub_(sub) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }
    result_type operator()() {
        if (pos_ == 4) {
            buf_ = philox4x32({std::uint32_t(ctr_), std::uint32_t(ctr_ >> 32), std::uint32_t(sub_), std::uint32_t(sub_ >> 32)},
                              key_);
            ++ctr_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }
    double uniform() { return ((std::uint64_t((*this)()) << 21) ^ (*this)()) * (1.0 / 9007199254740992.0); }
    std::uint32_t below(std::uint32_t m) { return std::uint32_t((std::uint64_t((*this)()) * m) >> 32); }
    double normal() {
        // Box-Muller, one value per call
        double u1 = uniform(), u2 = uniform();
        if (u1 <= 0) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    Philox4x32Key key_;
    std::uint64_t sub_;
    std::uint64_t ctr_ = 0;
    Philox4x32Ctr buf_{};
    int pos_ = 4;
};

}  // namespace cardylab
