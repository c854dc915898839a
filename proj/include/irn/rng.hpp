#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace irn {

// Philox4x32-10 counter-based generator.
//
// All randomness in the library flows through this one primitive so that a
// (seed, counter) pair fully determines every draw, independent of platform
// and thread schedule. The 64-bit key is the user seed; the 128-bit counter
// is (block index, stream id). Each block yields four 32-bit words.
namespace philox {

constexpr uint32_t kMulA = 0xD2511F53u;
constexpr uint32_t kMulB = 0xCD9E8D57u;
constexpr uint32_t kWeylA = 0x9E3779B9u;
constexpr uint32_t kWeylB = 0xBB67AE85u;

struct Block {
    uint32_t v[4];
};

inline void round_once(uint32_t ctr[4], const uint32_t key[2]) {
    uint64_t p0 = uint64_t(kMulA) * ctr[0];
    uint64_t p1 = uint64_t(kMulB) * ctr[2];
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    uint32_t n0 = hi1 ^ ctr[1] ^ key[0];
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ ctr[3] ^ key[1];
    uint32_t n3 = lo0;
    ctr[0] = n0;
    ctr[1] = n1;
    ctr[2] = n2;
    ctr[3] = n3;
}

inline Block block(uint64_t seed, uint64_t index, uint64_t stream) {
    uint32_t ctr[4] = {uint32_t(index), uint32_t(index >> 32), uint32_t(stream),
                       uint32_t(stream >> 32)};
    uint32_t key[2] = {uint32_t(seed), uint32_t(seed >> 32)};
    for (int r = 0; r < 10; ++r) {
        round_once(ctr, key);
        key[0] += kWeylA;
        key[1] += kWeylB;
    }
    return Block{{ctr[0], ctr[1], ctr[2], ctr[3]}};
}

}  // namespace philox

// Uniform in (0, 1]: zero is excluded so log() is always safe.
inline double u32_to_unit(uint32_t x) {
    return (double(x) + 1.0) * (1.0 / 4294967296.0);
}

// Stateful stream view over the Philox function. The counter advances by one
// per block and both fields serialize into checkpoints.
class RngStream {
   public:
    RngStream() = default;
    explicit RngStream(uint64_t seed, uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }
    void restore(uint64_t seed, uint64_t counter) {
        seed_ = seed;
        counter_ = counter;
        have_spare_ = false;
        word_pos_ = 4;
    }

    uint32_t next_u32() {
        if (word_pos_ >= 4) {
            blk_ = philox::block(seed_, counter_++, 0);
            word_pos_ = 0;
        }
        return blk_.v[word_pos_++];
    }

    // Uniform in (0, 1].
    double uniform() { return u32_to_unit(next_u32()); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t x = (uint64_t(next_u32()) << 32) | next_u32();
        return x % n;
    }

    bool coin() { return (next_u32() & 1u) != 0; }

    // Standard normal via Box-Muller on consecutive uniforms.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

   private:
    uint64_t seed_ = 0;
    uint64_t counter_ = 0;
    philox::Block blk_{};
    int word_pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Deterministic standard-normal buffer: element i is derived from Philox
// block (seed, i), so the result does not depend on evaluation order.
template <typename T>
inline std::vector<T> gaussian_buffer(long n, uint64_t seed) {
    std::vector<T> out(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        philox::Block b = philox::block(seed, uint64_t(i), 1);
        double u1 = u32_to_unit(b.v[0]);
        double u2 = u32_to_unit(b.v[1]);
        double r = std::sqrt(-2.0 * std::log(u1));
        out[size_t(i)] = T(r * std::cos(6.283185307179586476925286766559 * u2));
    }
    return out;
}

}  // namespace irn
