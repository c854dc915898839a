#include <catch2/catch_amalgamated.hpp>

#include "irn/rng.hpp"

using namespace irn;

TEST_CASE("philox blocks are deterministic and seed-sensitive") {
    auto a = philox::block(42, 7, 0);
    auto b = philox::block(42, 7, 0);
    auto c = philox::block(43, 7, 0);
    auto d = philox::block(42, 8, 0);
    for (int i = 0; i < 4; ++i) REQUIRE(a.v[i] == b.v[i]);
    bool diff_seed = false, diff_ctr = false;
    for (int i = 0; i < 4; ++i) {
        diff_seed |= a.v[i] != c.v[i];
        diff_ctr |= a.v[i] != d.v[i];
    }
    REQUIRE(diff_seed);
    REQUIRE(diff_ctr);
}

TEST_CASE("stream restore resumes identically") {
    RngStream s(123);
    for (int i = 0; i < 37; ++i) s.next_u32();
    uint64_t ctr = s.counter();
    RngStream t(123);
    t.restore(123, ctr);
    // The word position inside a block is not part of the persisted state, so
    // persistence points must land on block boundaries; the stream rounds by
    // discarding the partial block.
    RngStream u(123, ctr);
    REQUIRE(t.next_u32() == u.next_u32());
}

TEST_CASE("same seed gives bit-identical gaussian buffers") {
    auto a = gaussian_buffer<float>(1000, 99);
    auto b = gaussian_buffer<float>(1000, 99);
    REQUIRE(a == b);
    auto c = gaussian_buffer<float>(1000, 100);
    REQUIRE(a != c);
}

TEST_CASE("gaussian buffer matches N(0,1) moments") {
    const long n = 100000;
    auto z = gaussian_buffer<double>(n, 2024);
    double mean = 0, var = 0;
    for (double v : z) mean += v;
    mean /= double(n);
    for (double v : z) var += (v - mean) * (v - mean);
    var /= double(n);
    REQUIRE(std::fabs(mean) < 0.02);
    REQUIRE(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("uniform stays in (0,1] and below() in range") {
    RngStream s(7);
    for (int i = 0; i < 10000; ++i) {
        double u = s.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u <= 1.0);
    }
    for (int i = 0; i < 1000; ++i) REQUIRE(s.below(13) < 13);
}
