#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "irn/codec.hpp"
#include "irn/data.hpp"
#include "irn/metrics.hpp"

using namespace irn;

TEST_CASE("quality 50 uses the base table unscaled") {
    auto t = codec::scaled_table(50);
    for (int i = 0; i < 64; ++i) REQUIRE(t[size_t(i)] == codec::base_table()[size_t(i)]);
    REQUIRE_THROWS_AS(codec::scaled_table(0), Error);
    REQUIRE_THROWS_AS(codec::scaled_table(101), Error);
    // Higher quality, finer steps.
    auto t90 = codec::scaled_table(90);
    auto t10 = codec::scaled_table(10);
    REQUIRE(t90[0] < t[0]);
    REQUIRE(t10[0] > t[0]);
}

TEST_CASE("dct forward/inverse roundtrip") {
    RngStream rng(3);
    double block[64], freq[64], back[64];
    for (auto& v : block) v = rng.uniform() * 255.0 - 128.0;
    codec::dct8_forward(block, freq);
    codec::dct8_inverse(freq, back);
    for (int i = 0; i < 64; ++i) REQUIRE(back[i] == Catch::Approx(block[i]).margin(1e-4));
    // Orthonormal: constant block concentrates everything in DC.
    for (auto& v : block) v = 10.0;
    codec::dct8_forward(block, freq);
    REQUIRE(freq[0] == Catch::Approx(80.0));  // 10 * 8 (sqrt(1/8)*8 per axis)
    for (int i = 1; i < 64; ++i) REQUIRE(freq[i] == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("constant image: DC only, bpp near the entropy floor") {
    ImageBuffer img(32, 32, 3, Colorspace::RGB);
    for (auto& v : img.data) v = 137;
    auto s = lossy_encode(img, 50);
    // Coefficient planes: every AC symbol is zero.
    const uint8_t* p = s.bytes.data() + 20;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 32 * 32; ++i) {
            int16_t v = int16_t(uint16_t(p[0]) | (uint16_t(p[1]) << 8));
            int by = (i / 32) % 8, bx = (i % 32) % 8;
            if (by != 0 || bx != 0) REQUIRE(v == 0);
            p += 2;
        }
    REQUIRE(s.bpp < 0.2);
    ImageBuffer back = lossy_decode(s.bytes);
    REQUIRE(psnr(img, back) > 40.0);
}

TEST_CASE("quality monotonicity on the toy corpus") {
    auto corpus = make_toy_corpus(2, 64, 11);
    for (const auto& img : corpus) {
        double p95 = psnr(img, lossy_roundtrip(img, 95));
        double p10 = psnr(img, lossy_roundtrip(img, 10));
        REQUIRE(p95 > p10);

        double prev_bpp = -1.0;
        for (int q : {10, 30, 50, 70, 90}) {
            auto s = lossy_encode(img, q);
            REQUIRE(s.bpp >= prev_bpp - 1e-12);  // non-decreasing with q
            prev_bpp = s.bpp;
        }
    }
}

TEST_CASE("near-transparent quantization at q=100") {
    auto corpus = make_toy_corpus(3, 64, 13);
    for (const auto& img : corpus) REQUIRE(psnr(img, lossy_roundtrip(img, 100)) >= 40.0);
}

TEST_CASE("container handles odd sizes and grayscale") {
    RngStream rng(17);
    ImageBuffer img(21, 13, 3, Colorspace::RGB);
    for (auto& v : img.data) v = uint8_t(rng.below(256));
    auto back = lossy_roundtrip(img, 80);
    REQUIRE(back.width == 21);
    REQUIRE(back.height == 13);

    ImageBuffer gray(19, 9, 1, Colorspace::Grayscale);
    for (auto& v : gray.data) v = uint8_t(rng.below(256));
    auto gback = lossy_roundtrip(gray, 70);
    REQUIRE(gback.channels == 1);
    REQUIRE(gback.width == 19);
}

TEST_CASE("corrupt lossy stream raises") {
    std::vector<uint8_t> junk = {'I', 'R', 'N', 'L', 1, 0, 0, 0};
    REQUIRE_THROWS_AS(lossy_decode(junk), Error);
    ImageBuffer img(8, 8, 1, Colorspace::Grayscale);
    auto s = lossy_encode(img, 50);
    s.bytes.resize(s.bytes.size() - 3);
    REQUIRE_THROWS_AS(lossy_decode(s.bytes), Error);
}
