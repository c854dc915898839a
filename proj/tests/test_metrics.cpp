#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "irn/metrics.hpp"
#include "irn/rng.hpp"

using namespace irn;

namespace {

ImageBuffer random_image(int w, int h, int c, uint64_t seed) {
    ImageBuffer img(w, h, c, c == 1 ? Colorspace::Grayscale : Colorspace::RGB);
    RngStream rng(seed);
    for (auto& v : img.data) v = uint8_t(rng.below(256));
    return img;
}

}  // namespace

TEST_CASE("identical images: psnr +inf, ssim exactly 1") {
    ImageBuffer a = random_image(32, 24, 3, 1);
    REQUIRE(std::isinf(psnr(a, a, ChannelMode::RgbMean)));
    REQUIRE(std::isinf(psnr(a, a, ChannelMode::YOfYCbCr)));
    REQUIRE(ssim(a, a, ChannelMode::RgbMean) == 1.0);
    REQUIRE(ssim(a, a, ChannelMode::YOfYCbCr) == 1.0);
}

TEST_CASE("uniform one-level difference gives 20*log10(255)") {
    ImageBuffer a(16, 16, 3, Colorspace::RGB);
    ImageBuffer b = a;
    for (auto& v : a.data) v = 100;
    for (auto& v : b.data) v = 101;
    REQUIRE(psnr(a, b, ChannelMode::RgbMean) == Catch::Approx(48.1308).margin(1e-3));

    ImageBuffer ga(16, 16, 1, Colorspace::Grayscale);
    ImageBuffer gb = ga;
    for (auto& v : ga.data) v = 50;
    for (auto& v : gb.data) v = 51;
    REQUIRE(psnr(ga, gb, ChannelMode::YOfYCbCr) == Catch::Approx(48.1308).margin(1e-3));
}

TEST_CASE("psnr is symmetric") {
    ImageBuffer a = random_image(24, 24, 3, 2);
    ImageBuffer b = random_image(24, 24, 3, 3);
    REQUIRE(psnr(a, b) == psnr(b, a));
    REQUIRE(psnr(a, b, ChannelMode::YOfYCbCr) == psnr(b, a, ChannelMode::YOfYCbCr));
}

TEST_CASE("size mismatch raises") {
    ImageBuffer a = random_image(8, 8, 3, 4);
    ImageBuffer b = random_image(8, 9, 3, 4);
    REQUIRE_THROWS_AS(psnr(a, b), Error);
    REQUIRE_THROWS_AS(ssim(a, b), Error);
}

TEST_CASE("ssim decreases with noise level") {
    ImageBuffer clean(48, 48, 1, Colorspace::Grayscale);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            clean.at(y, x, 0) = uint8_t(128 + 80 * std::sin(x / 5.0) * std::cos(y / 7.0));
    RngStream rng(9);
    auto noisy = [&](int amp) {
        ImageBuffer out = clean;
        for (auto& v : out.data) {
            int nv = int(v) + int(rng.below(uint64_t(2 * amp + 1))) - amp;
            v = uint8_t(std::min(255, std::max(0, nv)));
        }
        return out;
    };
    ImageBuffer small_noise = noisy(6);
    ImageBuffer big_noise = noisy(60);
    double s_small = ssim(clean, small_noise);
    double s_big = ssim(clean, big_noise);
    REQUIRE(s_small < 1.0);
    REQUIRE(s_big < s_small);
    REQUIRE(s_big > -1.0);
}

TEST_CASE("metric csv row formats inf") {
    REQUIRE(metric_csv_row("img1", std::numeric_limits<double>::infinity(), 1.0) ==
            "img1,inf,1.000000");
}
