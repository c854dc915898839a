#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "irn/checkpoint.hpp"
#include "irn/model.hpp"

using namespace irn;

namespace {

// Adds noise around the initialization: replacing wholesale would make the
// high-dimensional invconv determinant collapse below its monitor floor.
template <typename T>
void randomize(ParamList<T>& params, uint64_t seed, double scale) {
    RngStream rng(seed);
    for (auto& p : params)
        for (auto& v : p.tensor.raw()) v += T(rng.normal() * scale);
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        worst = std::max(worst, std::fabs(double(a.data()[i]) - double(b.data()[i])));
    return worst;
}

ModelConfig small_cfg(Variant v, int scale, int blocks = 2) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.scale = scale;
    cfg.blocks = blocks;
    cfg.features = 8;
    cfg.growth = 4;
    cfg.init_seed = 5;
    return cfg;
}

ImageBuffer random_image(int w, int h, uint64_t seed) {
    ImageBuffer img(w, h, 3, Colorspace::RGB);
    RngStream rng(seed);
    for (auto& v : img.data) v = uint8_t(rng.below(256));
    return img;
}

}  // namespace

TEST_CASE("build shapes per variant") {
    auto m2 = IrnModel<float>::build(small_cfg(Variant::IRN, 2, 8));
    REQUIRE(m2.latent.y_channels == 3);
    REQUIRE(m2.latent.z_channels == 9);
    REQUIRE(m2.stages.size() == 9);  // 1 haar + 8 couplings

    auto m4 = IrnModel<float>::build(small_cfg(Variant::IRN, 4, 2));
    REQUIRE(m4.latent.z_channels == 45);
    REQUIRE(m4.stages.size() == 6);  // (haar + 2 couplings) x 2

    auto me = IrnModel<float>::build(small_cfg(Variant::IRN_E, 4, 3));
    REQUIRE(me.latent.z_channels == 45);
    REQUIRE(me.stages.size() == 5);  // haar, haar, then 3 couplings

    auto mld = IrnModel<float>::build(small_cfg(Variant::IRN_LD, 3, 2));
    REQUIRE(mld.latent.z_channels == 24);
    REQUIRE(mld.stages.size() == 4);  // squeeze, invconv, 2 couplings

    auto mc = IrnModel<float>::build(small_cfg(Variant::IRN_COLOR, 1, 2));
    REQUIRE(mc.latent.y_channels == 1);
    REQUIRE(mc.latent.z_channels == 2);
    REQUIRE(mc.latent.spatial_factor == 1);

    REQUIRE_THROWS_AS(IrnModel<float>::build(small_cfg(Variant::IRN, 3)), Error);
}

TEST_CASE("fresh IRN model downscales to block means") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 4, 2));
    ImageBuffer img = random_image(8, 8, 77);
    auto x = image_to_tensor<float>(img);
    auto [y, z] = model.forward(x);
    REQUIRE(y.shape() == Shape{1, 2, 2, 3});
    for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx)
            for (int c = 0; c < 3; ++c) {
                double mean = 0.0;
                for (int dy = 0; dy < 4; ++dy)
                    for (int dx = 0; dx < 4; ++dx)
                        mean += img.at(4 * by + dy, 4 * bx + dx, c) / 255.0;
                mean /= 16.0;
                REQUIRE(double(y.data()[size_t((by * 2 + bx) * 3 + c)]) ==
                        Catch::Approx(mean).margin(1e-6));
            }
}

TEST_CASE("bijectivity with random parameters across variants") {
    struct Case {
        Variant v;
        int scale;
        int size;
    };
    for (auto cs : {Case{Variant::IRN, 2, 16}, Case{Variant::IRN_E, 4, 16},
                    Case{Variant::IRN_LD, 3, 12}, Case{Variant::IRN_COLOR, 1, 8}}) {
        auto model = IrnModel<float>::build(small_cfg(cs.v, cs.scale));
        randomize(model.params(), 99, 0.05);
        model.refresh();
        auto x = Tensor<float>::from({1, cs.size, cs.size, 3},
                                     gaussian_buffer<float>(long(cs.size) * cs.size * 3, 31));
        auto [y, z] = model.forward(x);
        auto back = model.inverse(y, z);
        INFO(variant_name(cs.v));
        REQUIRE(max_abs_diff(back, x) <= 1e-4);
    }
}

TEST_CASE("downscale/upscale product path shapes and determinism") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 2, 2));
    ImageBuffer img = random_image(16, 12, 3);
    auto down = downscale(model, img);
    REQUIRE(down.y.width == 8);
    REQUIRE(down.y.height == 6);
    REQUIRE(down.z.shape() == Shape{1, 6, 8, 9});

    auto down2 = downscale(model, img);
    REQUIRE(down2.y.data == down.y.data);

    ZSpec spec{ZMode::Sample, 7};
    ImageBuffer up1 = upscale(model, down.y, spec);
    ImageBuffer up2 = upscale(model, down.y, spec);
    REQUIRE(up1.data == up2.data);
    REQUIRE(up1.width == 16);
    REQUIRE(up1.height == 12);

    ZSpec spec2{ZMode::Sample, 8};
    ImageBuffer up3 = upscale(model, down.y, spec2);
    REQUIRE(up3.data != up1.data);

    ImageBuffer upz = upscale(model, down.y, ZSpec{ZMode::Zero, 0});
    REQUIRE(upz.width == 16);
}

TEST_CASE("indivisible dimensions advise the fractional wrapper") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 2, 2));
    ImageBuffer img = random_image(15, 16, 4);
    REQUIRE_THROWS_WITH(downscale(model, img),
                        Catch::Matchers::ContainsSubstring("fractional"));
}

TEST_CASE("bijectivity through the unquantized product path") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 2, 2));
    randomize(model.params(), 11, 0.05);
    model.refresh();
    ImageBuffer img = random_image(16, 16, 5);
    auto x = image_to_tensor<float>(img);
    auto [y, z] = model.forward(x);
    auto back = model.inverse(y, z);
    REQUIRE(max_abs_diff(back, x) <= 1e-4);

    // Mismatched given-z is rejected.
    auto bad_z = Tensor<float>::zeros({1, 4, 4, 9});
    REQUIRE_THROWS_AS(model.inverse(y, bad_z), Error);
}

TEST_CASE("fraction parsing and fractional pre-size arithmetic") {
    Fraction f = parse_fraction("3.5");
    REQUIRE(f.value() == Catch::Approx(3.5));
    Fraction g = parse_fraction("7/2");
    REQUIRE(g.num == 7);
    REQUIRE(g.den == 2);

    // s1 = 3.5 with s2 = 4: pre-resize factor 8/7.
    auto [pw, ph] = fractional_pre_size(112, 56, g, 4);
    REQUIRE(pw == 128);
    REQUIRE(ph == 64);
    REQUIRE_THROWS_AS(fractional_pre_size(100, 100, g, 4), Error);
}

TEST_CASE("integer fraction degenerates to the plain path") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 2, 2));
    ImageBuffer img = random_image(16, 16, 6);
    auto plain = downscale(model, img);
    auto frac = downscale_fractional(model, img, Fraction{2, 1});
    REQUIRE(frac.y.data == plain.y.data);
}

TEST_CASE("constant image passes through the fractional roundtrip unchanged") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN, 4, 2));
    ImageBuffer img(56, 56, 3, Colorspace::RGB);
    for (auto& v : img.data) v = 93;
    Fraction s1{7, 2};  // 3.5x via the 4x model
    auto down = downscale_fractional(model, img, s1);
    REQUIRE(down.y.width == 16);  // 56 / 3.5
    ImageBuffer up = upscale_fractional(model, down.y, s1, 56, 56, ZSpec{ZMode::Zero, 0});
    for (auto v : up.data) REQUIRE(int(v) == 93);
}

TEST_CASE("IRN_color produces grayscale y and reconstructs through inverse") {
    auto model = IrnModel<float>::build(small_cfg(Variant::IRN_COLOR, 1, 2));
    ImageBuffer img = random_image(12, 12, 8);
    auto down = downscale(model, img);
    REQUIRE(down.y.channels == 1);
    REQUIRE(down.y.width == 12);
    // Identity blocks at init: y is exactly the BT.601 luma.
    for (long i = 0; i < img.pixels(); ++i) {
        double y, cb, cr;
        bt601::rgb_to_ycbcr_f(img.data[size_t(3 * i)] / 255.0, img.data[size_t(3 * i + 1)] / 255.0,
                              img.data[size_t(3 * i + 2)] / 255.0, y, cb, cr);
        REQUIRE(int(down.y.data[size_t(i)]) == int(quantize_u8(y)));
    }
    ImageBuffer up = upscale(model, down.y, ZSpec{ZMode::Zero, 0});
    REQUIRE(up.channels == 3);
}

TEST_CASE("checkpoint save/load roundtrip") {
    auto dir = std::filesystem::temp_directory_path();
    auto path = (dir / "irn_test_ckpt.irnc").string();

    auto model = IrnModel<float>::build(small_cfg(Variant::IRN_LD, 3, 2));
    randomize(model.params(), 21, 0.05);
    model.refresh();
    AdamState<float> opt;
    opt.lr = 1e-3f;
    for (auto& p : model.params()) p.tensor.zero_grad();
    adam_step(model.params(), opt);
    RngStream rng(1234);
    rng.next_u32();
    save_model_checkpoint(path, model, &opt, &rng);

    auto data = load_checkpoint(path);
    REQUIRE(data.cfg.variant == Variant::IRN_LD);
    REQUIRE(data.cfg.scale == 3);
    REQUIRE(data.has_optimizer);
    AdamState<float> opt2;
    RngStream rng2;
    auto model2 = model_from_checkpoint<float>(data, &opt2, &rng2);
    REQUIRE(opt2.t == opt.t);
    REQUIRE(rng2.seed() == 1234);
    REQUIRE(rng2.counter() == rng.counter());

    ImageBuffer img = random_image(9, 9, 10);
    auto x = image_to_tensor<float>(img);
    auto [y1, z1] = model.forward(x);
    auto [y2, z2] = model2.forward(x);
    REQUIRE(y1.data() == y2.data());
    REQUIRE(z1.data() == z2.data());

    // Serialization is byte-stable.
    auto bytes1 = serialize_checkpoint(CheckpointKind::Model, model.cfg, 0, model.params(),
                                       &opt, &rng);
    auto bytes2 = serialize_checkpoint(CheckpointKind::Model, model2.cfg, 0, model2.params(),
                                       &opt2, &rng2);
    REQUIRE(bytes1 == bytes2);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoint raises") {
    std::vector<uint8_t> junk = {'I', 'R', 'N', 'C', 9, 9};
    REQUIRE_THROWS_AS(parse_checkpoint(junk), Error);
    std::vector<uint8_t> not_magic = {'N', 'O', 'P', 'E', 0, 0, 0, 0};
    REQUIRE_THROWS_AS(parse_checkpoint(not_magic), Error);
}
