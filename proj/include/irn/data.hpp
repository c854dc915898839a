#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "irn/image.hpp"
#include "irn/model.hpp"
#include "irn/png.hpp"
#include "irn/resample.hpp"
#include "irn/rng.hpp"
#include "irn/tensor.hpp"

namespace irn {

template <typename T>
struct Dataset {
    std::vector<Tensor<T>> images;  // each (1, H, W, 3), values in [0,1]
    std::vector<std::string> ids;

    size_t size() const { return images.size(); }
};

template <typename T>
inline Dataset<T> dataset_from_images(const std::vector<ImageBuffer>& imgs,
                                      const std::vector<std::string>& ids = {}) {
    Dataset<T> d;
    for (size_t i = 0; i < imgs.size(); ++i) {
        check(imgs[i].channels == 3, "dataset: expected RGB images");
        d.images.push_back(image_to_tensor<T>(imgs[i]));
        d.ids.push_back(i < ids.size() ? ids[i] : "img" + std::to_string(i));
    }
    return d;
}

// Directory of PNGs, sorted by filename for reproducibility.
template <typename T>
inline Dataset<T> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    check(fs::is_directory(dir), "dataset: '" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    check(!files.empty(), "dataset: no .png files in '" + dir + "'");
    Dataset<T> d;
    for (const auto& f : files) {
        ImageBuffer img = load_png(f);
        check(img.channels == 3, "dataset: '" + f + "' is not an RGB image");
        d.images.push_back(image_to_tensor<T>(img));
        d.ids.push_back(fs::path(f).stem().string());
    }
    return d;
}

// ---------------------------------------------------------------------------
// Procedural toy corpus: superposed sinusoidal gratings (random orientation,
// period and per-channel amplitude) plus box-smoothed noise, normalized into
// the 8-bit range. Deterministic in the seed.
// ---------------------------------------------------------------------------

inline std::vector<ImageBuffer> make_toy_corpus(int count = 8, int size = 96,
                                                uint64_t seed = 2020) {
    RngStream rng(seed);
    std::vector<ImageBuffer> out;
    for (int n = 0; n < count; ++n) {
        std::vector<double> field(size_t(size) * size * 3, 0.0);
        int gratings = 2 + int(rng.below(2));
        for (int g = 0; g < gratings; ++g) {
            double theta = rng.uniform() * M_PI;
            double period = 6.0 + rng.uniform() * 14.0;
            double phase = rng.uniform() * 2.0 * M_PI;
            double kx = std::cos(theta) * 2.0 * M_PI / period;
            double ky = std::sin(theta) * 2.0 * M_PI / period;
            double amp[3];
            for (double& a : amp) a = 0.2 + 0.5 * rng.uniform();
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double s = std::sin(kx * x + ky * y + phase);
                    for (int c = 0; c < 3; ++c)
                        field[size_t((y * size + x) * 3 + c)] += amp[c] * s;
                }
        }
        // Smoothed noise layer: uniform noise box-blurred twice.
        std::vector<double> noise(size_t(size) * size);
        for (auto& v : noise) v = rng.uniform() - 0.5;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> blur(noise.size(), 0.0);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            int yy = y + dy, xx = x + dx;
                            if (yy < 0 || yy >= size || xx < 0 || xx >= size) continue;
                            acc += noise[size_t(yy * size + xx)];
                            ++cnt;
                        }
                    blur[size_t(y * size + x)] = acc / cnt;
                }
            noise.swap(blur);
        }
        double namp = 0.3 + 0.4 * rng.uniform();
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                for (int c = 0; c < 3; ++c)
                    field[size_t((y * size + x) * 3 + c)] +=
                        namp * noise[size_t(y * size + x)] * (c == 1 ? 1.2 : 1.0);

        double lo = field[0], hi = field[0];
        for (double v : field) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        ImageBuffer img(size, size, 3, Colorspace::RGB);
        for (size_t i = 0; i < field.size(); ++i) {
            double v = (field[i] - lo) / (hi - lo + 1e-12);
            img.data[i] = quantize_u8(0.03 + 0.94 * v);
        }
        out.push_back(std::move(img));
    }
    return out;
}

inline void write_corpus(const std::vector<ImageBuffer>& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (size_t i = 0; i < corpus.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "toy%02zu.png", i);
        save_png(corpus[i], (std::filesystem::path(dir) / name).string());
    }
}

// ---------------------------------------------------------------------------
// Patch sampling: aligned HR crop and its guide. The guide is always computed
// from the (possibly flipped) crop, never cropped out of a downscaled image:
// the two only agree when offsets align to the scale.
// ---------------------------------------------------------------------------

template <typename T>
struct PatchBatch {
    Tensor<T> x;      // (B, crop, crop, 3)
    Tensor<T> guide;  // (B, crop/s, crop/s, 3) or (B, crop, crop, 1) for color
};

// BT.601 luma plane of an (N,H,W,3) tensor, used as the color-mode guide.
template <typename T>
inline Tensor<T> luma_plane(const Tensor<T>& x) {
    check(x.rank() == 4 && x.dim(3) == 3, "luma_plane: expected (N,H,W,3)");
    long px = x.numel() / 3;
    std::vector<T> out(static_cast<size_t>(px));
    const T* src = x.data().data();
    for (long i = 0; i < px; ++i) {
        double y, cb, cr;
        bt601::rgb_to_ycbcr_f(double(src[3 * i]), double(src[3 * i + 1]), double(src[3 * i + 2]),
                              y, cb, cr);
        out[size_t(i)] = T(y);
    }
    return Tensor<T>::from({x.dim(0), x.dim(1), x.dim(2), 1}, std::move(out));
}

template <typename T>
inline PatchBatch<T> sample_patches(const Dataset<T>& data, int crop, int batch, bool flips,
                                    const IrnModel<T>& model, RngStream& rng) {
    check(!data.images.empty(), "sample_patches: empty dataset");
    int s = model.spatial_factor();
    check(crop % s == 0, "sample_patches: crop size not divisible by the scale");
    std::vector<T> xs(size_t(batch) * crop * crop * 3);
    for (int b = 0; b < batch; ++b) {
        const Tensor<T>& img = data.images[size_t(rng.below(data.images.size()))];
        int h = img.dim(1), w = img.dim(2);
        check(h >= crop && w >= crop, "sample_patches: image " + std::to_string(w) + "x" +
                                          std::to_string(h) + " smaller than crop " +
                                          std::to_string(crop));
        int oy = int(rng.below(uint64_t(h - crop + 1)));
        int ox = int(rng.below(uint64_t(w - crop + 1)));
        bool fh = flips && rng.coin();
        bool fv = flips && rng.coin();
        const T* src = img.data().data();
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x) {
                int sy = oy + (fv ? crop - 1 - y : y);
                int sx = ox + (fh ? crop - 1 - x : x);
                for (int c = 0; c < 3; ++c)
                    xs[size_t(((long(b) * crop + y) * crop + x) * 3 + c)] =
                        src[size_t((long(sy) * w + sx) * 3 + c)];
            }
    }
    PatchBatch<T> out;
    out.x = Tensor<T>::from({batch, crop, crop, 3}, std::move(xs));
    if (model.cfg.variant == Variant::IRN_COLOR)
        out.guide = luma_plane(out.x);
    else
        out.guide = bicubic_resize(out.x, crop / s, crop / s);
    return out;
}

}  // namespace irn
