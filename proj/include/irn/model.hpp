#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "irn/image.hpp"
#include "irn/layers.hpp"
#include "irn/resample.hpp"
#include "irn/tensor.hpp"

namespace irn {

enum class Variant { IRN, IRN_E, IRN_LD, IRN_COLOR };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::IRN: return "IRN";
        case Variant::IRN_E: return "IRN_E";
        case Variant::IRN_LD: return "IRN_LD";
        case Variant::IRN_COLOR: return "IRN_color";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "IRN" || s == "irn") return Variant::IRN;
    if (s == "IRN_E" || s == "irn_e") return Variant::IRN_E;
    if (s == "IRN_LD" || s == "irn_ld") return Variant::IRN_LD;
    if (s == "IRN_color" || s == "irn_color") return Variant::IRN_COLOR;
    fail("unknown variant '" + s + "' (expected IRN | IRN_E | IRN_LD | IRN_color)");
}

struct ModelConfig {
    Variant variant = Variant::IRN;
    int scale = 2;        // spatial scale; unused for IRN_color
    int blocks = 8;       // InvBlocks per downscale module (total for E/LD/color)
    int features = 32;    // dense block width F
    int growth = 16;      // dense block growth G
    float clamp_alpha = 1.0f;
    int channels = 3;     // input image channels
    uint64_t init_seed = 1;
};

// z shape bookkeeping: dim(y) + dim(z) = dim(x) exactly.
struct LatentSpec {
    int spatial_factor = 1;  // s for rescaling, 1 for color
    int y_channels = 3;
    int z_channels = 0;

    Shape z_shape(int n, int in_h, int in_w) const {
        return Shape{n, in_h / spatial_factor, in_w / spatial_factor, z_channels};
    }
};

// ---------------------------------------------------------------------------
// Fixed invertible color stage (BT.601 on normalized values), used by
// IRN_color to split luma from chroma before the coupling blocks.
// ---------------------------------------------------------------------------

namespace detail {

struct ColorMats {
    std::vector<double> fwd, inv;        // 3x3 row-major
    std::vector<double> fwd_off, inv_off;  // length 3
};

inline const ColorMats& color_mats() {
    static const ColorMats m = [] {
        ColorMats cm;
        using namespace bt601;
        cm.fwd = {219.0 * kR / 255.0, 219.0 * kG / 255.0, 219.0 * kB / 255.0,
                  -112.0 * kR / (1 - kB) / 255.0, -112.0 * kG / (1 - kB) / 255.0, 112.0 / 255.0,
                  112.0 / 255.0, -112.0 * kG / (1 - kR) / 255.0, -112.0 * kB / (1 - kR) / 255.0};
        cm.fwd_off = {16.0 / 255.0, 128.0 / 255.0, 128.0 / 255.0};
        double det = 0.0;
        std::vector<double> a(cm.fwd.begin(), cm.fwd.end());
        bool ok = linalg::invert(a, 3, cm.inv, det);
        check(ok, "color transform: matrix not invertible");
        cm.inv_off.assign(3, 0.0);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cm.inv_off[size_t(i)] -= cm.inv[size_t(i) * 3 + j] * cm.fwd_off[size_t(j)];
        return cm;
    }();
    return m;
}

// y = M x + off per pixel, constant coefficients; backward is M^T.
template <typename T>
inline Tensor<T> channel_affine_const(const Tensor<T>& x, const std::vector<double>& mat,
                                      const std::vector<double>& off, const char* name) {
    require_rank4(x, name);
    int c = x.dim(3);
    check(int(off.size()) == c && int(mat.size()) == c * c, "channel_affine_const: bad coeffs");
    long px = x.numel() / c;
    std::vector<T> out(x.data().size());
    const T* src = x.data().data();
    for (long p = 0; p < px; ++p)
        for (int i = 0; i < c; ++i) {
            double acc = off[size_t(i)];
            for (int j = 0; j < c; ++j) acc += mat[size_t(i) * c + j] * double(src[p * c + j]);
            out[size_t(p * c + i)] = T(acc);
        }
    return make_op<T>(name, x.shape(), std::move(out), {x}, [px, c, mat](Node<T>& nd) {
        auto& p = *nd.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const T* g = nd.grad.data();
        for (long q = 0; q < px; ++q)
            for (int j = 0; j < c; ++j) {
                double acc = 0.0;
                for (int i = 0; i < c; ++i) acc += mat[size_t(i) * c + j] * double(g[q * c + i]);
                p.grad[size_t(q * c + j)] += T(acc);
            }
    });
}

}  // namespace detail

template <typename T>
inline Tensor<T> color_split_forward(const Tensor<T>& x) {
    const auto& m = detail::color_mats();
    return detail::channel_affine_const(x, m.fwd, m.fwd_off, "rgb_to_ycbcr");
}

template <typename T>
inline Tensor<T> color_split_inverse(const Tensor<T>& x) {
    const auto& m = detail::color_mats();
    return detail::channel_affine_const(x, m.inv, m.inv_off, "ycbcr_to_rgb");
}

// ---------------------------------------------------------------------------
// Model: an ordered list of invertible stages.
// ---------------------------------------------------------------------------

template <typename T>
struct Stage {
    enum class Kind { Haar, Squeeze, InvConv1x1, Coupling, ColorSplit };
    Kind kind;
    int factor = 2;           // squeeze factor
    InvConv<T> invconv;       // InvConv1x1 only
    InvBlock<T> coupling;     // Coupling only
};

template <typename T>
class IrnModel {
   public:
    ModelConfig cfg;
    std::vector<Stage<T>> stages;
    LatentSpec latent;

    static IrnModel build(const ModelConfig& cfg) {
        IrnModel m;
        m.cfg = cfg;
        RngStream rng(cfg.init_seed);
        const int c0 = cfg.channels;
        check(cfg.blocks >= 1, "build_model: block count must be positive");
        check(cfg.features >= 1 && cfg.growth >= 1, "build_model: dense widths must be positive");

        auto add_coupling_run = [&](int low, int high, int count) {
            for (int i = 0; i < count; ++i) {
                Stage<T> st;
                st.kind = Stage<T>::Kind::Coupling;
                st.coupling.build(low, high, cfg.features, cfg.growth, T(cfg.clamp_alpha), rng);
                m.stages.push_back(std::move(st));
            }
        };

        switch (cfg.variant) {
            case Variant::IRN: {
                int s = cfg.scale;
                check(s == 2 || s == 4 || s == 8,
                      "build_model: IRN scale must be 2, 4 or 8 (stacked 2x modules); use "
                      "IRN_LD for other integer scales");
                int ch = c0;
                for (int mscale = s; mscale > 1; mscale /= 2) {
                    Stage<T> haar;
                    haar.kind = Stage<T>::Kind::Haar;
                    m.stages.push_back(std::move(haar));
                    ch *= 4;
                    add_coupling_run(c0, ch - c0, cfg.blocks);
                }
                m.latent = {s, c0, ch - c0};
                break;
            }
            case Variant::IRN_E: {
                int s = cfg.scale;
                check(s == 2 || s == 4 || s == 8, "build_model: IRN_E scale must be 2, 4 or 8");
                int ch = c0;
                for (int mscale = s; mscale > 1; mscale /= 2) {
                    Stage<T> haar;
                    haar.kind = Stage<T>::Kind::Haar;
                    m.stages.push_back(std::move(haar));
                    ch *= 4;
                }
                add_coupling_run(c0, ch - c0, cfg.blocks);
                m.latent = {s, c0, ch - c0};
                break;
            }
            case Variant::IRN_LD: {
                int s = cfg.scale;
                check(s >= 2, "build_model: IRN_LD scale must be an integer >= 2");
                Stage<T> sq;
                sq.kind = Stage<T>::Kind::Squeeze;
                sq.factor = s;
                m.stages.push_back(std::move(sq));
                int ch = c0 * s * s;
                Stage<T> ic;
                ic.kind = Stage<T>::Kind::InvConv1x1;
                ic.invconv.build(ch, s);
                m.stages.push_back(std::move(ic));
                add_coupling_run(c0, ch - c0, cfg.blocks);
                m.latent = {s, c0, ch - c0};
                break;
            }
            case Variant::IRN_COLOR: {
                check(c0 == 3, "build_model: IRN_color expects 3-channel input");
                Stage<T> cs;
                cs.kind = Stage<T>::Kind::ColorSplit;
                m.stages.push_back(std::move(cs));
                add_coupling_run(1, 2, cfg.blocks);
                m.latent = {1, 1, 2};
                break;
            }
        }
        m.collect_params();
        m.verify_shape_law();
        return m;
    }

    ParamList<T>& params() { return params_; }
    const ParamList<T>& params() const { return params_; }

    int spatial_factor() const { return latent.spatial_factor; }

    // Recompute cached InvConv inverses and monitor determinants; call after
    // every optimizer step.
    void refresh() {
        for (auto& st : stages)
            if (st.kind == Stage<T>::Kind::InvConv1x1) st.invconv.refresh();
    }

    Tensor<T> forward_stages(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (size_t i = 0; i < stages.size(); ++i) h = apply_stage(stages[i], h, i, false);
        return h;
    }

    Tensor<T> inverse_stages(const Tensor<T>& h_in) const {
        Tensor<T> h = h_in;
        for (size_t i = stages.size(); i-- > 0;) h = apply_stage(stages[i], h, i, true);
        return h;
    }

    // (y, z) = f(x)
    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& x) const {
        Tensor<T> h = forward_stages(x);
        auto parts = split_c(h, {latent.y_channels, latent.z_channels});
        return {parts[0], parts[1]};
    }

    // x = f^-1(y, z)
    Tensor<T> inverse(const Tensor<T>& y, const Tensor<T>& z) const {
        check(y.rank() == 4 && z.rank() == 4 && y.dim(0) == z.dim(0) &&
                  y.dim(1) == z.dim(1) && y.dim(2) == z.dim(2),
              "inverse: y " + shape_str(y.shape()) + " and z " + shape_str(z.shape()) +
                  " do not align");
        check(y.dim(3) == latent.y_channels && z.dim(3) == latent.z_channels,
              "inverse: expected channels (" + std::to_string(latent.y_channels) + "," +
                  std::to_string(latent.z_channels) + "), got (" + std::to_string(y.dim(3)) +
                  "," + std::to_string(z.dim(3)) + ")");
        return inverse_stages(concat_c(std::vector<Tensor<T>>{y, z}));
    }

   private:
    ParamList<T> params_;

    Tensor<T> apply_stage(const Stage<T>& st, const Tensor<T>& h, size_t index,
                          bool inverse_dir) const {
        using Kind = typename Stage<T>::Kind;
        switch (st.kind) {
            case Kind::Haar:
                return inverse_dir ? haar_inverse(h) : haar_forward(h);
            case Kind::Squeeze:
                return inverse_dir ? unsqueeze(h, st.factor) : squeeze(h, st.factor);
            case Kind::InvConv1x1:
                return inverse_dir ? st.invconv.inverse(h) : st.invconv.forward(h);
            case Kind::ColorSplit:
                return inverse_dir ? color_split_inverse(h) : color_split_forward(h);
            case Kind::Coupling: {
                auto parts = split_c(h, {st.coupling.c_low, st.coupling.c_high});
                std::pair<Tensor<T>, Tensor<T>> out;
                try {
                    out = inverse_dir ? st.coupling.inverse(parts[0], parts[1])
                                      : st.coupling.forward(parts[0], parts[1]);
                } catch (const Error& e) {
                    fail("stage " + std::to_string(index) + ": " + e.what());
                }
                for (const auto& part : {out.first, out.second})
                    for (T v : part.data())
                        if (!std::isfinite(double(v)))
                            fail("stage " + std::to_string(index) +
                                 ": non-finite activation in coupling block");
                return concat_c(std::vector<Tensor<T>>{out.first, out.second});
            }
        }
        fail("apply_stage: bad stage");
    }

    void collect_params() {
        params_.clear();
        int mod = 0;
        for (auto& st : stages) {
            std::string prefix = "stage" + std::to_string(mod);
            if (st.kind == Stage<T>::Kind::InvConv1x1) st.invconv.collect(params_, prefix);
            if (st.kind == Stage<T>::Kind::Coupling) st.coupling.collect(params_, prefix);
            ++mod;
        }
    }

    void verify_shape_law() {
        // Probe with a tiny input: dim(y) + dim(z) must equal dim(x).
        int s = latent.spatial_factor;
        int h = 2 * s, w = 2 * s;
        auto x = Tensor<T>::zeros({1, h, w, cfg.channels});
        auto [y, z] = forward(x);
        long total = y.numel() + z.numel();
        check(total == x.numel(), "build_model: inconsistent channel arithmetic: dim(y)+dim(z)=" +
                                      std::to_string(total) + " vs dim(x)=" +
                                      std::to_string(x.numel()));
        Shape want = latent.z_shape(1, h, w);
        check(z.shape() == want, "build_model: latent shape " + shape_str(z.shape()) +
                                     " does not match spec " + shape_str(want));
    }
};

// ---------------------------------------------------------------------------
// Downscale / upscale product paths (8-bit in, 8-bit out).
// ---------------------------------------------------------------------------

enum class ZMode { Sample, Zero, Given };

struct ZSpec {
    ZMode mode = ZMode::Sample;
    uint64_t seed = 0;
};

template <typename T>
struct DownscaleResult {
    ImageBuffer y;       // quantized LR (or grayscale) image, the product output
    Tensor<T> y_float;   // pre-quantization y, diagnostics only
    Tensor<T> z;         // latent, diagnostics only; never persisted
};

template <typename T>
inline DownscaleResult<T> downscale(const IrnModel<T>& model, const ImageBuffer& img) {
    int s = model.spatial_factor();
    check(img.width % s == 0 && img.height % s == 0,
          "downscale: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
              " not divisible by scale " + std::to_string(s) +
              "; use fractional rescaling (bicubic pre-resize wrapper) for such sizes");
    check(img.channels == model.cfg.channels, "downscale: channel mismatch");
    auto x = image_to_tensor<T>(img);
    auto [y, z] = model.forward(x);
    DownscaleResult<T> out;
    out.y_float = y;
    out.z = z;
    out.y = tensor_to_image(quantize8(y).detach(),
                            model.cfg.variant == Variant::IRN_COLOR ? Colorspace::Grayscale
                                                                    : img.colorspace);
    return out;
}

template <typename T>
inline Tensor<T> make_z(const IrnModel<T>& model, int n, int in_h, int in_w, const ZSpec& spec,
                        const Tensor<T>* given = nullptr) {
    Shape zs = model.latent.z_shape(n, in_h, in_w);
    switch (spec.mode) {
        case ZMode::Sample:
            return gaussian_sample<T>(zs, spec.seed);
        case ZMode::Zero:
            return Tensor<T>::zeros(zs);
        case ZMode::Given:
            check(given != nullptr, "upscale: z mode 'given' without a tensor");
            check(given->shape() == zs, "upscale: given z shape " + shape_str(given->shape()) +
                                            " does not match required " + shape_str(zs));
            return *given;
    }
    fail("make_z: bad mode");
}

template <typename T>
inline ImageBuffer upscale(const IrnModel<T>& model, const ImageBuffer& y_img, const ZSpec& spec,
                           const Tensor<T>* given_z = nullptr) {
    check(y_img.channels == model.latent.y_channels, "upscale: LR channels " +
                                                         std::to_string(y_img.channels) +
                                                         " vs model " +
                                                         std::to_string(model.latent.y_channels));
    int s = model.spatial_factor();
    auto y = image_to_tensor<T>(y_img);
    auto z = make_z(model, 1, y_img.height * s, y_img.width * s, spec, given_z);
    auto x = model.inverse(y, z);
    return tensor_to_image(quantize8(x).detach(), Colorspace::RGB);
}

// ---------------------------------------------------------------------------
// Fractional scaling wrapper: bicubic by s2/s1 into the nearest integer-scale
// model, and s1/s2 on the way back.
// ---------------------------------------------------------------------------

struct Fraction {
    long num = 1, den = 1;
    double value() const { return double(num) / double(den); }
};

inline Fraction parse_fraction(const std::string& s) {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        long num = std::stol(s.substr(0, slash));
        long den = std::stol(s.substr(slash + 1));
        check(num > 0 && den > 0, "scale: must be positive");
        return {num, den};
    }
    // Decimal: keep as an exact fraction over a power of ten.
    double v = std::stod(s);
    check(v > 0, "scale: must be positive");
    long den = 1;
    while (std::fabs(v * den - std::round(v * den)) > 1e-9 && den < 100000) den *= 10;
    return {long(std::lround(v * den)), den};
}

// Pre-resize dimensions for the fractional path; errors if the arithmetic
// does not land on integers divisible by the model scale.
inline std::pair<int, int> fractional_pre_size(int w, int h, const Fraction& s1, int s2) {
    long num = long(s2) * s1.den, den = s1.num;  // multiply dims by s2/s1
    check((long(w) * num) % den == 0 && (long(h) * num) % den == 0,
          "fractional rescale: " + std::to_string(w) + "x" + std::to_string(h) +
              " times " + std::to_string(num) + "/" + std::to_string(den) +
              " is not integral; pick dimensions compatible with the scale");
    return {int(long(w) * num / den), int(long(h) * num / den)};
}

template <typename T>
inline DownscaleResult<T> downscale_fractional(const IrnModel<T>& model, const ImageBuffer& img,
                                               const Fraction& s1) {
    int s2 = model.spatial_factor();
    check(std::lround(s1.value()) == s2,
          "fractional rescale: round(" + std::to_string(s1.value()) + ") != model scale " +
              std::to_string(s2));
    auto [pw, ph] = fractional_pre_size(img.width, img.height, s1, s2);
    ImageBuffer pre = (pw == img.width && ph == img.height) ? img : bicubic_resize(img, pw, ph);
    return downscale(model, pre);
}

template <typename T>
inline ImageBuffer upscale_fractional(const IrnModel<T>& model, const ImageBuffer& y_img,
                                      const Fraction& s1, int out_w, int out_h,
                                      const ZSpec& spec, const Tensor<T>* given_z = nullptr) {
    ImageBuffer big = upscale(model, y_img, spec, given_z);
    if (big.width == out_w && big.height == out_h) return big;
    return bicubic_resize(big, out_w, out_h);
}

}  // namespace irn
