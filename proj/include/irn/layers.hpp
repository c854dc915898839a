#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "irn/adam.hpp"
#include "irn/conv.hpp"
#include "irn/rng.hpp"
#include "irn/tensor.hpp"

namespace irn {

// ---------------------------------------------------------------------------
// Haar transform: (N,H,W,C) -> (N,H/2,W/2,4C), channel groups [LL|HL|LH|HH].
// Normalized so LL is the 2x2 block mean.
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> haar_forward(const Tensor<T>& x) {
    detail::require_rank4(x, "haar_forward");
    int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    check(h % 2 == 0 && w % 2 == 0, "haar_forward: odd spatial dimension in " +
                                        shape_str(x.shape()));
    int oh = h / 2, ow = w / 2, oc = 4 * c;
    std::vector<T> out(size_t(x.numel()));
    const T* src = x.data().data();
    auto sidx = [=](long b, long y, long xx, long ch) {
        return size_t(((b * h + y) * w + xx) * c + ch);
    };
    for (long b = 0; b < n; ++b)
        for (long y = 0; y < oh; ++y)
            for (long xx = 0; xx < ow; ++xx)
                for (long ch = 0; ch < c; ++ch) {
                    T a = src[sidx(b, 2 * y, 2 * xx, ch)];
                    T bb = src[sidx(b, 2 * y, 2 * xx + 1, ch)];
                    T cc = src[sidx(b, 2 * y + 1, 2 * xx, ch)];
                    T dd = src[sidx(b, 2 * y + 1, 2 * xx + 1, ch)];
                    size_t base = size_t(((b * oh + y) * ow + xx) * oc);
                    out[base + size_t(ch)] = (a + bb + cc + dd) / T(4);
                    out[base + size_t(c + ch)] = (a - bb + cc - dd) / T(4);
                    out[base + size_t(2 * c + ch)] = (a + bb - cc - dd) / T(4);
                    out[base + size_t(3 * c + ch)] = (a - bb - cc + dd) / T(4);
                }
    return detail::make_op<T>(
        "haar_forward", Shape{n, oh, ow, oc}, std::move(out), {x}, [=](Node<T>& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            const T* g = nd.grad.data();
            for (long b = 0; b < n; ++b)
                for (long y = 0; y < oh; ++y)
                    for (long xx = 0; xx < ow; ++xx)
                        for (long ch = 0; ch < c; ++ch) {
                            size_t base = size_t(((b * oh + y) * ow + xx) * oc);
                            T gll = g[base + size_t(ch)] / T(4);
                            T ghl = g[base + size_t(c + ch)] / T(4);
                            T glh = g[base + size_t(2 * c + ch)] / T(4);
                            T ghh = g[base + size_t(3 * c + ch)] / T(4);
                            p.grad[sidx(b, 2 * y, 2 * xx, ch)] += gll + ghl + glh + ghh;
                            p.grad[sidx(b, 2 * y, 2 * xx + 1, ch)] += gll - ghl + glh - ghh;
                            p.grad[sidx(b, 2 * y + 1, 2 * xx, ch)] += gll + ghl - glh - ghh;
                            p.grad[sidx(b, 2 * y + 1, 2 * xx + 1, ch)] += gll - ghl - glh + ghh;
                        }
        });
}

template <typename T>
inline Tensor<T> haar_inverse(const Tensor<T>& x) {
    detail::require_rank4(x, "haar_inverse");
    int n = x.dim(0), h = x.dim(1), w = x.dim(2), oc = x.dim(3);
    check(oc % 4 == 0, "haar_inverse: channels not a multiple of 4 in " + shape_str(x.shape()));
    int c = oc / 4, oh = 2 * h, ow = 2 * w;
    std::vector<T> out(size_t(x.numel()));
    const T* src = x.data().data();
    auto didx = [=](long b, long y, long xx, long ch) {
        return size_t(((b * oh + y) * ow + xx) * c + ch);
    };
    for (long b = 0; b < n; ++b)
        for (long y = 0; y < h; ++y)
            for (long xx = 0; xx < w; ++xx)
                for (long ch = 0; ch < c; ++ch) {
                    size_t base = size_t(((b * h + y) * w + xx) * oc);
                    T ll = src[base + size_t(ch)];
                    T hl = src[base + size_t(c + ch)];
                    T lh = src[base + size_t(2 * c + ch)];
                    T hh = src[base + size_t(3 * c + ch)];
                    out[didx(b, 2 * y, 2 * xx, ch)] = ll + hl + lh + hh;
                    out[didx(b, 2 * y, 2 * xx + 1, ch)] = ll - hl + lh - hh;
                    out[didx(b, 2 * y + 1, 2 * xx, ch)] = ll + hl - lh - hh;
                    out[didx(b, 2 * y + 1, 2 * xx + 1, ch)] = ll - hl - lh + hh;
                }
    return detail::make_op<T>(
        "haar_inverse", Shape{n, oh, ow, c}, std::move(out), {x}, [=](Node<T>& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            const T* g = nd.grad.data();
            for (long b = 0; b < n; ++b)
                for (long y = 0; y < h; ++y)
                    for (long xx = 0; xx < w; ++xx)
                        for (long ch = 0; ch < c; ++ch) {
                            T ga = g[didx(b, 2 * y, 2 * xx, ch)];
                            T gb = g[didx(b, 2 * y, 2 * xx + 1, ch)];
                            T gc = g[didx(b, 2 * y + 1, 2 * xx, ch)];
                            T gd = g[didx(b, 2 * y + 1, 2 * xx + 1, ch)];
                            size_t base = size_t(((b * h + y) * w + xx) * oc);
                            p.grad[base + size_t(ch)] += ga + gb + gc + gd;
                            p.grad[base + size_t(c + ch)] += ga - gb + gc - gd;
                            p.grad[base + size_t(2 * c + ch)] += ga + gb - gc - gd;
                            p.grad[base + size_t(3 * c + ch)] += ga - gb - gc + gd;
                        }
        });
}

// ---------------------------------------------------------------------------
// Squeeze: (N,H,W,C) -> (N,H/n,W/n,n^2*C). Output channel index is
// p*C + c where p is the row-major position inside the n x n cell.
// ---------------------------------------------------------------------------

namespace detail {

// Walks the squeeze permutation between the unsqueezed (N,H,W,C) layout and
// the squeezed (N,H/f,W/f,f*f*C) layout. `to_squeezed` picks the direction.
template <typename T>
inline void squeeze_index_walk(int n, int h, int w, int c, int factor, bool to_squeezed,
                               const T* from, T* to) {
    int oh = h / factor, ow = w / factor;
    long oc = long(factor) * factor * c;
    for (long b = 0; b < n; ++b)
        for (long y = 0; y < oh; ++y)
            for (long xx = 0; xx < ow; ++xx)
                for (int py = 0; py < factor; ++py)
                    for (int px = 0; px < factor; ++px)
                        for (long ch = 0; ch < c; ++ch) {
                            size_t ui = size_t(((b * h + y * factor + py) * w + xx * factor + px) *
                                                   c + ch);
                            size_t si = size_t(((b * oh + y) * ow + xx) * oc +
                                               (long(py) * factor + px) * c + ch);
                            if (to_squeezed)
                                to[si] = from[ui];
                            else
                                to[ui] = from[si];
                        }
}

}  // namespace detail

template <typename T>
inline Tensor<T> squeeze(const Tensor<T>& x, int factor) {
    detail::require_rank4(x, "squeeze");
    int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    check(factor >= 1 && h % factor == 0 && w % factor == 0,
          "squeeze: dimensions " + shape_str(x.shape()) + " not divisible by " +
              std::to_string(factor));
    std::vector<T> out(size_t(x.numel()));
    detail::squeeze_index_walk(n, h, w, c, factor, true, x.data().data(), out.data());
    Shape oshape{n, h / factor, w / factor, factor * factor * c};
    return detail::make_op<T>("squeeze", oshape, std::move(out), {x}, [=](Node<T>& nd) {
        auto& p = *nd.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        // Permutation: scatter the gradient back through the same walk.
        std::vector<T> tmp(nd.grad.size());
        detail::squeeze_index_walk(n, h, w, c, factor, false, nd.grad.data(), tmp.data());
        for (size_t i = 0; i < tmp.size(); ++i) p.grad[i] += tmp[i];
    });
}

template <typename T>
inline Tensor<T> unsqueeze(const Tensor<T>& x, int factor) {
    detail::require_rank4(x, "unsqueeze");
    int n = x.dim(0), oh = x.dim(1), ow = x.dim(2), oc = x.dim(3);
    check(oc % (factor * factor) == 0, "unsqueeze: channels " + std::to_string(oc) +
                                           " not divisible by " + std::to_string(factor * factor));
    int c = oc / (factor * factor);
    int h = oh * factor, w = ow * factor;
    std::vector<T> out(size_t(x.numel()));
    detail::squeeze_index_walk(n, h, w, c, factor, false, x.data().data(), out.data());
    return detail::make_op<T>("unsqueeze", Shape{n, h, w, c}, std::move(out), {x},
                              [=](Node<T>& nd) {
                                  auto& p = *nd.parents[0];
                                  if (!p.requires_grad) return;
                                  p.ensure_grad();
                                  std::vector<T> tmp(nd.grad.size());
                                  detail::squeeze_index_walk(n, h, w, c, factor, true,
                                                             nd.grad.data(), tmp.data());
                                  for (size_t i = 0; i < tmp.size(); ++i) p.grad[i] += tmp[i];
                              });
}

// ---------------------------------------------------------------------------
// Dense linear algebra for the 1x1 invertible convolution.
// ---------------------------------------------------------------------------

namespace linalg {

// Gauss-Jordan with partial pivoting; returns false when singular. det gets
// the determinant of the input.
template <typename T>
inline bool invert(const std::vector<T>& a_in, int n, std::vector<T>& inv, double& det) {
    std::vector<double> a(a_in.begin(), a_in.end());
    std::vector<double> b(size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) b[size_t(i) * n + i] = 1.0;
    det = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(a[size_t(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double v = std::fabs(a[size_t(r) * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0) {
            det = 0.0;
            return false;
        }
        if (pivot != col) {
            for (int k = 0; k < n; ++k) {
                std::swap(a[size_t(pivot) * n + k], a[size_t(col) * n + k]);
                std::swap(b[size_t(pivot) * n + k], b[size_t(col) * n + k]);
            }
            det = -det;
        }
        double d = a[size_t(col) * n + col];
        det *= d;
        double invd = 1.0 / d;
        for (int k = 0; k < n; ++k) {
            a[size_t(col) * n + k] *= invd;
            b[size_t(col) * n + k] *= invd;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[size_t(r) * n + col];
            if (f == 0.0) continue;
            for (int k = 0; k < n; ++k) {
                a[size_t(r) * n + k] -= f * a[size_t(col) * n + k];
                b[size_t(r) * n + k] -= f * b[size_t(col) * n + k];
            }
        }
    }
    inv.assign(b.begin(), b.end());
    return true;
}

}  // namespace linalg

// Inverse-direction channel mix x = W^-1 h with gradients w.r.t. both the
// input and W itself (dW = -W^-T G W^-T where G is the gradient w.r.t. W^-1).
template <typename T>
inline Tensor<T> channel_matmul_inverse(const Tensor<T>& x, const Tensor<T>& w,
                                        const std::vector<T>& w_inv) {
    detail::require_rank4(x, "channel_matmul_inverse");
    int c = x.dim(3);
    check(w.rank() == 2 && w.dim(0) == c && w.dim(1) == c,
          "channel_matmul_inverse: W " + shape_str(w.shape()) + " vs channels " +
              std::to_string(c));
    long px = x.numel() / c;
    std::vector<T> out(size_t(px) * c);
    gemm::a_bt(x.data().data(), w_inv.data(), out.data(), px, c, c, false);
    return detail::make_op<T>(
        "channel_matmul_inverse", x.shape(), std::move(out), {x, w},
        [px, c, w_inv](Node<T>& nd) {
            auto& pxn = *nd.parents[0];
            auto& pwn = *nd.parents[1];
            const T* dout = nd.grad.data();
            if (pwn.requires_grad) {
                pwn.ensure_grad();
                // G = dL/d(W^-1): accumulate over pixels, then chain through
                // the matrix inverse.
                std::vector<T> g(size_t(c) * c, T(0));
                gemm::at_b_acc(dout, pxn.value.data(), g.data(), px, c, c);
                std::vector<T> tmp(size_t(c) * c, T(0));
                // tmp = W^-T * G  ->  dW = -tmp * W^-T
                for (int i = 0; i < c; ++i)
                    for (int k = 0; k < c; ++k) {
                        T a = w_inv[size_t(k) * c + i];  // (W^-1)^T[i,k]
                        for (int j = 0; j < c; ++j) tmp[size_t(i) * c + j] += a * g[size_t(k) * c + j];
                    }
                for (int i = 0; i < c; ++i)
                    for (int j = 0; j < c; ++j) {
                        T acc = T(0);
                        for (int k = 0; k < c; ++k)
                            acc += tmp[size_t(i) * c + k] * w_inv[size_t(j) * c + k];
                        pwn.grad[size_t(i) * c + j] -= acc;
                    }
            }
            if (pxn.requires_grad) {
                pxn.ensure_grad();
                std::vector<T> dx(size_t(px) * c);
                gemm::nn(dout, w_inv.data(), dx.data(), px, c, c, (const T*)nullptr);
                for (size_t i = 0; i < dx.size(); ++i) pxn.grad[i] += dx[i];
            }
        });
}

// 1x1 invertible convolution over squeezed channels. Initialization puts the
// channel average in row 0 and the identity in the remaining rows; the cached
// inverse is recomputed whenever the weight changes and the determinant is
// monitored against a singularity floor.
template <typename T>
struct InvConv {
    Tensor<T> weight;  // (C, C)
    int channels = 0;
    std::vector<T> inv_cache;
    double det = 1.0;

    static constexpr double kDetFloor = 1e-8;

    void build(int c, int factor) {
        channels = c;
        std::vector<T> w(size_t(c) * c, T(0));
        T avg = T(1.0 / double(factor * factor));
        for (int j = 0; j < c; ++j) w[size_t(j)] = avg;
        for (int i = 1; i < c; ++i) w[size_t(i) * c + i] = T(1);
        weight = Tensor<T>::param({c, c}, std::move(w));
        refresh();
    }

    // Recompute the cached inverse; called after every optimizer step.
    void refresh() {
        double d = 0.0;
        bool ok = linalg::invert(weight.data(), channels, inv_cache, d);
        det = d;
        if (!ok || std::fabs(d) < kDetFloor)
            fail("invconv: weight matrix is singular (|det| = " + std::to_string(std::fabs(d)) +
                 "); training halted");
        // Sanity of the cached inverse.
        double worst = 0.0;
        const auto& w = weight.data();
        for (int i = 0; i < channels; ++i)
            for (int j = 0; j < channels; ++j) {
                double acc = 0.0;
                for (int k = 0; k < channels; ++k)
                    acc += double(w[size_t(i) * channels + k]) *
                           double(inv_cache[size_t(k) * channels + j]);
                worst = std::max(worst, std::fabs(acc - (i == j ? 1.0 : 0.0)));
            }
        check(worst < 1e-5, "invconv: cached inverse drifted (" + std::to_string(worst) + ")");
    }

    Tensor<T> forward(const Tensor<T>& x) const { return channel_matmul(x, weight); }
    Tensor<T> inverse(const Tensor<T>& x) const {
        return channel_matmul_inverse(x, weight, inv_cache);
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", weight});
    }
};

// ---------------------------------------------------------------------------
// Densely connected convolutional block: 5 3x3 convs, the first producing
// `feat` channels and the middle ones growing by `growth`; leaky-relu between
// layers and a zero-initialized final layer so the block starts as zero.
// ---------------------------------------------------------------------------

template <typename T>
struct DenseBlock {
    int in_ch = 0, out_ch = 0, feat = 0, growth = 0;
    Tensor<T> w[5], b[5];

    void build(int in_c, int out_c, int f, int g, RngStream& rng) {
        in_ch = in_c;
        out_ch = out_c;
        feat = f;
        growth = g;
        int widths_in[5] = {in_c, in_c + f, in_c + f + g, in_c + f + 2 * g, in_c + f + 3 * g};
        int widths_out[5] = {f, g, g, g, out_c};
        for (int i = 0; i < 5; ++i) {
            long n = 9L * widths_in[i] * widths_out[i];
            std::vector<T> wv(size_t(n), T(0));
            if (i < 4) {
                double std_dev = 0.1 * std::sqrt(2.0 / double(9 * (widths_in[i] + widths_out[i])));
                for (auto& v : wv) v = T(rng.normal() * std_dev);
            }
            w[i] = Tensor<T>::param({3, 3, widths_in[i], widths_out[i]}, std::move(wv));
            b[i] = Tensor<T>::param({widths_out[i]}, std::vector<T>(size_t(widths_out[i]), T(0)));
        }
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        auto c1 = leaky_relu(conv2d(x, w[0], b[0], 1, 1));
        auto c2 = leaky_relu(conv2d(concat_c(std::vector<Tensor<T>>{x, c1}), w[1], b[1], 1, 1));
        auto c3 =
            leaky_relu(conv2d(concat_c(std::vector<Tensor<T>>{x, c1, c2}), w[2], b[2], 1, 1));
        auto c4 = leaky_relu(
            conv2d(concat_c(std::vector<Tensor<T>>{x, c1, c2, c3}), w[3], b[3], 1, 1));
        return conv2d(concat_c(std::vector<Tensor<T>>{x, c1, c2, c3, c4}), w[4], b[4], 1, 1);
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        static const char* names[5] = {"conv1", "conv2", "conv3", "conv4", "conv5"};
        for (int i = 0; i < 5; ++i) {
            out.push_back({prefix + "." + names[i] + ".w", w[i]});
            out.push_back({prefix + "." + names[i] + ".b", b[i]});
        }
    }
};

// ---------------------------------------------------------------------------
// Coupling block. Additive update on the low branch, affine on the high
// branch with a clamped log-scale: rho~ = alpha * (2 sigmoid(rho) - 1).
// ---------------------------------------------------------------------------

template <typename T>
struct InvBlock {
    int c_low = 0, c_high = 0;
    T alpha = T(1);
    DenseBlock<T> phi;  // c_high -> c_low
    DenseBlock<T> eta;  // c_low  -> c_high
    DenseBlock<T> rho;  // c_low  -> c_high

    void build(int low, int high, int f, int g, T clamp_alpha, RngStream& rng) {
        c_low = low;
        c_high = high;
        alpha = clamp_alpha;
        phi.build(high, low, f, g, rng);
        eta.build(low, high, f, g, rng);
        rho.build(low, high, f, g, rng);
    }

    Tensor<T> log_scale(const Tensor<T>& h1_next) const {
        // alpha * (2 sigmoid(rho(.)) - 1), bounded to [-alpha, alpha].
        return mul_scalar(add_scalar(mul_scalar(sigmoid(rho.apply(h1_next)), T(2)), T(-1)), alpha);
    }

    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& h1, const Tensor<T>& h2) const {
        check(h1.dim(3) == c_low && h2.dim(3) == c_high,
              "invblock: split sizes " + std::to_string(h1.dim(3)) + "/" +
                  std::to_string(h2.dim(3)) + " do not match block config " +
                  std::to_string(c_low) + "/" + std::to_string(c_high));
        auto h1n = add(h1, phi.apply(h2));
        auto scale = irn::exp(log_scale(h1n));
        auto h2n = add(mul(h2, scale), eta.apply(h1n));
        return {h1n, h2n};
    }

    std::pair<Tensor<T>, Tensor<T>> inverse(const Tensor<T>& h1n, const Tensor<T>& h2n) const {
        check(h1n.dim(3) == c_low && h2n.dim(3) == c_high,
              "invblock: split sizes do not match block config");
        auto scale = irn::exp(mul_scalar(log_scale(h1n), T(-1)));
        auto h2 = mul(sub(h2n, eta.apply(h1n)), scale);
        auto h1 = sub(h1n, phi.apply(h2));
        return {h1, h2};
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        phi.collect(out, prefix + ".phi");
        eta.collect(out, prefix + ".eta");
        rho.collect(out, prefix + ".rho");
    }
};

}  // namespace irn
