#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "irn/config.hpp"
#include "irn/conv.hpp"
#include "irn/tensor.hpp"

namespace irn {

template <typename T>
inline Tensor<T> pointwise_loss(const Tensor<T>& a, const Tensor<T>& b, Metric metric) {
    check(a.shape() == b.shape(), "loss: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
    auto d = sub(a, b);
    return metric == Metric::L1 ? mean(irn::abs(d)) : mean(square(d));
}

// HR reconstruction term: mean elementwise difference under the chosen metric.
template <typename T>
inline Tensor<T> loss_recon(const Tensor<T>& x, const Tensor<T>& x_hat, Metric metric) {
    return pointwise_loss(x_hat, x, metric);
}

// LR guidance term against the reference-resampler output.
template <typename T>
inline Tensor<T> loss_guide(const Tensor<T>& y_model, const Tensor<T>& y_guide, Metric metric) {
    return pointwise_loss(y_model, y_guide, metric);
}

// Surrogate distribution term: negative Gaussian log-density of the forward
// latent, (|z|^2 + K log 2pi)/2, averaged over the batch.
template <typename T>
inline Tensor<T> loss_ce_z(const Tensor<T>& z) {
    for (T v : z.data())
        check(std::isfinite(double(v)), "loss_ce_z: non-finite latent value");
    int batch = z.rank() >= 1 ? z.dim(0) : 1;
    long per_sample = z.numel() / batch;
    auto s = sum(square(z));
    auto shifted = add_scalar(s, T(double(z.numel()) * kLog2Pi));
    return mul_scalar(shifted, T(0.5 / double(batch)));
}

// Numerically stable log(sigmoid(x)); log(1 - sigmoid(x)) is log_sigmoid(-x).
template <typename T>
inline Tensor<T> log_sigmoid(const Tensor<T>& x) {
    return detail::unary_op(
        "log_sigmoid", x,
        [](T v) {
            return v < T(0) ? v - T(std::log1p(std::exp(double(v))))
                            : T(-std::log1p(std::exp(-double(v))));
        },
        [](T v, T) {
            // d/dv log sigmoid(v) = sigmoid(-v)
            return v < T(0) ? T(1) / (T(1) + T(std::exp(double(v))))
                            : T(1) - T(1) / (T(1) + T(std::exp(-double(v))));
        });
}

// log(1/2) computed by the same stable path, so the T==0 estimate cancels to
// exactly zero.
template <typename T>
inline T log_half_constant() {
    return T(-std::log1p(1.0));
}

template <typename T>
struct JsParts {
    Tensor<T> js_estimate;  // JS divergence estimate (>= 0 at the optimum, 0 for T==0)
    Tensor<T> disc_loss;    // discriminator minimizes this (maximizes the bracket)
    Tensor<T> gen_loss;     // non-saturating generator term
};

// Pieces of the JS estimate from discriminator outputs on real and
// reconstructed batches. bracket = (E log s(T(x)) + E log(1-s(T(x'))))/2.
template <typename T>
inline JsParts<T> js_from_outputs(const Tensor<T>& t_real, const Tensor<T>& t_fake) {
    check(t_real.numel() == t_fake.numel(), "js: batch size mismatch");
    auto real_term = mean(log_sigmoid(t_real));
    auto fake_term = mean(log_sigmoid(mul_scalar(t_fake, T(-1))));
    auto bracket = add(mul_scalar(real_term, T(0.5)), mul_scalar(fake_term, T(0.5)));
    JsParts<T> out;
    out.js_estimate = add_scalar(bracket, -log_half_constant<T>());
    out.disc_loss = mul_scalar(bracket, T(-1));
    out.gen_loss = mul_scalar(mean(log_sigmoid(t_fake)), T(-1));
    return out;
}

// ---------------------------------------------------------------------------
// Discriminator: 8 conv layers (3x3, channels base..8*base doubling every two
// layers, stride 2 on every second layer), then two dense layers with 100
// hidden units producing one scalar per image.
// ---------------------------------------------------------------------------

template <typename T>
struct Discriminator {
    int crop = 0;
    int base = 64;
    Tensor<T> w[8], b[8];
    Tensor<T> fc1w, fc1b, fc2w, fc2b;

    void build(int crop_size, int base_width, RngStream& rng) {
        check(crop_size % 16 == 0, "discriminator: crop size must be divisible by 16");
        crop = crop_size;
        base = base_width;
        int cin = 3;
        for (int i = 0; i < 8; ++i) {
            int cout = base * (1 << (i / 2));
            long n = 9L * cin * cout;
            std::vector<T> wv(static_cast<size_t>(n));
            double std_dev = 0.1 * std::sqrt(2.0 / double(9 * cin));
            for (auto& v : wv) v = T(rng.normal() * std_dev);
            w[i] = Tensor<T>::param({3, 3, cin, cout}, std::move(wv));
            b[i] = Tensor<T>::param({cout}, std::vector<T>(size_t(cout), T(0)));
            cin = cout;
        }
        long flat = long(crop / 16) * (crop / 16) * base * 8;
        std::vector<T> f1(static_cast<size_t>(flat) * 100);
        for (auto& v : f1) v = T(rng.normal() * 0.01);
        fc1w = Tensor<T>::param({int(flat), 100}, std::move(f1));
        fc1b = Tensor<T>::param({100}, std::vector<T>(100, T(0)));
        std::vector<T> f2(100);
        for (auto& v : f2) v = T(rng.normal() * 0.01);
        fc2w = Tensor<T>::param({100, 1}, std::move(f2));
        fc2b = Tensor<T>::param({1}, std::vector<T>(1, T(0)));
    }

    // (N, crop, crop, 3) -> (N, 1) raw score T(x).
    Tensor<T> apply(const Tensor<T>& x) const {
        check(x.rank() == 4 && x.dim(1) == crop && x.dim(2) == crop && x.dim(3) == 3,
              "discriminator: expected (N," + std::to_string(crop) + "," + std::to_string(crop) +
                  ",3), got " + shape_str(x.shape()));
        Tensor<T> h = x;
        for (int i = 0; i < 8; ++i)
            h = leaky_relu(conv2d(h, w[i], b[i], (i % 2 == 1) ? 2 : 1, 1));
        auto hidden = leaky_relu(linear(h, fc1w, fc1b));
        return linear(hidden, fc2w, fc2b);
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        for (int i = 0; i < 8; ++i) {
            out.push_back({prefix + ".conv" + std::to_string(i) + ".w", w[i]});
            out.push_back({prefix + ".conv" + std::to_string(i) + ".b", b[i]});
        }
        out.push_back({prefix + ".fc1.w", fc1w});
        out.push_back({prefix + ".fc1.b", fc1b});
        out.push_back({prefix + ".fc2.w", fc2w});
        out.push_back({prefix + ".fc2.b", fc2b});
    }
};

// Spec-facing composite: run the discriminator on both batches and return the
// estimator pieces.
template <typename T>
inline JsParts<T> loss_distr_js(const Tensor<T>& x_real, const Tensor<T>& x_fake,
                                const Discriminator<T>& disc) {
    return js_from_outputs(disc.apply(x_real), disc.apply(x_fake));
}

}  // namespace irn
