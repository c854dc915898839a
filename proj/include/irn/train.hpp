#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "irn/adam.hpp"
#include "irn/checkpoint.hpp"
#include "irn/config.hpp"
#include "irn/data.hpp"
#include "irn/losses.hpp"
#include "irn/model.hpp"

namespace irn {

struct LossRow {
    long iter;
    double recon, guide, distr, total, lr;
};

inline std::string loss_log_csv(const std::vector<LossRow>& rows) {
    std::string out = "iter,recon,guide,distr,total,lr\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%ld,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.iter, r.recon,
                      r.guide, r.distr, r.total, r.lr);
        out += buf;
    }
    return out;
}

inline double schedule_lr(double base, const std::vector<long>& milestones, long iter) {
    double lr = base;
    for (long m : milestones)
        if (iter >= m) lr *= 0.5;
    return lr;
}

template <typename T>
struct StageResult {
    std::vector<LossRow> log;
    std::vector<double> disc_pretrain_losses;  // stage 2 only
};

namespace detail {

template <typename T>
inline uint64_t derive_seed(RngStream& rng) {
    return (uint64_t(rng.next_u32()) << 32) | rng.next_u32();
}

// Uniform noise in [-amp, amp], detached; models codec perturbations of the
// stored LR image during the robustness finetune.
template <typename T>
inline Tensor<T> uniform_noise(const Shape& shape, double amp, RngStream& rng) {
    std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = T((rng.uniform() * 2.0 - 1.0) * amp);
    return Tensor<T>::from(shape, std::move(v));
}

}  // namespace detail

template <typename T>
struct Stage1Losses {
    Tensor<T> total, recon, guide, ce;
    Tensor<T> z;
};

// One evaluation of the stage-1 objective on a batch: forward, guidance on
// the continuous y, quantize (STE), invert with a drawn latent, reconstruct.
template <typename T>
inline Stage1Losses<T> stage1_losses(const IrnModel<T>& model, const PatchBatch<T>& batch,
                                     const TrainConfig& tc, const LossWeights& lw,
                                     RngStream& rng) {
    auto [y, z] = model.forward(batch.x);
    Stage1Losses<T> out;
    out.z = z;
    out.guide = loss_guide(y, batch.guide, lw.metric_y);
    Tensor<T> y_q = tc.quantize_train ? quantize8(y) : y;
    if (tc.noise_std > 0)
        y_q = add(y_q, detail::uniform_noise<T>(y_q.shape(), tc.noise_std, rng));
    Tensor<T> recon_sum;
    for (int k = 0; k < tc.z_samples; ++k) {
        Tensor<T> zp = tc.recon_z_zero
                           ? Tensor<T>::zeros(z.shape())
                           : gaussian_sample<T>(z.shape(), detail::derive_seed<T>(rng));
        auto x_hat = model.inverse(y_q, zp);
        auto r = loss_recon(batch.x, x_hat, lw.metric_x);
        recon_sum = k == 0 ? r : add(recon_sum, r);
    }
    out.recon = tc.z_samples == 1 ? recon_sum
                                  : mul_scalar(recon_sum, T(1.0 / double(tc.z_samples)));
    out.ce = loss_ce_z(z);
    double l2 = lw.guide_weight(model.cfg);
    out.total = add(mul_scalar(out.recon, T(lw.lambda1)),
                    add(mul_scalar(out.guide, T(l2)), mul_scalar(out.ce, T(lw.lambda3))));
    return out;
}

// Pre-training stage: minimize lambda1*recon + lambda2*guide + lambda3*ce.
// Deterministic under a fixed seed in single-threaded mode. On a non-finite
// loss the last-good snapshot is written to `snapshot_path` (when given) and
// training aborts.
template <typename T>
inline StageResult<T> train_stage1(IrnModel<T>& model, const Dataset<T>& data,
                                   const TrainConfig& tc, const LossWeights& lw,
                                   AdamState<T>& opt, RngStream& rng,
                                   const std::string& snapshot_path = "",
                                   std::ostream* progress = nullptr) {
    tc.validate();
    check(!data.images.empty(), "train: dataset is empty");
    StageResult<T> result;
    std::string last_good;
    for (long iter = 0; iter < tc.iters; ++iter) {
        opt.lr = T(schedule_lr(tc.lr, tc.milestones, iter));
        auto batch = sample_patches(data, tc.crop, tc.batch, tc.flips, model, rng);
        zero_grads(model.params());
        auto losses = stage1_losses(model, batch, tc, lw, rng);
        double total = double(losses.total.item());
        if (!std::isfinite(total)) {
            if (!snapshot_path.empty() && !last_good.empty()) {
                std::ofstream f(snapshot_path, std::ios::binary);
                f.write(last_good.data(), std::streamsize(last_good.size()));
            }
            fail("train_stage1: non-finite loss at iteration " + std::to_string(iter) +
                 (snapshot_path.empty() ? "" : "; last-good checkpoint written to " +
                                                   snapshot_path));
        }
        backward(losses.total);
        adam_step(model.params(), opt);
        model.refresh();
        if (iter % tc.log_every == 0 || iter + 1 == tc.iters) {
            LossRow row{iter, double(losses.recon.item()), double(losses.guide.item()),
                        double(losses.ce.item()), total, double(opt.lr)};
            result.log.push_back(row);
            if (progress)
                (*progress) << "iter " << iter << " recon " << row.recon << " guide "
                            << row.guide << " distr " << row.distr << " total " << row.total
                            << "\n";
        }
        if (tc.snapshot_every > 0 && (iter + 1) % tc.snapshot_every == 0)
            last_good = serialize_checkpoint(CheckpointKind::Model, model.cfg, 0, model.params(),
                                             &opt, &rng);
    }
    return result;
}

// One discriminator update on a real batch vs the model's reconstructions
// (detached). Returns the discriminator loss value.
template <typename T>
inline double disc_step(const IrnModel<T>& model, Discriminator<T>& disc,
                        ParamList<T>& disc_params, AdamState<T>& disc_opt,
                        const PatchBatch<T>& batch, const TrainConfig& tc, RngStream& rng) {
    auto [y, z] = model.forward(batch.x);
    Tensor<T> y_q = tc.quantize_train ? quantize8(y) : y;
    auto zp = gaussian_sample<T>(z.shape(), detail::derive_seed<T>(rng));
    auto x_fake = model.inverse(y_q, zp).detach();
    auto parts = js_from_outputs(disc.apply(batch.x), disc.apply(x_fake));
    zero_grads(disc_params);
    backward(parts.disc_loss);
    adam_step(disc_params, disc_opt);
    return double(parts.disc_loss.item());
}

// Adversarial finetune: restores the full distribution-matching term via the
// JS estimator (non-saturating generator gradient; the Eq-9 estimate itself
// is what gets logged). The perceptual term stays disabled.
template <typename T>
inline StageResult<T> train_stage2(IrnModel<T>& model, Discriminator<T>& disc,
                                   const Dataset<T>& data, const TrainConfig& tc,
                                   const LossWeights& lw, AdamState<T>& opt,
                                   AdamState<T>& disc_opt, RngStream& rng,
                                   const std::string& snapshot_path = "",
                                   std::ostream* progress = nullptr) {
    tc.validate();
    StageResult<T> result;
    ParamList<T> disc_params;
    disc.collect(disc_params, "disc");
    disc_opt.lr = T(tc.disc_lr);

    for (long it = 0; it < tc.disc_pretrain; ++it) {
        auto batch = sample_patches(data, tc.crop, tc.batch, tc.flips, model, rng);
        double dl = disc_step(model, disc, disc_params, disc_opt, batch, tc, rng);
        result.disc_pretrain_losses.push_back(dl);
        if (progress && it % tc.log_every == 0)
            (*progress) << "disc-pretrain " << it << " loss " << dl << "\n";
    }

    std::string last_good;
    double l2 = lw.guide_weight(model.cfg);
    for (long iter = 0; iter < tc.iters; ++iter) {
        opt.lr = T(schedule_lr(tc.stage2_lr, tc.milestones, iter));
        auto dbatch = sample_patches(data, tc.crop, tc.batch, tc.flips, model, rng);
        disc_step(model, disc, disc_params, disc_opt, dbatch, tc, rng);

        auto batch = sample_patches(data, tc.crop, tc.batch, tc.flips, model, rng);
        auto [y, z] = model.forward(batch.x);
        auto guide = loss_guide(y, batch.guide, lw.metric_y);
        Tensor<T> y_q = tc.quantize_train ? quantize8(y) : y;
        auto zp = gaussian_sample<T>(z.shape(), detail::derive_seed<T>(rng));
        auto x_hat = model.inverse(y_q, zp);
        auto recon = loss_recon(batch.x, x_hat, lw.metric_x);
        auto parts = js_from_outputs(disc.apply(batch.x).detach(), disc.apply(x_hat));
        auto total = add(mul_scalar(recon, T(lw.lambda1)),
                         add(mul_scalar(guide, T(l2)),
                             mul_scalar(parts.gen_loss, T(lw.lambda3))));
        double tv = double(total.item());
        if (!std::isfinite(tv)) {
            if (!snapshot_path.empty() && !last_good.empty()) {
                std::ofstream f(snapshot_path, std::ios::binary);
                f.write(last_good.data(), std::streamsize(last_good.size()));
            }
            fail("train_stage2: non-finite loss at iteration " + std::to_string(iter));
        }
        zero_grads(model.params());
        backward(total);
        adam_step(model.params(), opt);
        model.refresh();
        if (iter % tc.log_every == 0 || iter + 1 == tc.iters) {
            LossRow row{iter, double(recon.item()), double(guide.item()),
                        double(parts.js_estimate.item()), tv, double(opt.lr)};
            result.log.push_back(row);
            if (progress)
                (*progress) << "iter " << iter << " recon " << row.recon << " guide "
                            << row.guide << " js " << row.distr << " total " << row.total
                            << "\n";
        }
        if (tc.snapshot_every > 0 && (iter + 1) % tc.snapshot_every == 0)
            last_good = serialize_checkpoint(CheckpointKind::Model, model.cfg, 0, model.params(),
                                             &opt, &rng);
    }
    return result;
}

}  // namespace irn
