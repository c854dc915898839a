#pragma once

// Compression restore module: residual-in-residual dense blocks on the LR
// image, trained with an L2 loss against the pre-compression LR. One module
// per codec quality.

#include <string>
#include <utility>
#include <vector>

#include "irn/adam.hpp"
#include "irn/checkpoint.hpp"
#include "irn/config.hpp"
#include "irn/layers.hpp"
#include "irn/losses.hpp"
#include "irn/train.hpp"

namespace irn {

template <typename T>
struct Rrdb {
    DenseBlock<T> rdb[3];
    T scale = T(0.2);

    void build(int feat, int gc, T res_scale, RngStream& rng) {
        scale = res_scale;
        for (auto& d : rdb) d.build(feat, feat, gc, gc, rng);
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (const auto& d : rdb) h = add(h, mul_scalar(d.apply(h), scale));
        return add(x, mul_scalar(sub(h, x), scale));
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        for (int i = 0; i < 3; ++i) rdb[i].collect(out, prefix + ".rdb" + std::to_string(i));
    }
};

template <typename T>
struct CrmModel {
    int rrdb_count = 8;
    int feat = 64;
    int gc = 32;
    int quality = 0;  // codec quality this module was trained for (0 = untrained)
    T res_scale = T(0.2);
    Tensor<T> first_w, first_b, trunk_w, trunk_b, last_w, last_b;
    std::vector<Rrdb<T>> blocks;

    void build(int count, int features, int growth, uint64_t seed) {
        rrdb_count = count;
        feat = features;
        gc = growth;
        RngStream rng(seed);
        auto conv_init = [&](int cin, int cout, double scale, bool zero) {
            std::vector<T> w(size_t(9L * cin * cout), T(0));
            if (!zero) {
                double std_dev = scale * std::sqrt(2.0 / double(9 * cin));
                for (auto& v : w) v = T(rng.normal() * std_dev);
            }
            return Tensor<T>::param({3, 3, cin, cout}, std::move(w));
        };
        first_w = conv_init(3, feat, 0.1, false);
        first_b = Tensor<T>::param({feat}, std::vector<T>(size_t(feat), T(0)));
        blocks.assign(size_t(count), Rrdb<T>());
        for (auto& b : blocks) b.build(feat, gc, res_scale, rng);
        trunk_w = conv_init(feat, feat, 0.1, false);
        trunk_b = Tensor<T>::param({feat}, std::vector<T>(size_t(feat), T(0)));
        // Zero-init output conv: the untrained module is the identity map.
        last_w = conv_init(feat, 3, 0.0, true);
        last_b = Tensor<T>::param({3}, std::vector<T>(3, T(0)));
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        check(x.rank() == 4 && x.dim(3) == 3, "crm: expected (N,H,W,3), got " +
                                                  shape_str(x.shape()));
        auto f0 = conv2d(x, first_w, first_b, 1, 1);
        Tensor<T> h = f0;
        for (const auto& b : blocks) h = b.apply(h);
        auto trunk = conv2d(h, trunk_w, trunk_b, 1, 1);
        auto fused = add(f0, trunk);
        return add(x, mul_scalar(conv2d(leaky_relu(fused), last_w, last_b, 1, 1), res_scale));
    }

    void collect(ParamList<T>& out, const std::string& prefix = "crm") {
        out.push_back({prefix + ".first.w", first_w});
        out.push_back({prefix + ".first.b", first_b});
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(out, prefix + ".rrdb" + std::to_string(i));
        out.push_back({prefix + ".trunk.w", trunk_w});
        out.push_back({prefix + ".trunk.b", trunk_b});
        out.push_back({prefix + ".last.w", last_w});
        out.push_back({prefix + ".last.b", last_b});
    }

    ParamList<T> params() {
        ParamList<T> out;
        collect(out);
        return out;
    }
};

// Restore one LR image (8-bit in, float tensor out so downstream inversion
// keeps full precision).
template <typename T>
inline Tensor<T> crm_restore(const CrmModel<T>& crm, const ImageBuffer& lr) {
    return crm.apply(image_to_tensor<T>(lr)).detach();
}

// Stacks (1,H,W,C) tensors along the batch dimension.
template <typename T>
inline Tensor<T> batch_stack(const std::vector<Tensor<T>>& items) {
    check(!items.empty(), "batch_stack: empty");
    const Shape& s = items[0].shape();
    std::vector<T> out;
    out.reserve(size_t(shape_numel(s)) * items.size());
    for (const auto& t : items) {
        check(t.shape() == s, "batch_stack: shape mismatch");
        out.insert(out.end(), t.data().begin(), t.data().end());
    }
    return Tensor<T>::from({int(items.size()) * s[0], s[1], s[2], s[3]}, std::move(out));
}

struct CrmTrainConfig {
    long iters = 400;
    int batch = 2;
    double lr = 1e-3;
    uint64_t seed = 0;
    int log_every = 10;
};

// Training pairs are (codec-degraded LR, clean LR); loss is L2 on the
// restored output.
template <typename T>
inline std::vector<LossRow> train_crm(CrmModel<T>& crm,
                                      const std::vector<std::pair<Tensor<T>, Tensor<T>>>& pairs,
                                      const CrmTrainConfig& cfg,
                                      std::ostream* progress = nullptr) {
    check(!pairs.empty(), "train_crm: no training pairs");
    ParamList<T> params = crm.params();
    AdamState<T> opt;
    opt.lr = T(cfg.lr);
    RngStream rng(cfg.seed);
    std::vector<LossRow> log;
    for (long iter = 0; iter < cfg.iters; ++iter) {
        std::vector<Tensor<T>> xs, ys;
        for (int b = 0; b < cfg.batch; ++b) {
            size_t idx = size_t(rng.below(pairs.size()));
            xs.push_back(pairs[idx].first);
            ys.push_back(pairs[idx].second);
        }
        // All LR images share dimensions, so batch by concatenation along N.
        Tensor<T> x = xs.size() == 1 ? xs[0] : batch_stack(xs);
        Tensor<T> y = ys.size() == 1 ? ys[0] : batch_stack(ys);
        zero_grads(params);
        auto out = crm.apply(x);
        auto loss = mean(square(sub(out, y)));
        double lv = double(loss.item());
        check(std::isfinite(lv), "train_crm: non-finite loss at iteration " +
                                     std::to_string(iter));
        backward(loss);
        adam_step(params, opt);
        if (iter % cfg.log_every == 0 || iter + 1 == cfg.iters) {
            log.push_back({iter, lv, 0.0, 0.0, lv, cfg.lr});
            if (progress) (*progress) << "crm iter " << iter << " l2 " << lv << "\n";
        }
    }
    return log;
}

// CRM checkpoints reuse the IRNC container with kind=Crm; the codec quality
// rides in the aux field.
template <typename T>
inline void save_crm_checkpoint(const std::string& path, CrmModel<T>& crm, int quality) {
    ModelConfig cfg;
    cfg.variant = Variant::IRN;
    cfg.scale = 0;
    cfg.blocks = crm.rrdb_count;
    cfg.features = crm.feat;
    cfg.growth = crm.gc;
    cfg.channels = 3;
    save_checkpoint(path, CheckpointKind::Crm, cfg, uint32_t(quality), crm.params(),
                    (const AdamState<T>*)nullptr, (const RngStream*)nullptr);
}

template <typename T>
inline CrmModel<T> crm_from_checkpoint(const CheckpointData& d) {
    check(d.kind == CheckpointKind::Crm, "checkpoint: not a CRM checkpoint");
    CrmModel<T> crm;
    crm.build(d.cfg.blocks, d.cfg.features, d.cfg.growth, d.cfg.init_seed);
    crm.quality = int(d.aux);
    ParamList<T> params = crm.params();
    apply_checkpoint(d, params);
    return crm;
}

}  // namespace irn
