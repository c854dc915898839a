#pragma once

// Checkpoint container (little-endian, magic "IRNC"). Layout:
//
//   char[4]  magic "IRNC"
//   u32      format version (1)
//   u32      kind: 0 = rescaling/color model, 1 = compression restore module
//   u32      variant (0 IRN, 1 IRN_E, 2 IRN_LD, 3 IRN_color; 0 for CRM)
//   u32      scale
//   u32      blocks          (CRM: RRDB count)
//   u32      features        (dense width F / CRM feature width)
//   u32      growth          (dense growth G / CRM inner growth)
//   f32      clamp alpha
//   u32      channels
//   u64      init seed
//   u32      aux             (CRM: codec quality; otherwise 0)
//   u32      tensor count
//   repeat:  u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data[numel]
//   u8       has_optimizer
//   if 1:    f32 lr, f32 beta1, f32 beta2, f32 eps, u64 t,
//            then per tensor (same order): f32 m[numel], f32 v[numel]
//   u64      rng seed
//   u64      rng counter
//
// Values are stored as f32 regardless of the in-memory scalar type.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "irn/adam.hpp"
#include "irn/model.hpp"
#include "irn/rng.hpp"

namespace irn {

constexpr uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : uint32_t { Model = 0, Crm = 1 };

struct NamedTensorData {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct CheckpointData {
    uint32_t version = kCheckpointVersion;
    CheckpointKind kind = CheckpointKind::Model;
    ModelConfig cfg;
    uint32_t aux = 0;
    std::vector<NamedTensorData> tensors;
    bool has_optimizer = false;
    float lr = 0, beta1 = 0, beta2 = 0, eps = 0;
    uint64_t opt_t = 0;
    std::vector<std::vector<float>> opt_m, opt_v;
    uint64_t rng_seed = 0;
    uint64_t rng_counter = 0;
};

namespace ckpt_detail {

inline void wr_u32(std::string& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char(v >> (8 * i));
    out.append(b, 4);
}
inline void wr_u64(std::string& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char(v >> (8 * i));
    out.append(b, 8);
}
inline void wr_f32(std::string& out, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    wr_u32(out, u);
}

struct Reader {
    const uint8_t* p;
    size_t n, pos = 0;
    void need(size_t k) { check(pos + k <= n, "checkpoint: truncated file"); }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::string str(size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
};

}  // namespace ckpt_detail

template <typename T>
inline std::string serialize_checkpoint(CheckpointKind kind, const ModelConfig& cfg, uint32_t aux,
                                        const ParamList<T>& params, const AdamState<T>* opt,
                                        const RngStream* rng) {
    using namespace ckpt_detail;
    std::string out;
    out.append("IRNC", 4);
    wr_u32(out, kCheckpointVersion);
    wr_u32(out, uint32_t(kind));
    wr_u32(out, uint32_t(cfg.variant));
    wr_u32(out, uint32_t(cfg.scale));
    wr_u32(out, uint32_t(cfg.blocks));
    wr_u32(out, uint32_t(cfg.features));
    wr_u32(out, uint32_t(cfg.growth));
    wr_f32(out, cfg.clamp_alpha);
    wr_u32(out, uint32_t(cfg.channels));
    wr_u64(out, cfg.init_seed);
    wr_u32(out, aux);
    wr_u32(out, uint32_t(params.size()));
    for (const auto& p : params) {
        wr_u32(out, uint32_t(p.name.size()));
        out.append(p.name);
        wr_u32(out, uint32_t(p.tensor.shape().size()));
        for (int d : p.tensor.shape()) wr_u32(out, uint32_t(d));
        for (T v : p.tensor.data()) wr_f32(out, float(v));
    }
    if (opt && !opt->m.empty()) {
        check(opt->m.size() == params.size(), "checkpoint: optimizer state mismatch");
        out.push_back(char(1));
        wr_f32(out, float(opt->lr));
        wr_f32(out, float(opt->beta1));
        wr_f32(out, float(opt->beta2));
        wr_f32(out, float(opt->eps));
        wr_u64(out, uint64_t(opt->t));
        for (size_t i = 0; i < params.size(); ++i) {
            for (T v : opt->m[i]) wr_f32(out, float(v));
            for (T v : opt->v[i]) wr_f32(out, float(v));
        }
    } else {
        out.push_back(char(0));
    }
    wr_u64(out, rng ? rng->seed() : 0);
    wr_u64(out, rng ? rng->counter() : 0);
    return out;
}

template <typename T>
inline void save_checkpoint(const std::string& path, CheckpointKind kind, const ModelConfig& cfg,
                            uint32_t aux, const ParamList<T>& params, const AdamState<T>* opt,
                            const RngStream* rng) {
    std::string bytes = serialize_checkpoint(kind, cfg, aux, params, opt, rng);
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "checkpoint: cannot open '" + path + "' for writing");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    check(f.good(), "checkpoint: write failed for '" + path + "'");
}

inline CheckpointData parse_checkpoint(const std::vector<uint8_t>& bytes) {
    using namespace ckpt_detail;
    Reader r{bytes.data(), bytes.size()};
    check(r.str(4) == "IRNC", "checkpoint: bad magic (not an IRNC file)");
    CheckpointData d;
    d.version = r.u32();
    check(d.version == kCheckpointVersion,
          "checkpoint: unsupported version " + std::to_string(d.version));
    uint32_t kind = r.u32();
    check(kind <= 1, "checkpoint: bad kind");
    d.kind = CheckpointKind(kind);
    uint32_t var = r.u32();
    check(var <= 3, "checkpoint: bad variant tag");
    d.cfg.variant = Variant(var);
    d.cfg.scale = int(r.u32());
    d.cfg.blocks = int(r.u32());
    d.cfg.features = int(r.u32());
    d.cfg.growth = int(r.u32());
    d.cfg.clamp_alpha = r.f32();
    d.cfg.channels = int(r.u32());
    d.cfg.init_seed = r.u64();
    d.aux = r.u32();
    uint32_t count = r.u32();
    d.tensors.resize(count);
    for (auto& t : d.tensors) {
        t.name = r.str(r.u32());
        uint32_t rank = r.u32();
        check(rank <= 8, "checkpoint: absurd tensor rank");
        t.shape.resize(rank);
        long n = 1;
        for (auto& dim : t.shape) {
            dim = int(r.u32());
            n *= dim;
        }
        check(n >= 0 && size_t(n) < (1u << 30), "checkpoint: absurd tensor size");
        t.values.resize(size_t(n));
        for (auto& v : t.values) v = r.f32();
    }
    d.has_optimizer = r.u8() != 0;
    if (d.has_optimizer) {
        d.lr = r.f32();
        d.beta1 = r.f32();
        d.beta2 = r.f32();
        d.eps = r.f32();
        d.opt_t = r.u64();
        d.opt_m.resize(count);
        d.opt_v.resize(count);
        for (uint32_t i = 0; i < count; ++i) {
            size_t n = d.tensors[i].values.size();
            d.opt_m[i].resize(n);
            for (auto& v : d.opt_m[i]) v = r.f32();
            d.opt_v[i].resize(n);
            for (auto& v : d.opt_v[i]) v = r.f32();
        }
    }
    d.rng_seed = r.u64();
    d.rng_counter = r.u64();
    return d;
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "checkpoint: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

// Copy stored tensors (and optionally optimizer state) onto a parameter list
// whose names and shapes must match exactly.
template <typename T>
inline void apply_checkpoint(const CheckpointData& d, ParamList<T>& params,
                             AdamState<T>* opt = nullptr, RngStream* rng = nullptr) {
    check(d.tensors.size() == params.size(),
          "checkpoint: tensor count " + std::to_string(d.tensors.size()) +
              " does not match model (" + std::to_string(params.size()) + ")");
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& t = d.tensors[i];
        check(t.name == params[i].name, "checkpoint: tensor '" + t.name +
                                            "' does not match model parameter '" +
                                            params[i].name + "'");
        check(t.shape == params[i].tensor.shape(),
              "checkpoint: shape mismatch for '" + t.name + "': " + shape_str(t.shape) + " vs " +
                  shape_str(params[i].tensor.shape()));
        auto& raw = params[i].tensor.raw();
        for (size_t j = 0; j < raw.size(); ++j) raw[j] = T(t.values[j]);
    }
    if (opt) {
        if (d.has_optimizer) {
            opt->lr = T(d.lr);
            opt->beta1 = T(d.beta1);
            opt->beta2 = T(d.beta2);
            opt->eps = T(d.eps);
            opt->t = long(d.opt_t);
            opt->m.resize(params.size());
            opt->v.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                opt->m[i].assign(d.opt_m[i].begin(), d.opt_m[i].end());
                opt->v[i].assign(d.opt_v[i].begin(), d.opt_v[i].end());
            }
        } else {
            opt->reset_moments();
        }
    }
    if (rng) rng->restore(d.rng_seed, d.rng_counter);
}

// Build a model straight from a parsed checkpoint.
template <typename T>
inline IrnModel<T> model_from_checkpoint(const CheckpointData& d, AdamState<T>* opt = nullptr,
                                         RngStream* rng = nullptr) {
    check(d.kind == CheckpointKind::Model, "checkpoint: not a model checkpoint");
    IrnModel<T> model = IrnModel<T>::build(d.cfg);
    apply_checkpoint(d, model.params(), opt, rng);
    model.refresh();
    return model;
}

template <typename T>
inline void save_model_checkpoint(const std::string& path, const IrnModel<T>& model,
                                  const AdamState<T>* opt = nullptr,
                                  const RngStream* rng = nullptr) {
    save_checkpoint(path, CheckpointKind::Model, model.cfg, 0, model.params(), opt, rng);
}

}  // namespace irn
