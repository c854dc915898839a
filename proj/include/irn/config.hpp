#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "irn/model.hpp"

namespace irn {

enum class Metric { L1, L2 };

inline Metric metric_from_name(const std::string& s) {
    if (s == "L1" || s == "l1") return Metric::L1;
    if (s == "L2" || s == "l2") return Metric::L2;
    fail("unknown metric '" + s + "' (expected L1 | L2)");
}

inline std::string metric_name(Metric m) { return m == Metric::L1 ? "L1" : "L2"; }

// Objective configuration. lambda4 (perceptual term) is fixed at zero:
// it needs external pretrained feature weights and is out of scope.
struct LossWeights {
    double lambda1 = 1.0;   // reconstruction
    double lambda2 = -1.0;  // guidance; negative = auto (s^2, or 9 for color)
    double lambda3 = 1.0;   // distribution matching
    static constexpr double lambda4 = 0.0;
    Metric metric_x = Metric::L1;  // reconstruction metric
    Metric metric_y = Metric::L2;  // guidance metric

    double guide_weight(const ModelConfig& m) const {
        if (lambda2 >= 0) return lambda2;
        if (m.variant == Variant::IRN_COLOR) return 9.0;
        return double(m.scale) * double(m.scale);
    }
};

struct TrainConfig {
    int batch = 16;
    int crop = 144;
    bool flips = true;
    long iters = 500000;
    double lr = 2e-4;
    std::vector<long> milestones = {100000, 200000, 300000, 400000};
    uint64_t seed = 0;
    int z_samples = 1;            // samples per Eq-6 expectation estimate
    bool quantize_train = true;   // quantize y inside the loop (STE)
    bool recon_z_zero = false;    // reconstruct from z=0 instead of a sample
    double noise_std = 0.0;       // uniform LR noise (robustness finetune); 2/255 typical
    long disc_pretrain = 5000;    // stage-2 discriminator warmup iterations
    double disc_lr = 1e-4;
    double stage2_lr = 1e-4;
    int log_every = 10;
    long snapshot_every = 100;    // rolling last-good snapshot cadence

    void validate() const {
        check(batch >= 1 && crop >= 1 && iters >= 0, "config: bad batch/crop/iters");
        check(lr >= 0 && disc_lr >= 0 && stage2_lr >= 0, "config: negative learning rate");
        check(z_samples >= 1, "config: z_samples must be >= 1");
        for (size_t i = 1; i < milestones.size(); ++i)
            check(milestones[i - 1] < milestones[i], "config: milestones must be ascending");
        if (!milestones.empty())
            check(milestones.back() <= iters, "config: milestone beyond total iterations");
    }
};

struct FullConfig {
    ModelConfig model;
    TrainConfig train;
    LossWeights loss;
};

namespace detail {

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    fail("config: bad boolean '" + v + "'");
}

inline std::vector<long> parse_long_list(const std::string& v) {
    std::vector<long> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stol(item));
    return out;
}

}  // namespace detail

// Recognized keys; anything else is a config violation so typos stay loud.
inline void apply_config_kv(FullConfig& cfg, const std::string& key, const std::string& value) {
    auto& m = cfg.model;
    auto& t = cfg.train;
    auto& l = cfg.loss;
    if (key == "variant") m.variant = variant_from_name(value);
    else if (key == "scale") m.scale = std::stoi(value);
    else if (key == "blocks") m.blocks = std::stoi(value);
    else if (key == "features") m.features = std::stoi(value);
    else if (key == "growth") m.growth = std::stoi(value);
    else if (key == "clamp") m.clamp_alpha = std::stof(value);
    else if (key == "init_seed") m.init_seed = std::stoull(value);
    else if (key == "batch") t.batch = std::stoi(value);
    else if (key == "crop") t.crop = std::stoi(value);
    else if (key == "flips") t.flips = detail::parse_bool(value);
    else if (key == "iters") t.iters = std::stol(value);
    else if (key == "lr") t.lr = std::stod(value);
    else if (key == "milestones") t.milestones = detail::parse_long_list(value);
    else if (key == "seed") t.seed = std::stoull(value);
    else if (key == "z_samples") t.z_samples = std::stoi(value);
    else if (key == "quantize_train") t.quantize_train = detail::parse_bool(value);
    else if (key == "recon_z_zero") t.recon_z_zero = detail::parse_bool(value);
    else if (key == "noise_std") t.noise_std = std::stod(value);
    else if (key == "disc_pretrain") t.disc_pretrain = std::stol(value);
    else if (key == "disc_lr") t.disc_lr = std::stod(value);
    else if (key == "stage2_lr") t.stage2_lr = std::stod(value);
    else if (key == "log_every") t.log_every = std::stoi(value);
    else if (key == "snapshot_every") t.snapshot_every = std::stol(value);
    else if (key == "lambda1") l.lambda1 = std::stod(value);
    else if (key == "lambda2") l.lambda2 = std::stod(value);
    else if (key == "lambda3") l.lambda3 = std::stod(value);
    else if (key == "metric_x") l.metric_x = metric_from_name(value);
    else if (key == "metric_y") l.metric_y = metric_from_name(value);
    else fail("config: unknown key '" + key + "'");
}

// Plain-text key=value, '#' comments, blank lines ignored.
inline FullConfig parse_config_text(const std::string& text, FullConfig base = {}) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        auto eq = line.find('=');
        check(eq != std::string::npos, "config: line " + std::to_string(lineno) +
                                           " is not key=value: '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_kv(base, trim(key), trim(value));
    }
    return base;
}

inline FullConfig load_config(const std::string& path, FullConfig base = {}) {
    std::ifstream f(path);
    check(f.good(), "config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), base);
}

// "key=value" override strings (CLI --set).
inline void apply_overrides(FullConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        auto eq = s.find('=');
        check(eq != std::string::npos, "--set expects key=value, got '" + s + "'");
        apply_config_kv(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
}

}  // namespace irn
