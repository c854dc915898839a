#pragma once

// Rate-distortion evaluation across rescaling + compression pipelines.
// A pipeline tag is "<down>+<codec>[+crm]+<up>" with down/up in
// {bicubic, irn} and codec in {none, png, lossy}, e.g. "irn+lossy+crm+irn".
// Rates are bits per original (HR) pixel: PNG uses real file bytes, the
// lossy codec its entropy rate, "none" the raw 8-bit samples.

#include <sstream>
#include <string>
#include <vector>

#include "irn/codec.hpp"
#include "irn/crm.hpp"
#include "irn/metrics.hpp"
#include "irn/model.hpp"
#include "irn/png.hpp"

namespace irn {

enum class DownOp { Bicubic, Irn };
enum class UpOp { Bicubic, Irn };
enum class CodecOp { None, Png, Lossy };

struct PipelineSpec {
    DownOp down = DownOp::Bicubic;
    CodecOp codec = CodecOp::None;
    bool crm = false;
    UpOp up = UpOp::Bicubic;

    static PipelineSpec parse(const std::string& tag) {
        PipelineSpec spec;
        std::vector<std::string> parts;
        std::stringstream ss(tag);
        std::string item;
        while (std::getline(ss, item, '+')) parts.push_back(item);
        check(parts.size() == 3 || parts.size() == 4,
              "pipeline '" + tag + "': expected <down>+<codec>[+crm]+<up>");
        auto down_of = [&](const std::string& s) {
            if (s == "bicubic") return DownOp::Bicubic;
            if (s == "irn") return DownOp::Irn;
            fail("pipeline '" + tag + "': unknown downscaler '" + s + "'");
        };
        auto codec_of = [&](const std::string& s) {
            if (s == "none") return CodecOp::None;
            if (s == "png") return CodecOp::Png;
            if (s == "lossy") return CodecOp::Lossy;
            fail("pipeline '" + tag + "': unknown codec '" + s + "'");
        };
        spec.down = down_of(parts[0]);
        spec.codec = codec_of(parts[1]);
        size_t up_idx = 2;
        if (parts.size() == 4) {
            check(parts[2] == "crm", "pipeline '" + tag + "': expected 'crm', got '" + parts[2] +
                                         "'");
            spec.crm = true;
            up_idx = 3;
            check(spec.codec == CodecOp::Lossy,
                  "pipeline '" + tag + "': crm only applies after the lossy codec");
        }
        const std::string& up = parts[up_idx];
        if (up == "bicubic") spec.up = UpOp::Bicubic;
        else if (up == "irn") spec.up = UpOp::Irn;
        else fail("pipeline '" + tag + "': unknown upscaler '" + up + "'");
        return spec;
    }

    std::string tag() const {
        std::string s = down == DownOp::Bicubic ? "bicubic" : "irn";
        s += codec == CodecOp::None ? "+none" : (codec == CodecOp::Png ? "+png" : "+lossy");
        if (crm) s += "+crm";
        s += up == UpOp::Bicubic ? "+bicubic" : "+irn";
        return s;
    }

    bool needs_model() const { return down == DownOp::Irn || up == UpOp::Irn; }
};

struct RdPoint {
    std::string pipeline;
    int quality = 0;
    double bpp = 0.0;
    double psnr_db = 0.0;
};

inline std::string rd_csv(const std::vector<RdPoint>& points) {
    std::string out = "pipeline,quality,bpp,psnr_db\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%s\n", p.pipeline.c_str(), p.quality, p.bpp,
                      format_db(p.psnr_db).c_str());
        out += buf;
    }
    return out;
}

// One image through one pipeline at one quality. `crm` may be null when the
// spec does not ask for it.
template <typename T>
inline RdPoint run_pipeline(const PipelineSpec& spec, const IrnModel<T>* model,
                            const CrmModel<T>* crm, const ImageBuffer& hr, int scale, int quality,
                            const ZSpec& zspec) {
    check(!spec.needs_model() || model != nullptr,
          "pipeline '" + spec.tag() + "': missing model checkpoint");
    check(!spec.crm || crm != nullptr, "pipeline '" + spec.tag() + "': missing CRM checkpoint");
    if (model) scale = model->spatial_factor();

    // Down.
    ImageBuffer lr = spec.down == DownOp::Irn
                         ? downscale(*model, hr).y
                         : bicubic_resize(hr, hr.width / scale, hr.height / scale);

    // Codec + rate accounting (bits per HR pixel).
    double hr_px = double(hr.width) * hr.height;
    double bpp = 0.0;
    ImageBuffer stored = lr;
    bool restored_is_float = false;
    Tensor<T> restored_float;
    switch (spec.codec) {
        case CodecOp::None:
            bpp = 8.0 * lr.channels * (double(lr.width) * lr.height) / hr_px;
            break;
        case CodecOp::Png:
            bpp = 8.0 * double(png_encoded_size(lr)) / hr_px;
            break;
        case CodecOp::Lossy: {
            LossyStream s = lossy_encode(lr, quality);
            bpp = double(s.symbol_bits) / hr_px;
            stored = lossy_decode(s.bytes);
            if (spec.crm) {
                if (crm->quality != 0 && crm->quality != quality)
                    std::fprintf(stderr,
                                 "warning: CRM trained for q=%d applied at q=%d; proceeding\n",
                                 crm->quality, quality);
                restored_float = crm_restore(*crm, stored);
                restored_is_float = true;
            }
            break;
        }
    }

    // Up.
    ImageBuffer up_img;
    if (spec.up == UpOp::Irn) {
        if (restored_is_float) {
            auto z = make_z(*model, 1, stored.height * model->spatial_factor(),
                            stored.width * model->spatial_factor(), zspec);
            up_img = tensor_to_image(quantize8(model->inverse(restored_float, z)).detach(),
                                     Colorspace::RGB);
        } else {
            up_img = upscale(*model, stored, zspec);
        }
    } else {
        ImageBuffer base = stored;
        if (restored_is_float)
            base = tensor_to_image(quantize8(restored_float).detach(), stored.colorspace);
        up_img = bicubic_resize(base, hr.width, hr.height);
    }

    RdPoint pt;
    pt.pipeline = spec.tag();
    pt.quality = quality;
    pt.bpp = bpp;
    pt.psnr_db = psnr(hr, up_img, ChannelMode::RgbMean);
    return pt;
}

// Per-quality averages over a dataset of HR images. An empty quality list
// yields no rows (header-only CSV).
template <typename T>
inline std::vector<RdPoint> rd_eval(const PipelineSpec& spec, const std::vector<ImageBuffer>& hrs,
                                    const std::vector<int>& qualities, const IrnModel<T>* model,
                                    const CrmModel<T>* crm, int scale,
                                    const ZSpec& zspec = {ZMode::Sample, 0}) {
    std::vector<RdPoint> out;
    for (int q : qualities) {
        double bpp = 0.0, psnr_sum = 0.0;
        for (const auto& hr : hrs) {
            RdPoint pt = run_pipeline(spec, model, crm, hr, scale, q, zspec);
            bpp += pt.bpp;
            psnr_sum += pt.psnr_db;
        }
        RdPoint avg;
        avg.pipeline = spec.tag();
        avg.quality = q;
        avg.bpp = bpp / double(hrs.size());
        avg.psnr_db = psnr_sum / double(hrs.size());
        out.push_back(avg);
    }
    return out;
}

}  // namespace irn
