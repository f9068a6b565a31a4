#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layerlat/denoiser.hpp"
#include "layerlat/editing.hpp"
#include "layerlat/image.hpp"
#include "layerlat/plan.hpp"

namespace layerlat {

struct Metrics {
    double l1 = 0.0;
    double l2 = 0.0;
    double psnr = 0.0;  // kPsnrInfinity when images are identical
};

inline constexpr double kPsnrInfinity = 999.0;

// Pixel-level differences over [0,1]-normalized channels; the optional mask
// restricts the average to mask==1 pixels.
Metrics compute_metrics(const ImageBuffer& a, const ImageBuffer& b,
                        const MaskGrid* region = nullptr);

struct RunOptions {
    std::string out_dir;  // empty: compute only, write nothing
    bool dump_heatmaps = false;
    bool dump_stages = false;
    bool dump_trajectory = false;
    int codec_factor = kDefaultCodecFactor;
};

struct RunResult {
    ImageBuffer final_image;
    MaskGrid remove_mask;          // latent resolution, as used by the run
    std::string report_json;       // deterministic run report
    std::optional<Metrics> clean_metrics;  // masked-region vs clean background
};

// Executes decomposition -> fusion -> harmonization for the plan's task and,
// when out_dir is set, writes output.ppm, report.json, timings.json and any
// requested dumps there.
RunResult run_edit(const EditPlan& plan, const Denoiser& model, const RunOptions& opts);

// Side-by-side variants over a built-in procedural scene; writes one image
// per variant plus report.json into out_dir.
void run_ablation(const std::string& mode, const Denoiser& model, const std::string& out_dir);

}  // namespace layerlat
