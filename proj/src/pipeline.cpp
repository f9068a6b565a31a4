#include "layerlat/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "layerlat/errors.hpp"
#include "layerlat/scenes.hpp"

namespace layerlat {

using nlohmann::json;
namespace fs = std::filesystem;

Metrics compute_metrics(const ImageBuffer& a, const ImageBuffer& b, const MaskGrid* region) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError("metrics: image dims differ");
    }
    if (region && (region->height != a.height || region->width != a.width)) {
        throw DimensionError("metrics: region mask dims differ from images");
    }
    double sum_abs = 0.0, sum_sq = 0.0;
    size_t n = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (region && !region->at(y, x)) continue;
            for (int c = 0; c < 3; ++c) {
                double d = (a.at(y, x, c) - b.at(y, x, c)) / 255.0;
                sum_abs += std::abs(d);
                sum_sq += d * d;
                ++n;
            }
        }
    }
    Metrics m;
    if (n == 0) {
        m.psnr = kPsnrInfinity;
        return m;
    }
    m.l1 = sum_abs / static_cast<double>(n);
    m.l2 = sum_sq / static_cast<double>(n);
    m.psnr = m.l2 > 0.0 ? 10.0 * std::log10(1.0 / m.l2) : kPsnrInfinity;
    return m;
}

namespace {

struct StageClock {
    std::map<std::string, double> ms;
    std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

    void lap(const std::string& stage) {
        auto now = std::chrono::steady_clock::now();
        ms[stage] = std::chrono::duration<double, std::milli>(now - mark).count();
        mark = now;
    }
};

MaskGrid to_latent_mask(const MaskGrid& m, int img_h, int img_w, int lat_h, int lat_w,
                        const std::string& what) {
    if (m.height == lat_h && m.width == lat_w) return m;
    if (m.height == img_h && m.width == img_w) {
        return MaskGrid::from_tensor(maxpool_downsample(m.to_tensor(), lat_h, lat_w));
    }
    throw DimensionError(what + ": mask is " + std::to_string(m.height) + "x" +
                         std::to_string(m.width) + ", expected image (" + std::to_string(img_h) +
                         "x" + std::to_string(img_w) + ") or latent (" + std::to_string(lat_h) +
                         "x" + std::to_string(lat_w) + ") resolution");
}

MaskGrid upsample_mask(const MaskGrid& m, int img_h, int img_w) {
    Tensor t = reshape(m.to_tensor(), {1, m.height, m.width});
    Tensor up = nearest_resize(t, img_h, img_w);
    return MaskGrid::from_tensor(reshape(up, {img_h, img_w}));
}

// Masks ride through geometric adjustments as 0/255 grayscale images so they
// stay aligned with the adjusted layer image.
ImageBuffer mask_to_image(const MaskGrid& m) {
    ImageBuffer img(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            uint8_t v = m.at(y, x) ? 255 : 0;
            img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = v;
        }
    }
    return img;
}

MaskGrid image_to_mask(const ImageBuffer& img) {
    MaskGrid m(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) m.at(y, x) = img.at(y, x, 0) >= 128 ? 1 : 0;
    }
    return m;
}

ImageBuffer apply_adjust(const ImageBuffer& img, const AdjustSpec& adjust) {
    ImageBuffer out = img;
    if (adjust.resize) out = adjust_resize(out, adjust.resize->first, adjust.resize->second);
    if (adjust.flip) out = adjust_flip(out, *adjust.flip);
    return out;
}

MoveVector to_latent_move(const MoveSpec& m, int lat_h, int lat_w, int factor) {
    MoveVector v;
    if (m.is_pixel) {
        v.dx = static_cast<int>(std::lround(static_cast<double>(m.dx_px) / factor));
        v.dy = static_cast<int>(std::lround(static_cast<double>(m.dy_px) / factor));
        return v;
    }
    if (m.direction == "left") {
        v.dx = -static_cast<int>(std::lround(m.scale * lat_w));
    } else if (m.direction == "right") {
        v.dx = static_cast<int>(std::lround(m.scale * lat_w));
    } else if (m.direction == "up") {
        v.dy = -static_cast<int>(std::lround(m.scale * lat_h));
    } else {
        v.dy = static_cast<int>(std::lround(m.scale * lat_h));
    }
    return v;
}

std::vector<MoveVector> layer_moves(const LayerSpec& layer, int lat_h, int lat_w, int factor) {
    std::vector<MoveVector> out;
    for (const auto& m : layer.moves) out.push_back(to_latent_move(m, lat_h, lat_w, factor));
    if (out.empty()) out.push_back(MoveVector{});  // identity placement
    return out;
}

void write_json(const json& doc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << doc.dump(2) << "\n";
    if (!f) throw IoError("short write to " + path);
}

std::string two_digits(int t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", t);
    return buf;
}

// Everything the task dispatch produced that the reporting stage needs.
struct PipelineState {
    ImageBuffer source;
    int lat_h = 0, lat_w = 0;
    MaskGrid remove_mask;
    DecompositionResult decomp;
    Tensor fused;     // only when fusion ran
    bool has_fused = false;
    Tensor final_latent;
    std::vector<std::string> stages;
};

}  // namespace

RunResult run_edit(const EditPlan& plan, const Denoiser& model, const RunOptions& opts) {
    StageClock clock;
    const int factor = opts.codec_factor;
    const TaskBinding binding = bind_task(plan.task);
    PipelineState st;

    // For cross-composition the decomposition source is the background
    // reference; every other task decomposes the edited image itself.
    const bool cross = plan.task == TaskKind::CrossComposition;
    ImageBuffer input_image = load_ppm(plan.source_image);
    st.source = cross ? load_ppm(*plan.background_image) : input_image;
    if (st.source.height % factor != 0 || st.source.width % factor != 0) {
        throw ValidationError("source_image: dimensions must be divisible by the codec factor");
    }
    st.lat_h = st.source.height / factor;
    st.lat_w = st.source.width / factor;
    if (st.lat_h != model.config().latent_size || st.lat_w != model.config().latent_size) {
        throw ValidationError("source_image: latent " + std::to_string(st.lat_h) + "x" +
                              std::to_string(st.lat_w) + " does not match the model's " +
                              std::to_string(model.config().latent_size));
    }

    auto load_mask = [&](const std::string& path, const std::string& what) {
        return to_latent_mask(load_pgm(path), st.source.height, st.source.width, st.lat_h,
                              st.lat_w, what);
    };

    std::optional<MaskGrid> refine;
    if (plan.refine_mask) refine = load_mask(*plan.refine_mask, "refine_mask");

    DecompositionInput din;
    din.refine_mask = refine;
    din.K = plan.hyper.K;
    din.mode = plan.hyper.mask_mode;
    din.step_hi = plan.hyper.step_hi;
    din.step_lo = plan.hyper.step_lo;
    din.block_lo = plan.hyper.block_lo;
    din.block_hi = plan.hyper.block_hi;
    din.codec_factor = factor;
    din.attention_resolutions = model.config().attention_resolutions;

    // Per-layer latent-resolution masks (adjusted where the layer is).
    struct PreparedLayer {
        int index = 0;
        MaskGrid mask;  // latent resolution, post-adjust
        std::vector<MoveVector> moves;
    };
    std::vector<PreparedLayer> prepared;

    for (const LayerSpec& layer : plan.layers) {
        MaskGrid raw = load_pgm(layer.mask);
        PreparedLayer pl;
        pl.index = layer.index;
        pl.moves = layer_moves(layer, st.lat_h, st.lat_w, factor);
        if (layer.index == 0) {
            pl.mask = to_latent_mask(raw, st.source.height, st.source.width, st.lat_h, st.lat_w,
                                     "layers[0].mask");
            prepared.push_back(std::move(pl));
            continue;
        }

        // Instance layer: adjust the layer image and its mask with the same
        // geometric transform, then register it for inversion.
        DecompositionLayer dl;
        dl.index = layer.index;
        dl.moves = pl.moves;
        ImageBuffer layer_image = layer.image ? load_ppm(*layer.image) : st.source;
        if (layer_image.height != st.source.height || layer_image.width != st.source.width) {
            throw DimensionError("layers[" + std::to_string(layer.index) +
                                 "].image: dims differ from the source image");
        }
        MaskGrid image_mask =
            raw.height == st.lat_h && raw.width == st.lat_w
                ? upsample_mask(raw, st.source.height, st.source.width)
                : raw;
        if (image_mask.height != st.source.height || image_mask.width != st.source.width) {
            throw DimensionError("layers[" + std::to_string(layer.index) + "].mask: bad dims");
        }

        if (layer.adjust.any() && plan.resize_at_latent_level && layer.adjust.resize &&
            !layer.adjust.flip) {
            dl.latent_adjusted = true;
            dl.adjusted_latent = adjust_resize_latent(encode(layer_image, factor),
                                                      layer.adjust.resize->first,
                                                      layer.adjust.resize->second);
            Tensor lm = maxpool_downsample(image_mask.to_tensor(), st.lat_h, st.lat_w);
            pl.mask = MaskGrid::from_tensor(
                reshape(adjust_resize_latent(reshape(lm, {1, st.lat_h, st.lat_w}),
                                             layer.adjust.resize->first,
                                             layer.adjust.resize->second),
                        {st.lat_h, st.lat_w}));
        } else if (layer.adjust.any() && !layer.adjust.identity()) {
            dl.adjusted = true;
            dl.adjusted_image = apply_adjust(layer_image, layer.adjust);
            MaskGrid adj_mask = image_to_mask(apply_adjust(mask_to_image(image_mask),
                                                           layer.adjust));
            pl.mask = to_latent_mask(adj_mask, st.source.height, st.source.width, st.lat_h,
                                     st.lat_w, "adjusted mask");
        } else if (layer.image) {
            dl.adjusted = true;  // foreign image still needs its own inversion
            dl.adjusted_image = layer_image;
            pl.mask = to_latent_mask(image_mask, st.source.height, st.source.width, st.lat_h,
                                     st.lat_w, "layer mask");
        } else {
            pl.mask = to_latent_mask(image_mask, st.source.height, st.source.width, st.lat_h,
                                     st.lat_w, "layer mask");
        }
        dl.mask_latent = pl.mask;
        din.layers.push_back(std::move(dl));
        prepared.push_back(std::move(pl));
    }

    // Remove mask per the task binding.
    switch (binding.remove_mask) {
        case TaskBinding::RemoveMask::ObjUnion: {
            MaskGrid u(st.lat_h, st.lat_w);
            for (const auto& layer : plan.layers) {
                u = mask_union(u, load_mask(layer.mask, "layer mask"));
            }
            st.remove_mask = u;
            break;
        }
        case TaskBinding::RemoveMask::Pan:
            st.remove_mask = build_pan_mask(pan_direction_from_string(plan.pan_direction),
                                            plan.pan_scale, st.lat_h, st.lat_w);
            break;
        case TaskBinding::RemoveMask::Zoom:
            st.remove_mask = build_zoom_mask(plan.zoom_scale, st.lat_h, st.lat_w);
            break;
        case TaskBinding::RemoveMask::MovedOccludeUnion:
        case TaskBinding::RemoveMask::Background: {
            // Destination regions: union of each instance layer's moved mask,
            // plus the background layer's own mask if given.
            MaskGrid u(st.lat_h, st.lat_w);
            for (const auto& pl : prepared) {
                if (pl.index == 0) {
                    u = mask_union(u, pl.mask);
                } else {
                    u = mask_union(u, moved_union(pl.mask, pl.moves));
                }
            }
            if (binding.remove_mask == TaskBinding::RemoveMask::MovedOccludeUnion) {
                // The occlusion task removes the vacated object regions.
                MaskGrid obj(st.lat_h, st.lat_w);
                for (const auto& pl : prepared) obj = mask_union(obj, pl.mask);
                u = mask_union(u, obj);
            }
            st.remove_mask = u;
            break;
        }
    }

    // Pan/zoom adjust the full frame before decomposition.
    switch (binding.adjust) {
        case TaskBinding::Adjust::PanPaste:
            st.source = pan_paste(st.source, pan_direction_from_string(plan.pan_direction),
                                  plan.pan_scale, plan.canvas_init);
            break;
        case TaskBinding::Adjust::ZoomPaste:
            st.source = zoom_paste(st.source, plan.zoom_scale, plan.canvas_init);
            break;
        default:
            break;
    }

    din.source = st.source;
    din.remove_mask = st.remove_mask;

    // Heatmap capture.
    std::vector<std::pair<AttentionCall, Tensor>> heatmaps;
    if (opts.dump_heatmaps) {
        din.heatmap_sink = [&](const Tensor& map, const AttentionCall& call) {
            heatmaps.emplace_back(call, map);
        };
    }

    NoiseSchedule schedule = make_schedule(plan.hyper.T);
    clock.lap("setup");

    st.decomp = run_decomposition(din, model, schedule);
    st.stages.push_back("decomposition");
    clock.lap("decomposition");

    // Fusion.
    Tensor canvas = st.decomp.background_at_fuse;
    if (binding.fusion != TaskBinding::Fusion::None) {
        std::vector<LayerState> states;
        for (const auto& pl : prepared) {
            if (pl.index == 0) continue;
            LayerState s;
            s.index = pl.index;
            s.latent = st.decomp.layer_latents_at_fuse.at(pl.index);
            s.mask = pl.mask;
            s.moves = pl.moves;
            states.push_back(std::move(s));
        }
        st.fused = fuse_layers(canvas, states);
        st.has_fused = true;
        canvas = st.fused;
        st.stages.push_back("fusion");
    }
    clock.lap("fusion");

    // Harmonization / occlusion tail.
    if (plan.task == TaskKind::OcclusionAware) {
        MaskGrid occ = load_mask(*plan.occlude_mask, "occlude_mask");
        int target_layer = plan.occluded_layer;
        if (target_layer < 0) {
            for (const auto& pl : prepared) target_layer = std::max(target_layer, pl.index);
        }
        MaskGrid moved_occ(st.lat_h, st.lat_w);
        MaskGrid moved_content(st.lat_h, st.lat_w);
        for (const auto& pl : prepared) {
            if (pl.index != target_layer) continue;
            moved_occ = moved_union(occ, pl.moves);
            moved_content = moved_union(pl.mask, pl.moves);
        }
        // Only where pasted content lands under the occluder must the canvas
        // be re-opened; elsewhere the plain canvas stands.
        MaskGrid effective = mask_intersection(moved_occ, moved_content);
        st.final_latent = run_occlusion_tail(canvas, effective, model, schedule, plan.hyper.K,
                                             din);
        st.stages.push_back("occlusion_tail");
    } else {
        st.final_latent = harmonize(canvas, model, schedule, plan.hyper.K);
        st.stages.push_back("harmonization");
    }
    clock.lap("harmonization");

    RunResult result;
    result.final_image = decode(st.final_latent, factor);
    result.remove_mask = st.remove_mask;

    if (plan.clean_background) {
        ImageBuffer clean = load_ppm(*plan.clean_background);
        MaskGrid region = upsample_mask(st.remove_mask, st.source.height, st.source.width);
        result.clean_metrics = compute_metrics(result.final_image, clean, &region);
    }

    json report;
    report["task"] = task_to_string(plan.task);
    report["hyper"] = {{"T", plan.hyper.T},
                       {"K", plan.hyper.K},
                       {"step_range", {plan.hyper.step_hi, plan.hyper.step_lo}},
                       {"block_range", {plan.hyper.block_lo, plan.hyper.block_hi}},
                       {"mask_mode", mask_mode_to_string(plan.hyper.mask_mode)},
                       {"seed", plan.hyper.seed}};
    report["stages"] = st.stages;
    json mask_stats;
    mask_stats["remove_ones"] = st.remove_mask.count_ones();
    mask_stats["remove_total"] = static_cast<size_t>(st.lat_h) * st.lat_w;
    json per_layer = json::array();
    for (const auto& pl : prepared) {
        per_layer.push_back({{"index", pl.index}, {"ones", pl.mask.count_ones()}});
    }
    mask_stats["layers"] = per_layer;
    report["mask_stats"] = mask_stats;
    if (result.clean_metrics) {
        report["clean_background_metrics"] = {{"l1", result.clean_metrics->l1},
                                              {"l2", result.clean_metrics->l2},
                                              {"psnr", result.clean_metrics->psnr}};
    }
    result.report_json = report.dump(2) + "\n";

    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        fs::path out(opts.out_dir);
        save_ppm(result.final_image, (out / "output.ppm").string());
        {
            std::ofstream f(out / "report.json");
            if (!f) throw IoError("cannot write report.json");
            f << result.report_json;
        }
        if (opts.dump_stages) {
            save_latent(st.decomp.background_at_fuse, (out / "stage_background.llat").string());
            save_ppm(decode(st.decomp.background_at_fuse, factor),
                     (out / "stage_background.ppm").string());
            if (st.has_fused) {
                save_latent(st.fused, (out / "stage_fused.llat").string());
                save_ppm(decode(st.fused, factor), (out / "stage_fused.ppm").string());
            }
            save_latent(st.final_latent, (out / "final.llat").string());
            save_pgm(st.remove_mask, (out / "remove_mask.pgm").string());
        }
        if (opts.dump_trajectory) {
            for (const auto& [t, z] : st.decomp.source_traj.latents) {
                save_latent(z, (out / ("traj_t" + two_digits(t) + ".llat")).string());
            }
        }
        if (opts.dump_heatmaps) {
            for (const auto& [call, map] : heatmaps) {
                std::string name = "heatmap_b" + std::to_string(call.block_index) + "_t" +
                                   two_digits(call.timestep) + ".pgm";
                save_heatmap(map, (out / name).string());
            }
        }
        clock.lap("write");
        json timings;
        for (const auto& [stage, ms] : clock.ms) timings[stage] = ms;
        write_json(timings, (out / "timings.json").string());
    }
    return result;
}

namespace {

// Shared fixture for the ablation modes: one procedural scene written to
// disk so runs go through the regular plan path.
struct AblationFixture {
    fs::path dir;
    std::string image;
    std::string mask;

    explicit AblationFixture(const std::string& out_dir) {
        dir = fs::path(out_dir);
        fs::create_directories(dir);
        Scene scene = make_scene(SceneConfig{}, 3);
        image = (dir / "scene.ppm").string();
        mask = (dir / "scene_mask.pgm").string();
        save_ppm(scene.image, image);
        save_pgm(scene.object_mask, mask);
    }
};

EditPlan removal_plan(const AblationFixture& fx) {
    EditPlan p;
    p.task = TaskKind::Removal;
    p.source_image = fx.image;
    LayerSpec l;
    l.index = 0;
    l.mask = fx.mask;
    p.layers.push_back(l);
    return p;
}

}  // namespace

void run_ablation(const std::string& mode, const Denoiser& model, const std::string& out_dir) {
    AblationFixture fx(out_dir);
    RunOptions opts;
    opts.out_dir = "";  // variants save their own images
    json report;
    report["mode"] = mode;
    json variants = json::array();

    auto save_variant = [&](const std::string& name, const RunResult& r) {
        std::string file = name + ".ppm";
        save_ppm(r.final_image, (fs::path(out_dir) / file).string());
        variants.push_back({{"name", name}, {"file", file}});
    };

    if (mode == "mask-placement") {
        for (MaskMode mm : {MaskMode::Key, MaskMode::Query, MaskMode::Value}) {
            EditPlan p = removal_plan(fx);
            p.hyper.mask_mode = mm;
            save_variant(mask_mode_to_string(mm), run_edit(p, model, opts));
        }
    } else if (mode == "effect-range") {
        const std::pair<int, int> ranges[] = {{50, 0}, {50, 10}, {50, 25}, {50, 40}};
        for (auto [hi, lo] : ranges) {
            EditPlan p = removal_plan(fx);
            p.hyper.step_hi = hi;
            p.hyper.step_lo = lo;
            save_variant("range_" + std::to_string(hi) + "_" + std::to_string(lo),
                         run_edit(p, model, opts));
        }
    } else if (mode == "canvas-init") {
        for (CanvasInit ci : {CanvasInit::Original, CanvasInit::Black, CanvasInit::White}) {
            EditPlan p;
            p.task = TaskKind::Pan;
            p.source_image = fx.image;
            p.pan_direction = "right";
            p.pan_scale = 0.2;
            p.canvas_init = ci;
            const char* name = ci == CanvasInit::Original ? "original"
                               : ci == CanvasInit::Black  ? "black"
                                                          : "white";
            save_variant(name, run_edit(p, model, opts));
        }
    } else if (mode == "resize-level") {
        for (bool latent_level : {false, true}) {
            EditPlan p;
            p.task = TaskKind::ResizeFlip;
            p.source_image = fx.image;
            p.resize_at_latent_level = latent_level;
            LayerSpec bg;
            bg.index = 0;
            bg.mask = fx.mask;
            p.layers.push_back(bg);
            LayerSpec inst;
            inst.index = 1;
            inst.mask = fx.mask;
            inst.adjust.resize = {0.5, 0.5};
            p.layers.push_back(inst);
            save_variant(latent_level ? "latent_level" : "image_level",
                         run_edit(p, model, opts));
        }
    } else {
        throw ValidationError("ablate mode '" + mode +
                              "' is unknown (mask-placement|effect-range|canvas-init|resize-level)");
    }

    report["variants"] = variants;
    write_json(report, (fs::path(out_dir) / "report.json").string());
}

}  // namespace layerlat
