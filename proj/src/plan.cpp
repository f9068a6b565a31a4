#include "layerlat/plan.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "layerlat/errors.hpp"

namespace layerlat {

using nlohmann::json;
namespace fs = std::filesystem;

TaskKind task_from_string(const std::string& s) {
    if (s == "removal") return TaskKind::Removal;
    if (s == "movement") return TaskKind::Movement;
    if (s == "resize_flip") return TaskKind::ResizeFlip;
    if (s == "pan") return TaskKind::Pan;
    if (s == "zoom") return TaskKind::Zoom;
    if (s == "occlusion_aware") return TaskKind::OcclusionAware;
    if (s == "cross_composition") return TaskKind::CrossComposition;
    throw ValidationError("task: unknown value '" + s + "'");
}

std::string task_to_string(TaskKind t) {
    switch (t) {
        case TaskKind::Removal: return "removal";
        case TaskKind::Movement: return "movement";
        case TaskKind::ResizeFlip: return "resize_flip";
        case TaskKind::Pan: return "pan";
        case TaskKind::Zoom: return "zoom";
        case TaskKind::OcclusionAware: return "occlusion_aware";
        case TaskKind::CrossComposition: return "cross_composition";
    }
    throw ValidationError("task: unknown enum value");
}

bool AdjustSpec::identity() const {
    if (flip.has_value()) return false;
    if (!resize.has_value()) return true;
    return resize->first == 1.0 && resize->second == 1.0;
}

TaskBinding bind_task(TaskKind task) {
    TaskBinding b;
    switch (task) {
        case TaskKind::Removal:
            b = {"Z_S", "Z_L0", "Z_L0", TaskBinding::Fusion::None,
                 TaskBinding::RemoveMask::ObjUnion, TaskBinding::Adjust::None};
            break;
        case TaskKind::Movement:
            b = {"Z_S", "Z_L0", "Z_C", TaskBinding::Fusion::AtFuseTime,
                 TaskBinding::RemoveMask::ObjUnion, TaskBinding::Adjust::None};
            break;
        case TaskKind::ResizeFlip:
            b = {"Z_S", "Z_L0", "Z_C", TaskBinding::Fusion::AtFuseTime,
                 TaskBinding::RemoveMask::ObjUnion, TaskBinding::Adjust::ResizeFlip};
            break;
        case TaskKind::Pan:
            b = {"Z_S", "Z_L0", "Z_L0", TaskBinding::Fusion::None,
                 TaskBinding::RemoveMask::Pan, TaskBinding::Adjust::PanPaste};
            break;
        case TaskKind::Zoom:
            b = {"Z_S", "Z_L0", "Z_L0", TaskBinding::Fusion::None,
                 TaskBinding::RemoveMask::Zoom, TaskBinding::Adjust::ZoomPaste};
            break;
        case TaskKind::OcclusionAware:
            b = {"Z_C", "Z_hat_C", "Z_hat_C", TaskBinding::Fusion::EveryStepFromFuse,
                 TaskBinding::RemoveMask::MovedOccludeUnion, TaskBinding::Adjust::None};
            break;
        case TaskKind::CrossComposition:
            b = {"Z_BG", "Z_L0", "Z_C", TaskBinding::Fusion::AtFuseTime,
                 TaskBinding::RemoveMask::Background, TaskBinding::Adjust::LayoutGuided};
            break;
    }
    return b;
}

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw ValidationError(field + ": " + why);
}

const json& require(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) bad_field(ctx + key, "missing required field");
    return *it;
}

std::string as_string(const json& j, const std::string& field) {
    if (!j.is_string()) bad_field(field, "expected string");
    return j.get<std::string>();
}

int as_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) bad_field(field, "expected integer");
    return j.get<int>();
}

double as_double(const json& j, const std::string& field) {
    if (!j.is_number()) bad_field(field, "expected number");
    return j.get<double>();
}

MoveSpec parse_move(const json& j, const std::string& ctx) {
    if (!j.is_object()) bad_field(ctx, "expected object");
    MoveSpec m;
    if (j.contains("dx_px") || j.contains("dy_px")) {
        if (j.contains("direction") || j.contains("scale")) {
            bad_field(ctx, "give either dx_px/dy_px or direction/scale, not both");
        }
        m.is_pixel = true;
        m.dx_px = j.contains("dx_px") ? as_int(j["dx_px"], ctx + ".dx_px") : 0;
        m.dy_px = j.contains("dy_px") ? as_int(j["dy_px"], ctx + ".dy_px") : 0;
    } else if (j.contains("direction") && j.contains("scale")) {
        m.is_pixel = false;
        m.direction = as_string(j["direction"], ctx + ".direction");
        if (m.direction != "left" && m.direction != "right" && m.direction != "up" &&
            m.direction != "down") {
            bad_field(ctx + ".direction", "expected left|right|up|down");
        }
        m.scale = as_double(j["scale"], ctx + ".scale");
        if (m.scale < 0.0) bad_field(ctx + ".scale", "must be >= 0");
    } else {
        bad_field(ctx, "expected dx_px/dy_px or direction/scale");
    }
    return m;
}

LayerSpec parse_layer(const json& j, const std::string& ctx) {
    if (!j.is_object()) bad_field(ctx, "expected object");
    LayerSpec layer;
    layer.index = as_int(require(j, "index", ctx + "."), ctx + ".index");
    if (layer.index < 0) bad_field(ctx + ".index", "must be >= 0");
    layer.mask = as_string(require(j, "mask", ctx + "."), ctx + ".mask");
    if (j.contains("image")) layer.image = as_string(j["image"], ctx + ".image");
    if (j.contains("adjust")) {
        const json& a = j["adjust"];
        if (!a.is_object()) bad_field(ctx + ".adjust", "expected object");
        if (a.contains("resize")) {
            const json& r = a["resize"];
            double hr = as_double(require(r, "h_ratio", ctx + ".adjust.resize."),
                                  ctx + ".adjust.resize.h_ratio");
            double wr = as_double(require(r, "w_ratio", ctx + ".adjust.resize."),
                                  ctx + ".adjust.resize.w_ratio");
            if (hr <= 0.0 || wr <= 0.0) {
                bad_field(ctx + ".adjust.resize", "ratios must be > 0");
            }
            layer.adjust.resize = {hr, wr};
        }
        if (a.contains("flip")) {
            const json& f = a["flip"];
            layer.adjust.flip = flip_axis_from_string(
                as_string(require(f, "axis", ctx + ".adjust.flip."), ctx + ".adjust.flip.axis"));
        }
    }
    if (j.contains("moves")) {
        const json& mv = j["moves"];
        if (!mv.is_array()) bad_field(ctx + ".moves", "expected array");
        for (size_t i = 0; i < mv.size(); ++i) {
            layer.moves.push_back(parse_move(mv[i], ctx + ".moves[" + std::to_string(i) + "]"));
        }
    }
    return layer;
}

void validate_plan(const EditPlan& p) {
    if (p.source_image.empty()) bad_field("source_image", "must be non-empty");
    if (p.hyper.T < 1) bad_field("hyper.T", "must be >= 1");
    if (p.hyper.K < 0 || p.hyper.K > p.hyper.T) bad_field("hyper.K", "must lie in [0, T]");
    if (p.hyper.step_hi < p.hyper.step_lo) bad_field("hyper.step_range", "expects [hi, lo]");
    if (p.hyper.step_hi > p.hyper.T || p.hyper.step_lo < 0) {
        bad_field("hyper.step_range", "must lie within [T, 0]");
    }
    if (p.hyper.block_lo > p.hyper.block_hi || p.hyper.block_lo < 0) {
        bad_field("hyper.block_range", "expects 0 <= lo <= hi");
    }

    std::set<int> indices;
    for (const auto& l : p.layers) {
        if (!indices.insert(l.index).second) {
            bad_field("layers", "duplicate layer index " + std::to_string(l.index));
        }
    }
    if (!indices.empty()) {
        int expect = 0;
        for (int idx : indices) {
            if (idx != expect++) bad_field("layers", "indices must be contiguous from 0");
        }
    }

    switch (p.task) {
        case TaskKind::Pan:
            if (p.pan_direction.empty()) bad_field("pan.direction", "required for pan task");
            if (p.pan_scale <= 0.0 || p.pan_scale >= 1.0) {
                bad_field("pan.scale", "must lie in (0, 1)");
            }
            break;
        case TaskKind::Zoom:
            if (p.zoom_scale <= 1.0) bad_field("zoom.scale", "must be > 1");
            break;
        case TaskKind::OcclusionAware:
            if (!p.occlude_mask) bad_field("occlude_mask", "required for occlusion_aware task");
            if (p.layers.empty()) bad_field("layers", "occlusion_aware needs at least one layer");
            if (p.occluded_layer >= 0 && !indices.count(p.occluded_layer)) {
                bad_field("occluded_layer", "refers to a missing layer index");
            }
            break;
        case TaskKind::CrossComposition:
            if (!p.background_image) {
                bad_field("background_image", "required for cross_composition task");
            }
            if (p.layers.empty()) {
                bad_field("layers", "cross_composition needs at least one layer");
            }
            for (const auto& l : p.layers) {
                if (l.index >= 1 && !l.image) {
                    bad_field("layers[" + std::to_string(l.index) + "].image",
                              "instance layers need a foreground image for cross_composition");
                }
            }
            break;
        default:
            if (p.layers.empty()) bad_field("layers", "task needs at least one layer");
            break;
    }
}

}  // namespace

EditPlan parse_plan_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("plan: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("plan: top level must be an object");

    EditPlan p;
    p.task = task_from_string(as_string(require(doc, "task", ""), "task"));
    p.source_image = as_string(require(doc, "source_image", ""), "source_image");

    if (doc.contains("hyper")) {
        const json& h = doc["hyper"];
        if (!h.is_object()) bad_field("hyper", "expected object");
        if (h.contains("T")) p.hyper.T = as_int(h["T"], "hyper.T");
        if (h.contains("K")) p.hyper.K = as_int(h["K"], "hyper.K");
        p.hyper.step_hi = p.hyper.T;  // default window [T, 10] rescaled below if given
        p.hyper.step_lo = std::min(10, p.hyper.T);
        if (h.contains("step_range")) {
            const json& r = h["step_range"];
            if (!r.is_array() || r.size() != 2) bad_field("hyper.step_range", "expected [hi, lo]");
            p.hyper.step_hi = as_int(r[0], "hyper.step_range[0]");
            p.hyper.step_lo = as_int(r[1], "hyper.step_range[1]");
        }
        if (h.contains("block_range")) {
            const json& r = h["block_range"];
            if (!r.is_array() || r.size() != 2) bad_field("hyper.block_range", "expected [lo, hi]");
            p.hyper.block_lo = as_int(r[0], "hyper.block_range[0]");
            p.hyper.block_hi = as_int(r[1], "hyper.block_range[1]");
        }
        if (h.contains("mask_mode")) {
            p.hyper.mask_mode = mask_mode_from_string(as_string(h["mask_mode"], "hyper.mask_mode"));
        }
        if (h.contains("seed")) {
            if (!h["seed"].is_number_unsigned() && !h["seed"].is_number_integer()) {
                bad_field("hyper.seed", "expected integer");
            }
            p.hyper.seed = h["seed"].get<uint64_t>();
        }
    }

    if (doc.contains("canvas_init")) {
        p.canvas_init = canvas_init_from_string(as_string(doc["canvas_init"], "canvas_init"));
    }
    if (doc.contains("background_image")) {
        p.background_image = as_string(doc["background_image"], "background_image");
    }
    if (doc.contains("refine_mask")) {
        p.refine_mask = as_string(doc["refine_mask"], "refine_mask");
    }
    if (doc.contains("occlude_mask")) {
        p.occlude_mask = as_string(doc["occlude_mask"], "occlude_mask");
    }
    if (doc.contains("occluded_layer")) {
        p.occluded_layer = as_int(doc["occluded_layer"], "occluded_layer");
    }
    if (doc.contains("clean_background")) {
        p.clean_background = as_string(doc["clean_background"], "clean_background");
    }
    if (doc.contains("pan")) {
        const json& pan = doc["pan"];
        p.pan_direction = as_string(require(pan, "direction", "pan."), "pan.direction");
        pan_direction_from_string(p.pan_direction);  // validates the value
        p.pan_scale = as_double(require(pan, "scale", "pan."), "pan.scale");
    }
    if (doc.contains("zoom")) {
        p.zoom_scale = as_double(require(doc["zoom"], "scale", "zoom."), "zoom.scale");
    }
    if (doc.contains("resize_at_latent_level")) {
        if (!doc["resize_at_latent_level"].is_boolean()) {
            bad_field("resize_at_latent_level", "expected boolean");
        }
        p.resize_at_latent_level = doc["resize_at_latent_level"].get<bool>();
    }

    if (doc.contains("layers")) {
        const json& ls = doc["layers"];
        if (!ls.is_array()) bad_field("layers", "expected array");
        for (size_t i = 0; i < ls.size(); ++i) {
            p.layers.push_back(parse_layer(ls[i], "layers[" + std::to_string(i) + "]"));
        }
    }

    validate_plan(p);
    return p;
}

std::string serialize_plan(const EditPlan& p) {
    json doc;
    doc["task"] = task_to_string(p.task);
    doc["source_image"] = p.source_image;
    json h;
    h["T"] = p.hyper.T;
    h["K"] = p.hyper.K;
    h["step_range"] = {p.hyper.step_hi, p.hyper.step_lo};
    h["block_range"] = {p.hyper.block_lo, p.hyper.block_hi};
    h["mask_mode"] = mask_mode_to_string(p.hyper.mask_mode);
    h["seed"] = p.hyper.seed;
    doc["hyper"] = h;
    switch (p.canvas_init) {
        case CanvasInit::Original: doc["canvas_init"] = "original"; break;
        case CanvasInit::Black: doc["canvas_init"] = "black"; break;
        case CanvasInit::White: doc["canvas_init"] = "white"; break;
    }
    if (p.background_image) doc["background_image"] = *p.background_image;
    if (p.refine_mask) doc["refine_mask"] = *p.refine_mask;
    if (p.occlude_mask) doc["occlude_mask"] = *p.occlude_mask;
    if (p.occluded_layer >= 0) doc["occluded_layer"] = p.occluded_layer;
    if (p.clean_background) doc["clean_background"] = *p.clean_background;
    if (p.task == TaskKind::Pan) {
        doc["pan"] = {{"direction", p.pan_direction}, {"scale", p.pan_scale}};
    }
    if (p.task == TaskKind::Zoom) doc["zoom"] = {{"scale", p.zoom_scale}};
    if (p.resize_at_latent_level) doc["resize_at_latent_level"] = true;

    json layers = json::array();
    for (const auto& l : p.layers) {
        json jl;
        jl["index"] = l.index;
        jl["mask"] = l.mask;
        if (l.image) jl["image"] = *l.image;
        if (l.adjust.any()) {
            json a;
            if (l.adjust.resize) {
                a["resize"] = {{"h_ratio", l.adjust.resize->first},
                               {"w_ratio", l.adjust.resize->second}};
            }
            if (l.adjust.flip) {
                a["flip"] = {{"axis", *l.adjust.flip == FlipAxis::Horizontal ? "horizontal"
                                                                             : "vertical"}};
            }
            jl["adjust"] = a;
        }
        if (!l.moves.empty()) {
            json mv = json::array();
            for (const auto& m : l.moves) {
                if (m.is_pixel) {
                    mv.push_back({{"dx_px", m.dx_px}, {"dy_px", m.dy_px}});
                } else {
                    mv.push_back({{"direction", m.direction}, {"scale", m.scale}});
                }
            }
            jl["moves"] = mv;
        }
        layers.push_back(jl);
    }
    doc["layers"] = layers;
    return doc.dump(2) + "\n";
}

EditPlan load_plan(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open plan " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    EditPlan p = parse_plan_text(ss.str());

    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& ref) {
        if (ref.empty()) return;
        fs::path candidate(ref);
        if (candidate.is_relative()) candidate = base / candidate;
        if (!fs::exists(candidate)) throw IoError("plan references missing file " + ref);
        ref = candidate.string();
    };
    auto resolve_opt = [&](std::optional<std::string>& ref) {
        if (ref) resolve(*ref);
    };
    resolve(p.source_image);
    resolve_opt(p.background_image);
    resolve_opt(p.refine_mask);
    resolve_opt(p.occlude_mask);
    resolve_opt(p.clean_background);
    for (auto& l : p.layers) {
        resolve(l.mask);
        resolve_opt(l.image);
    }
    return p;
}

EditPlan plan_from_template(const PlanRequest& request) {
    if (request.object_masks.empty()) {
        throw ValidationError("planner request needs at least one object mask");
    }
    EditPlan p;
    p.source_image = request.source_image;

    auto add_layer = [&](int index, const std::string& mask) {
        LayerSpec l;
        l.index = index;
        l.mask = mask;
        p.layers.push_back(l);
        return &p.layers.back();
    };

    if (request.kind == "removal") {
        p.task = TaskKind::Removal;
        // background layer only; the remove mask is the object union
        add_layer(0, request.object_masks.front());
        for (size_t i = 1; i < request.object_masks.size(); ++i) {
            add_layer(static_cast<int>(i), request.object_masks[i]);
        }
        for (auto& l : p.layers) l.moves.clear();
        return p;
    }
    if (request.kind == "move") {
        p.task = TaskKind::Movement;
        add_layer(0, request.object_masks.front());
        MoveSpec m;
        m.is_pixel = true;
        m.dx_px = request.dx_px;
        m.dy_px = request.dy_px;
        add_layer(1, request.object_masks.front())->moves.push_back(m);
        return p;
    }
    if (request.kind == "resize") {
        p.task = TaskKind::ResizeFlip;
        add_layer(0, request.object_masks.front());
        LayerSpec* inst = add_layer(1, request.object_masks.front());
        if (request.h_ratio != 1.0 || request.w_ratio != 1.0) {
            inst->adjust.resize = {request.h_ratio, request.w_ratio};
        }
        inst->moves.push_back(MoveSpec{});  // identity placement
        return p;
    }
    if (request.kind == "swap") {
        if (request.object_masks.size() != 2) {
            throw ValidationError("swap request needs exactly two object masks");
        }
        p.task = TaskKind::Movement;
        MaskGrid a = load_pgm(request.object_masks[0]);
        MaskGrid b = load_pgm(request.object_masks[1]);
        auto centroid = [](const MaskGrid& m) -> std::pair<double, double> {
            double cy = 0, cx = 0, n = 0;
            for (int y = 0; y < m.height; ++y) {
                for (int x = 0; x < m.width; ++x) {
                    if (m.at(y, x)) {
                        cy += y;
                        cx += x;
                        n += 1;
                    }
                }
            }
            if (n == 0) throw ValidationError("swap request mask is empty");
            return {cy / n, cx / n};
        };
        auto [ay, ax] = centroid(a);
        auto [by, bx] = centroid(b);
        int dy = static_cast<int>(std::lround(by - ay));
        int dx = static_cast<int>(std::lround(bx - ax));
        add_layer(0, request.object_masks[0]);
        MoveSpec fwd;
        fwd.dx_px = dx;
        fwd.dy_px = dy;
        MoveSpec back;
        back.dx_px = -dx;
        back.dy_px = -dy;
        add_layer(1, request.object_masks[0])->moves.push_back(fwd);
        add_layer(2, request.object_masks[1])->moves.push_back(back);
        return p;
    }
    throw ValidationError("planner request kind '" + request.kind + "' is unknown");
}

}  // namespace layerlat
