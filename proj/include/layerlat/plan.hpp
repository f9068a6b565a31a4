#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layerlat/attention.hpp"
#include "layerlat/codec.hpp"

namespace layerlat {

enum class TaskKind {
    Removal,
    Movement,
    ResizeFlip,
    Pan,
    Zoom,
    OcclusionAware,
    CrossComposition,
};

TaskKind task_from_string(const std::string& s);
std::string task_to_string(TaskKind t);

// A move is either an explicit pixel offset or a direction plus a fraction
// of the latent dimension along it.
struct MoveSpec {
    bool is_pixel = true;
    int dx_px = 0;
    int dy_px = 0;
    std::string direction;  // left|right|up|down
    double scale = 0.0;
};

struct AdjustSpec {
    std::optional<std::pair<double, double>> resize;  // h_ratio, w_ratio
    std::optional<FlipAxis> flip;

    bool any() const { return resize.has_value() || flip.has_value(); }
    bool identity() const;
};

struct LayerSpec {
    int index = 0;
    std::string mask;                  // PGM path (image or latent resolution)
    std::optional<std::string> image;  // foreground image for cross-composition
    AdjustSpec adjust;
    std::vector<MoveSpec> moves;
};

struct HyperParams {
    int T = 50;
    int K = 40;
    int step_hi = 50;
    int step_lo = 10;
    int block_lo = 0;
    int block_hi = 1 << 30;
    MaskMode mask_mode = MaskMode::Key;
    uint64_t seed = 1234;
};

struct EditPlan {
    TaskKind task = TaskKind::Removal;
    HyperParams hyper;
    CanvasInit canvas_init = CanvasInit::Original;
    std::string source_image;
    std::optional<std::string> background_image;  // cross-composition reference
    std::vector<LayerSpec> layers;
    std::optional<std::string> refine_mask;
    std::optional<std::string> occlude_mask;      // occluder object mask
    int occluded_layer = -1;                      // layer whose moves drag the occlusion mask
    std::string pan_direction;                    // pan task
    double pan_scale = 0.0;                       // pan task
    double zoom_scale = 0.0;                      // zoom task
    std::optional<std::string> clean_background;  // optional metrics reference
    bool resize_at_latent_level = false;          // ablation flag
};

// Which latents play the Source / Removal / Target roles for a task, and
// when fusion runs.
struct TaskBinding {
    enum class Fusion { None, AtFuseTime, EveryStepFromFuse };
    enum class RemoveMask { ObjUnion, Pan, Zoom, MovedOccludeUnion, Background };
    enum class Adjust { None, ResizeFlip, PanPaste, ZoomPaste, LayoutGuided };

    std::string source_role;   // "Z_S" | "Z_C" | "Z_BG"
    std::string removal_role;  // "Z_L0" | "Z_hat_C"
    std::string target_role;   // "Z_L0" | "Z_C" | "Z_hat_C"
    Fusion fusion = Fusion::None;
    RemoveMask remove_mask = RemoveMask::ObjUnion;
    Adjust adjust = Adjust::None;
};

TaskBinding bind_task(TaskKind task);

// JSON document <-> plan. parse_plan validates invariants (unique contiguous
// layer indices, K <= T, task-specific fields) and fills defaults; it does
// not touch the filesystem.
EditPlan parse_plan_text(const std::string& json_text);
std::string serialize_plan(const EditPlan& plan);

// Loads and validates a plan file, resolving relative paths against the
// plan's directory and checking that referenced files exist.
EditPlan load_plan(const std::string& path);

// Deterministic stand-in for the external instruction planner.
struct PlanRequest {
    std::string kind;  // removal | swap | move | resize
    std::string source_image;
    std::vector<std::string> object_masks;
    double h_ratio = 1.0;
    double w_ratio = 1.0;
    int dx_px = 0;
    int dy_px = 0;
};

// Expands a request into a layer-wise plan (background layer plus instance
// layers; remove mask is the union of the object masks). Reads mask files
// when it needs object centroids (swap).
EditPlan plan_from_template(const PlanRequest& request);

}  // namespace layerlat
