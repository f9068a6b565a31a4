#pragma once

#include <map>
#include <optional>
#include <vector>

#include "layerlat/attention.hpp"
#include "layerlat/codec.hpp"
#include "layerlat/ddim.hpp"
#include "layerlat/image.hpp"
#include "layerlat/model.hpp"
#include "layerlat/schedule.hpp"

namespace layerlat {

// Integer shift in latent cells.
struct MoveVector {
    int dx = 0;
    int dy = 0;
};

// out(i, j) = in(i - dy, j - dx); out-of-range reads are zero-filled.
// Works on (h x w) and (c x h x w) tensors.
Tensor move(const Tensor& x, MoveVector v);
MaskGrid move(const MaskGrid& m, MoveVector v);

// Union of move(m, v) over all vectors, clamped to binary.
MaskGrid moved_union(const MaskGrid& m, const std::vector<MoveVector>& moves);

// Background preservation: inside the mask the removal latent evolves;
// outside, the source latent is copied verbatim. Masks are binary, so the
// blend is an exact per-cell select.
Tensor removal_blend(const Tensor& z_l0, const Tensor& z_s, const MaskGrid& m_remove);

// One layer prepared for fusion.
struct LayerState {
    int index = 0;
    Tensor latent;  // Z^{L_i} at the fusion timestep
    MaskGrid mask;  // M_i at latent resolution
    std::vector<MoveVector> moves;
};

// Sequential paste in ascending layer order; for each move vector the moved
// mask selects the moved layer latent over the canvas. Later layers
// overwrite earlier ones on overlap.
Tensor fuse_layers(const Tensor& canvas, const std::vector<LayerState>& layers);

// Canvas-side guided blend: the canvas removal latent keeps evolving inside
// the moved occlusion mask, the plain canvas everywhere else.
Tensor occlusion_blend(const Tensor& z_hat_c, const Tensor& z_c, const MaskGrid& m_occlude_moved);

struct DecompositionLayer {
    int index = 1;
    MaskGrid mask_latent;          // M_i at latent resolution
    ImageBuffer adjusted_image;    // only meaningful when `adjusted`
    bool adjusted = false;
    Tensor adjusted_latent;        // only meaningful when `latent_adjusted`
    bool latent_adjusted = false;  // invert adjusted_latent instead of an image
    std::vector<MoveVector> moves;
};

struct DecompositionInput {
    ImageBuffer source;
    MaskGrid remove_mask;                    // latent resolution
    std::optional<MaskGrid> refine_mask;     // latent resolution
    std::vector<DecompositionLayer> layers;  // instance layers (index >= 1)
    int K = 40;
    MaskMode mode = MaskMode::Key;
    int step_hi = 50;
    int step_lo = 10;
    int block_lo = 0;
    int block_hi = 1 << 30;
    int codec_factor = kDefaultCodecFactor;
    std::vector<int> attention_resolutions;  // token grids needing masks
    // Optional observer fed every attention heatmap from the removal stage.
    std::function<void(const Tensor&, const AttentionCall&)> heatmap_sink;
};

struct DecompositionResult {
    Trajectory source_traj;
    std::map<int, Trajectory> layer_trajs;   // adjusted layers only
    Tensor background_at_fuse;               // Z^{L_0} at t = T-K
    std::map<int, Tensor> layer_latents_at_fuse;
    std::map<int, Tensor> removal_per_step;  // t -> removal latent after the blend
};

// Builds the mask set routing the remove/refine masks into every attention
// block within the configured step/block window.
AttentionMaskSet build_mask_set(const MaskGrid& remove, const std::optional<MaskGrid>& refine,
                                MaskMode mode, int step_hi, int step_lo, int block_lo,
                                int block_hi, const std::vector<int>& resolutions);

// Inverts the source (and each adjusted layer image), then runs the removal
// stage t = T .. T-K with key-masking attention on the background latent and
// the source-copy blend after every step.
DecompositionResult run_decomposition(const DecompositionInput& input, const EpsilonModel& model,
                                      const NoiseSchedule& schedule);

// Plain denoising of the fused canvas from t = T-K down to 0.
Tensor harmonize(const Tensor& canvas_at_fuse, const EpsilonModel& model,
                 const NoiseSchedule& schedule, int K, const std::vector<StepHook>& hooks = {});

// Occlusion-aware tail: the fused canvas denoises plainly while its removal
// twin denoises under key-masking on the moved occlusion mask, re-blended
// after every step. Returns the removal twin at t = 0.
Tensor run_occlusion_tail(const Tensor& fused_canvas_at_fuse, const MaskGrid& moved_occlude,
                          const EpsilonModel& model, const NoiseSchedule& schedule, int K,
                          const DecompositionInput& attn_cfg);

}  // namespace layerlat
