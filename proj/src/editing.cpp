#include "layerlat/editing.hpp"

#include <algorithm>

#include "layerlat/errors.hpp"

namespace layerlat {

Tensor move(const Tensor& x, MoveVector v) {
    if (x.rank() != 2 && x.rank() != 3) {
        throw DimensionError("move expects h x w or c x h x w, got " + x.shape_str());
    }
    const bool spatial_only = x.rank() == 2;
    const int c = spatial_only ? 1 : x.dim(0);
    const int h = spatial_only ? x.dim(0) : x.dim(1);
    const int w = spatial_only ? x.dim(1) : x.dim(2);
    Tensor out(x.shape());
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h; ++i) {
            int si = i - v.dy;
            if (si < 0 || si >= h) continue;
            for (int j = 0; j < w; ++j) {
                int sj = j - v.dx;
                if (sj < 0 || sj >= w) continue;
                size_t so = (static_cast<size_t>(ch) * h + si) * w + sj;
                size_t dst = (static_cast<size_t>(ch) * h + i) * w + j;
                out.data()[dst] = x.data()[so];
            }
        }
    }
    return out;
}

MaskGrid move(const MaskGrid& m, MoveVector v) {
    return MaskGrid::from_tensor(move(m.to_tensor(), v));
}

MaskGrid moved_union(const MaskGrid& m, const std::vector<MoveVector>& moves) {
    MaskGrid out(m.height, m.width);
    for (const auto& v : moves) out = mask_union(out, move(m, v));
    return out;
}

namespace {

void check_latent_mask(const Tensor& z, const MaskGrid& m, const char* where) {
    if (z.rank() != 3 || z.dim(1) != m.height || z.dim(2) != m.width) {
        throw DimensionError(std::string(where) + ": latent " + z.shape_str() +
                             " vs mask " + std::to_string(m.height) + "x" +
                             std::to_string(m.width));
    }
}

// out = a where mask==1, b where mask==0. Exact select; equivalent to
// a ⊙ m + b ⊙ (1-m) for binary masks.
Tensor select_by_mask(const Tensor& a, const Tensor& b, const MaskGrid& m) {
    if (!a.same_shape(b)) throw DimensionError("blend operands differ in shape");
    check_latent_mask(a, m, "blend");
    Tensor out = b;
    const int c = a.dim(0);
    const size_t hw = static_cast<size_t>(m.height) * m.width;
    for (int ch = 0; ch < c; ++ch) {
        for (size_t i = 0; i < hw; ++i) {
            if (m.values[i]) out.data()[static_cast<size_t>(ch) * hw + i] =
                a.data()[static_cast<size_t>(ch) * hw + i];
        }
    }
    return out;
}

}  // namespace

Tensor removal_blend(const Tensor& z_l0, const Tensor& z_s, const MaskGrid& m_remove) {
    return select_by_mask(z_l0, z_s, m_remove);
}

Tensor fuse_layers(const Tensor& canvas, const std::vector<LayerState>& layers) {
    Tensor out = canvas;
    std::vector<const LayerState*> ordered;
    for (const auto& l : layers) ordered.push_back(&l);
    std::sort(ordered.begin(), ordered.end(),
              [](const LayerState* a, const LayerState* b) { return a->index < b->index; });
    for (const LayerState* layer : ordered) {
        check_latent_mask(layer->latent, layer->mask, "fuse_layers");
        for (const auto& v : layer->moves) {
            MaskGrid moved_mask = move(layer->mask, v);
            Tensor moved_latent = move(layer->latent, v);
            out = select_by_mask(moved_latent, out, moved_mask);
        }
    }
    return out;
}

Tensor occlusion_blend(const Tensor& z_hat_c, const Tensor& z_c, const MaskGrid& m_occlude_moved) {
    return select_by_mask(z_hat_c, z_c, m_occlude_moved);
}

AttentionMaskSet build_mask_set(const MaskGrid& remove, const std::optional<MaskGrid>& refine,
                                MaskMode mode, int step_hi, int step_lo, int block_lo,
                                int block_hi, const std::vector<int>& resolutions) {
    AttentionMaskSet set;
    set.mode = mode;
    set.step_hi = step_hi;
    set.step_lo = step_lo;
    set.block_lo = block_lo;
    set.block_hi = block_hi;
    set.remove = prepare_token_masks(remove, resolutions);
    if (refine) set.refine = prepare_token_masks(*refine, resolutions);
    return set;
}

DecompositionResult run_decomposition(const DecompositionInput& input, const EpsilonModel& model,
                                      const NoiseSchedule& schedule) {
    if (input.K < 0 || input.K > schedule.T) {
        throw ParameterError("decomposition K must lie in [0, T]");
    }
    DecompositionResult res;
    Tensor z0 = encode(input.source, input.codec_factor);
    check_latent_mask(z0, input.remove_mask, "run_decomposition");
    res.source_traj = invert(z0, model, schedule);

    const int t_fuse = schedule.T - input.K;
    for (const auto& layer : input.layers) {
        if (layer.adjusted || layer.latent_adjusted) {
            Tensor zl = layer.latent_adjusted ? layer.adjusted_latent
                                              : encode(layer.adjusted_image, input.codec_factor);
            Trajectory traj = invert(zl, model, schedule);
            res.layer_latents_at_fuse[layer.index] = traj.at(t_fuse);
            res.layer_trajs[layer.index] = std::move(traj);
        } else {
            // unadjusted layers reuse the source trajectory
            res.layer_latents_at_fuse[layer.index] = res.source_traj.at(t_fuse);
        }
    }

    AttentionMaskSet set =
        build_mask_set(input.remove_mask, input.refine_mask, input.mode, input.step_hi,
                       input.step_lo, input.block_lo, input.block_hi,
                       input.attention_resolutions);
    MaskedAttentionProcessor proc(std::move(set));
    proc.heatmap_sink = input.heatmap_sink;
    AttentionContext ctx{&proc, schedule.T};

    Tensor z = res.source_traj.at(schedule.T);
    for (int t = schedule.T; t > t_fuse; --t) {
        ctx.timestep = t;
        Tensor eps = model.epsilon(z, t, &ctx);
        z = ddim_step(z, eps, t, t - 1, schedule);
        z = removal_blend(z, res.source_traj.at(t - 1), input.remove_mask);
        res.removal_per_step[t - 1] = z;
    }
    res.background_at_fuse = z;
    return res;
}

Tensor harmonize(const Tensor& canvas_at_fuse, const EpsilonModel& model,
                 const NoiseSchedule& schedule, int K, const std::vector<StepHook>& hooks) {
    if (K < 0 || K > schedule.T) throw ParameterError("harmonize K must lie in [0, T]");
    if (K == schedule.T) return canvas_at_fuse;  // no harmonization steps
    LatentSet set;
    set.latents["canvas"] = canvas_at_fuse;
    return sample(std::move(set), model, schedule, hooks, nullptr, "canvas", schedule.T - K);
}

Tensor run_occlusion_tail(const Tensor& fused_canvas_at_fuse, const MaskGrid& moved_occlude,
                          const EpsilonModel& model, const NoiseSchedule& schedule, int K,
                          const DecompositionInput& attn_cfg) {
    if (K == schedule.T) {
        return occlusion_blend(fused_canvas_at_fuse, fused_canvas_at_fuse, moved_occlude);
    }
    check_latent_mask(fused_canvas_at_fuse, moved_occlude, "run_occlusion_tail");
    AttentionMaskSet set = build_mask_set(moved_occlude, std::nullopt, attn_cfg.mode,
                                          attn_cfg.step_hi, attn_cfg.step_lo, attn_cfg.block_lo,
                                          attn_cfg.block_hi, attn_cfg.attention_resolutions);
    MaskedAttentionProcessor proc(std::move(set));
    AttentionContext ctx{&proc, schedule.T};

    LatentSet init;
    init.latents["canvas"] = fused_canvas_at_fuse;
    init.latents["canvas_removal"] = fused_canvas_at_fuse;

    CtxProvider provider = [&](int t, const std::string& role) -> const AttentionContext* {
        if (role != "canvas_removal") return nullptr;
        ctx.timestep = t;
        return &ctx;
    };
    StepHook blend_hook = [&](int, LatentSet& s) {
        s.at("canvas_removal") =
            occlusion_blend(s.at("canvas_removal"), s.at("canvas"), moved_occlude);
    };
    return sample(std::move(init), model, schedule, {blend_hook}, provider, "canvas_removal",
                  schedule.T - K);
}

}  // namespace layerlat
