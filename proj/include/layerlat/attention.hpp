#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layerlat/image.hpp"
#include "layerlat/tensor.hpp"

namespace layerlat {

enum class MaskMode { None, Key, Query, Value };

MaskMode mask_mode_from_string(const std::string& s);
std::string mask_mode_to_string(MaskMode m);

// Token-resolution masks plus the step/block window where masking applies.
// step_range is [hi, lo] with t counting noise levels (t=T is pure noise):
// masking is active for lo <= t <= hi.
struct AttentionMaskSet {
    std::map<int, Tensor> remove;            // resolution -> flattened token mask [n]
    std::map<int, Tensor> refine;            // optional; same keying
    MaskMode mode = MaskMode::Key;
    int step_hi = 50;
    int step_lo = 10;
    int block_lo = 0;
    int block_hi = 1 << 30;

    const Tensor* remove_for(int resolution) const;
    const Tensor* refine_for(int resolution) const;
};

bool masking_active(int t, int block, const AttentionMaskSet& set);

// Softmax(Q ((1-m-r) ⊙ K)^T / sqrt(d)) V. Masked key vectors are zeroed so
// their logits become exactly 0 (not -inf); suppression stays soft.
// m and r are length-n with values in {0,1}; pass empty tensors to skip.
Tensor key_masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& m,
                            const Tensor& r = Tensor());

// Ablation variants: mask Q or V by (1-m) instead of K.
Tensor ablation_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& m,
                          MaskMode mode);

// Downsample a latent-resolution mask to each attention token grid
// (maxpool, then row-major flatten).
std::map<int, Tensor> prepare_token_masks(const MaskGrid& m, const std::vector<int>& resolutions);

// Per-token L2 norm of an n x d feature block, reshaped to h x w.
Tensor attention_heatmap(const Tensor& block_output, int h, int w);

// Identity of a single attention call inside a denoiser forward pass.
struct AttentionCall {
    int block_index = 0;
    int resolution = 0;
    int timestep = 0;
};

// Pluggable processor invoked by every self-attention block.
class AttentionProcessor {
public:
    virtual ~AttentionProcessor() = default;
    virtual Tensor run(const Tensor& q, const Tensor& k, const Tensor& v,
                       const AttentionCall& call) = 0;
};

class PlainAttentionProcessor : public AttentionProcessor {
public:
    Tensor run(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionCall& call) override;
};

// Applies the configured mask mode whenever masking_active() says so;
// otherwise falls through to plain attention.
class MaskedAttentionProcessor : public AttentionProcessor {
public:
    explicit MaskedAttentionProcessor(AttentionMaskSet set) : set_(std::move(set)) {}

    Tensor run(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionCall& call) override;

    const AttentionMaskSet& mask_set() const { return set_; }
    AttentionMaskSet& mask_set() { return set_; }

    // When set, receives (heatmap h x w, call) after every block.
    std::function<void(const Tensor&, const AttentionCall&)> heatmap_sink;

private:
    AttentionMaskSet set_;
};

// Handle passed into the denoiser per forward call.
struct AttentionContext {
    AttentionProcessor* processor = nullptr;
    int timestep = 0;
};

}  // namespace layerlat
