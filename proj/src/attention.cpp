#include "layerlat/attention.hpp"

#include <algorithm>
#include <cmath>

#include "layerlat/errors.hpp"

namespace layerlat {

MaskMode mask_mode_from_string(const std::string& s) {
    if (s == "none") return MaskMode::None;
    if (s == "key") return MaskMode::Key;
    if (s == "query") return MaskMode::Query;
    if (s == "value") return MaskMode::Value;
    throw ValidationError("unknown mask mode: " + s);
}

std::string mask_mode_to_string(MaskMode m) {
    switch (m) {
        case MaskMode::None: return "none";
        case MaskMode::Key: return "key";
        case MaskMode::Query: return "query";
        case MaskMode::Value: return "value";
    }
    return "none";
}

const Tensor* AttentionMaskSet::remove_for(int resolution) const {
    auto it = remove.find(resolution);
    return it == remove.end() ? nullptr : &it->second;
}

const Tensor* AttentionMaskSet::refine_for(int resolution) const {
    auto it = refine.find(resolution);
    return it == refine.end() ? nullptr : &it->second;
}

bool masking_active(int t, int block, const AttentionMaskSet& set) {
    if (set.mode == MaskMode::None) return false;
    if (t > set.step_hi || t < set.step_lo) return false;
    return block >= set.block_lo && block <= set.block_hi;
}

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || !q.same_shape(k) || !q.same_shape(v)) {
        throw DimensionError("attention expects matching n x d Q/K/V, got " + q.shape_str() +
                             ", " + k.shape_str() + ", " + v.shape_str());
    }
}

void check_mask(const Tensor& m, int n, const char* name) {
    if (m.empty()) return;
    if (!(m.rank() == 1 && m.dim(0) == n)) {
        throw DimensionError(std::string(name) + " mask length " + m.shape_str() +
                             " does not match token count " + std::to_string(n));
    }
}

// Softmax(Q K^T / sqrt(d)) V — shared by the plain and masked paths so the
// zero-mask case is bitwise identical to plain attention.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v) {
    const int d = q.dim(1);
    Tensor logits = matmul(q, permute(k, {1, 0}));
    logits = scale(logits, 1.0f / std::sqrt(static_cast<float>(d)));
    return matmul(softmax_lastdim(logits), v);
}

// Rows of x scaled by (1 - m - r); m + r is clamped to 1 first so overlapping
// masks still yield a binary keep factor.
Tensor mask_rows(const Tensor& x, const Tensor& m, const Tensor& r) {
    Tensor out = x;
    const int n = x.dim(0), d = x.dim(1);
    for (int i = 0; i < n; ++i) {
        float masked = m[static_cast<size_t>(i)];
        if (!r.empty()) masked = std::min(1.0f, masked + r[static_cast<size_t>(i)]);
        float keep = 1.0f - masked;
        for (int j = 0; j < d; ++j) out.at(i, j) *= keep;
    }
    return out;
}

}  // namespace

Tensor key_masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& m,
                            const Tensor& r) {
    check_qkv(q, k, v);
    check_mask(m, q.dim(0), "remove");
    check_mask(r, q.dim(0), "refine");
    if (m.empty() && r.empty()) return attention_core(q, k, v);
    Tensor masked_k = mask_rows(k, m.empty() ? Tensor({q.dim(0)}, 0.0f) : m, r);
    return attention_core(q, masked_k, v);
}

Tensor ablation_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& m,
                          MaskMode mode) {
    check_qkv(q, k, v);
    check_mask(m, q.dim(0), "remove");
    if (m.empty()) return attention_core(q, k, v);
    switch (mode) {
        case MaskMode::Query: return attention_core(mask_rows(q, m, Tensor()), k, v);
        case MaskMode::Value: return attention_core(q, k, mask_rows(v, m, Tensor()));
        case MaskMode::Key: return key_masked_attention(q, k, v, m);
        case MaskMode::None: return attention_core(q, k, v);
    }
    throw ParameterError("invalid ablation mode");
}

std::map<int, Tensor> prepare_token_masks(const MaskGrid& m, const std::vector<int>& resolutions) {
    std::map<int, Tensor> out;
    Tensor mt = m.to_tensor();
    for (int res : resolutions) {
        if (res < 1 || res > m.height || res > m.width) {
            throw DimensionError("attention resolution " + std::to_string(res) +
                                 " incompatible with mask " + std::to_string(m.height) + "x" +
                                 std::to_string(m.width));
        }
        Tensor down = (res == m.height && res == m.width) ? mt : maxpool_downsample(mt, res, res);
        out[res] = reshape(down, {res * res});
    }
    return out;
}

Tensor attention_heatmap(const Tensor& block_output, int h, int w) {
    if (block_output.rank() != 2 || block_output.dim(0) != h * w) {
        throw DimensionError("heatmap token count " + block_output.shape_str() +
                             " does not match grid " + std::to_string(h) + "x" +
                             std::to_string(w));
    }
    const int d = block_output.dim(1);
    Tensor map({h, w});
    for (int i = 0; i < h * w; ++i) {
        float acc = 0.0f;
        for (int j = 0; j < d; ++j) {
            float x = block_output.at(i, j);
            acc += x * x;
        }
        map.data()[i] = std::sqrt(acc);
    }
    return map;
}

Tensor PlainAttentionProcessor::run(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const AttentionCall&) {
    check_qkv(q, k, v);
    return attention_core(q, k, v);
}

Tensor MaskedAttentionProcessor::run(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionCall& call) {
    check_qkv(q, k, v);
    Tensor out;
    const Tensor* m = set_.remove_for(call.resolution);
    if (!masking_active(call.timestep, call.block_index, set_) || m == nullptr) {
        out = attention_core(q, k, v);
    } else if (set_.mode == MaskMode::Key) {
        const Tensor* r = set_.refine_for(call.resolution);
        out = key_masked_attention(q, k, v, *m, r ? *r : Tensor());
    } else {
        out = ablation_attention(q, k, v, *m, set_.mode);
    }
    if (heatmap_sink) {
        heatmap_sink(attention_heatmap(out, call.resolution, call.resolution), call);
    }
    return out;
}

}  // namespace layerlat
