#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "layerlat/attention.hpp"
#include "layerlat/model.hpp"
#include "layerlat/schedule.hpp"
#include "layerlat/tensor.hpp"

namespace layerlat {

// Small unconditional epsilon-prediction U-Net. Stage s runs at resolution
// latent_size / 2^s with base_channels * channel_multipliers[s] channels;
// every self-attention block routes Q/K/V through the caller's processor.
struct DenoiserConfig {
    int in_channels = 48;
    int latent_size = 16;
    int base_channels = 32;
    std::vector<int> channel_multipliers{1, 2};
    std::vector<int> attention_resolutions{16, 8};
    int num_res_blocks = 2;
    int time_embed_dim = 64;
    int norm_groups = 8;
    uint64_t seed = 1234;

    void validate() const;
    int stage_resolution(int stage) const;
    int stage_channels(int stage) const;
    bool attention_at(int resolution) const;
};

// Named parameter tensors in fixed creation order.
class DenoiserParams {
public:
    void add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const std::vector<std::string>& names() const { return order_; }
    size_t parameter_count() const;
    bool operator==(const DenoiserParams& o) const;

private:
    std::vector<std::string> order_;
    std::map<std::string, Tensor> index_;
};

// Checkpoint: magic "LPAR", version, config echo, then named tensors.
void save_params(const DenoiserConfig& cfg, const DenoiserParams& params, const std::string& path);
std::pair<DenoiserConfig, DenoiserParams> load_params(const std::string& path);

// The network itself predicts the clean latent (x0); epsilon() derives the
// noise estimate from it through the model's native schedule (cosine, T=50).
// The x0 parameterization conditions training far better at this scale than
// predicting the noise directly.
class Denoiser : public EpsilonModel {
public:
    Denoiser(DenoiserConfig cfg, DenoiserParams params);
    explicit Denoiser(DenoiserConfig cfg);  // seeded init

    static DenoiserParams init_params(const DenoiserConfig& cfg);

    // Closed-form parameter count for a config, independent of init_params.
    static size_t expected_parameter_count(const DenoiserConfig& cfg);

    // Noise estimate (z - sqrt(a_t) * x0_hat) / sqrt(1 - a_t); t is clamped
    // into [1, 50], the native schedule's range.
    Tensor epsilon(const Tensor& z, int t, const AttentionContext* ctx) const override;

    // Raw network output: the clean-latent prediction.
    Tensor predict_x0(const Tensor& z, int t, const AttentionContext* ctx) const;
    Tensor predict_epsilon(const Tensor& z, int t, const AttentionContext* ctx) const {
        return epsilon(z, t, ctx);
    }

    int attention_block_count() const;

    const DenoiserConfig& config() const { return cfg_; }
    const DenoiserParams& params() const { return params_; }
    DenoiserParams& params() { return params_; }

private:
    friend struct DenoiserForward;
    DenoiserConfig cfg_;
    DenoiserParams params_;
    NoiseSchedule native_;
};

struct TrainConfig {
    int steps = 2000;
    float learning_rate = 2e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int batch = 4;
    int image_size = 64;
    int codec_factor = 4;
    uint64_t data_seed = 7;
    int log_every = 100;
};

struct TrainResult {
    std::vector<float> loss_trace;  // one entry per step
};

// Clean-latent (x0) MSE training on procedural shape scenes with Adam.
// Throws TrainingError (with the step index) if the loss goes non-finite.
TrainResult train_toy(Denoiser& model, const TrainConfig& tc, const NoiseSchedule& schedule);

}  // namespace layerlat
