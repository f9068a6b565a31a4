#include "layerlat/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "layerlat/autograd.hpp"
#include "layerlat/codec.hpp"
#include "layerlat/errors.hpp"
#include "layerlat/scenes.hpp"

namespace layerlat {

void DenoiserConfig::validate() const {
    if (in_channels < 1 || latent_size < 1 || base_channels < 1 || num_res_blocks < 1 ||
        time_embed_dim < 2 || norm_groups < 1) {
        throw ParameterError("denoiser config has non-positive field");
    }
    if (channel_multipliers.empty()) throw ParameterError("need at least one channel multiplier");
    if (attention_resolutions.empty()) throw ParameterError("need at least one attention resolution");
    for (size_t s = 0; s < channel_multipliers.size(); ++s) {
        int res = latent_size >> s;
        if (res < 1 || (latent_size % (1 << s)) != 0) {
            throw ParameterError("stage " + std::to_string(s) + " resolution does not divide latent size");
        }
        if (stage_channels(static_cast<int>(s)) % norm_groups != 0) {
            throw ParameterError("stage channels must be divisible by norm groups");
        }
    }
    for (int r : attention_resolutions) {
        bool found = false;
        for (size_t s = 0; s < channel_multipliers.size(); ++s) {
            if (stage_resolution(static_cast<int>(s)) == r) found = true;
        }
        if (!found) {
            throw ParameterError("attention resolution " + std::to_string(r) +
                                 " matches no stage resolution");
        }
    }
}

int DenoiserConfig::stage_resolution(int stage) const { return latent_size >> stage; }

int DenoiserConfig::stage_channels(int stage) const {
    return base_channels * channel_multipliers[static_cast<size_t>(stage)];
}

bool DenoiserConfig::attention_at(int resolution) const {
    for (int r : attention_resolutions) {
        if (r == resolution) return true;
    }
    return false;
}

void DenoiserParams::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ParameterError("duplicate parameter name " + name);
    order_.push_back(name);
    index_.emplace(name, std::move(t));
}

Tensor& DenoiserParams::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ParameterError("unknown parameter " + name);
    return it->second;
}

const Tensor& DenoiserParams::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ParameterError("unknown parameter " + name);
    return it->second;
}

size_t DenoiserParams::parameter_count() const {
    size_t n = 0;
    for (const auto& [k, v] : index_) n += v.size();
    return n;
}

bool DenoiserParams::operator==(const DenoiserParams& o) const {
    if (order_ != o.order_) return false;
    for (const auto& name : order_) {
        const Tensor& a = at(name);
        const Tensor& b = o.at(name);
        if (a.shape() != b.shape() || a.vec() != b.vec()) return false;
    }
    return true;
}

namespace {

// splitmix64-fed Box-Muller; hand-rolled so parameter init is bitwise
// reproducible across standard libraries.
struct GaussRng {
    uint64_t state;
    bool has_spare = false;
    double spare = 0.0;

    explicit GaussRng(uint64_t seed) : state(seed) {}

    double uniform() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    double gauss() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    enum Kind { ConvW, LinW, Bias, Gamma } kind;
    float gain = 1.0f;
};

void push_norm(std::vector<ParamSpec>& v, const std::string& p, int c) {
    v.push_back({p + ".gamma", {c}, ParamSpec::Gamma, 1.0f});
    v.push_back({p + ".beta", {c}, ParamSpec::Bias, 1.0f});
}

void push_conv(std::vector<ParamSpec>& v, const std::string& p, int ci, int co, int k,
               float gain = 1.0f) {
    v.push_back({p + ".w", {co, ci, k, k}, ParamSpec::ConvW, gain});
    v.push_back({p + ".b", {co}, ParamSpec::Bias, 1.0f});
}

void push_linear(std::vector<ParamSpec>& v, const std::string& p, int in, int out,
                 float gain = 1.0f) {
    v.push_back({p + ".w", {in, out}, ParamSpec::LinW, gain});
    v.push_back({p + ".b", {out}, ParamSpec::Bias, 1.0f});
}

void push_resblock(std::vector<ParamSpec>& v, const std::string& p, int c, int te) {
    push_norm(v, p + ".n1", c);
    push_conv(v, p + ".c1", c, c, 3);
    push_linear(v, p + ".emb", te, c);
    push_norm(v, p + ".n2", c);
    push_conv(v, p + ".c2", c, c, 3, 0.2f);
}

void push_attnblock(std::vector<ParamSpec>& v, const std::string& p, int c) {
    push_norm(v, p + ".norm", c);
    push_linear(v, p + ".q", c, c);
    push_linear(v, p + ".k", c, c);
    push_linear(v, p + ".v", c, c);
    push_linear(v, p + ".o", c, c, 0.2f);
}

std::vector<ParamSpec> architecture(const DenoiserConfig& cfg) {
    cfg.validate();
    std::vector<ParamSpec> v;
    const int S = static_cast<int>(cfg.channel_multipliers.size());
    const int te = cfg.time_embed_dim;
    push_linear(v, "time.fc1", te, te);
    push_linear(v, "time.fc2", te, te);
    push_conv(v, "conv_in", cfg.in_channels, cfg.stage_channels(0), 3);
    for (int s = 0; s < S; ++s) {
        int c = cfg.stage_channels(s);
        bool attn = cfg.attention_at(cfg.stage_resolution(s));
        for (int r = 0; r < cfg.num_res_blocks; ++r) {
            push_resblock(v, "down" + std::to_string(s) + ".res" + std::to_string(r), c, te);
            if (attn) push_attnblock(v, "down" + std::to_string(s) + ".attn" + std::to_string(r), c);
        }
        if (s + 1 < S) {
            push_conv(v, "down" + std::to_string(s) + ".down", c, cfg.stage_channels(s + 1), 3);
        }
    }
    int cb = cfg.stage_channels(S - 1);
    push_resblock(v, "mid.res0", cb, te);
    if (cfg.attention_at(cfg.stage_resolution(S - 1))) push_attnblock(v, "mid.attn", cb);
    push_resblock(v, "mid.res1", cb, te);
    for (int s = S - 1; s >= 0; --s) {
        int c = cfg.stage_channels(s);
        bool attn = cfg.attention_at(cfg.stage_resolution(s));
        for (int r = 0; r < cfg.num_res_blocks; ++r) {
            push_resblock(v, "up" + std::to_string(s) + ".res" + std::to_string(r), c, te);
            if (attn) push_attnblock(v, "up" + std::to_string(s) + ".attn" + std::to_string(r), c);
        }
        if (s > 0) {
            push_conv(v, "up" + std::to_string(s) + ".upconv", c, cfg.stage_channels(s - 1), 3);
        }
    }
    push_norm(v, "out.norm", cfg.stage_channels(0));
    push_conv(v, "out.conv", cfg.stage_channels(0), cfg.in_channels, 3, 0.2f);
    return v;
}

}  // namespace

DenoiserParams Denoiser::init_params(const DenoiserConfig& cfg) {
    auto specs = architecture(cfg);
    GaussRng rng(cfg.seed * 0x2545f4914f6cdd1dull + 0x853c49e6748fea9bull);
    DenoiserParams params;
    for (const auto& spec : specs) {
        Tensor t(spec.shape);
        switch (spec.kind) {
            case ParamSpec::ConvW: {
                int fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3];
                float sd = spec.gain / std::sqrt(static_cast<float>(fan_in));
                for (size_t i = 0; i < t.size(); ++i) {
                    t.data()[i] = static_cast<float>(rng.gauss()) * sd;
                }
                break;
            }
            case ParamSpec::LinW: {
                float sd = spec.gain / std::sqrt(static_cast<float>(spec.shape[0]));
                for (size_t i = 0; i < t.size(); ++i) {
                    t.data()[i] = static_cast<float>(rng.gauss()) * sd;
                }
                break;
            }
            case ParamSpec::Bias:
                break;  // zeros
            case ParamSpec::Gamma:
                for (size_t i = 0; i < t.size(); ++i) t.data()[i] = 1.0f;
                break;
        }
        params.add(spec.name, std::move(t));
    }
    return params;
}

size_t Denoiser::expected_parameter_count(const DenoiserConfig& cfg) {
    cfg.validate();
    auto conv = [](int ci, int co, int k) { return static_cast<size_t>(co) * ci * k * k + co; };
    auto lin = [](int in, int out) { return static_cast<size_t>(in) * out + out; };
    auto norm = [](int c) { return static_cast<size_t>(2) * c; };
    auto resblock = [&](int c, int te) {
        return 2 * norm(c) + 2 * conv(c, c, 3) + lin(te, c);
    };
    auto attnblock = [&](int c) { return norm(c) + 4 * lin(c, c); };
    const int S = static_cast<int>(cfg.channel_multipliers.size());
    const int te = cfg.time_embed_dim;
    size_t n = 2 * lin(te, te) + conv(cfg.in_channels, cfg.stage_channels(0), 3);
    for (int s = 0; s < S; ++s) {
        int c = cfg.stage_channels(s);
        bool attn = cfg.attention_at(cfg.stage_resolution(s));
        // down and up stages are symmetric
        n += 2 * static_cast<size_t>(cfg.num_res_blocks) * (resblock(c, te) + (attn ? attnblock(c) : 0));
        if (s + 1 < S) n += conv(c, cfg.stage_channels(s + 1), 3);
        if (s > 0) n += conv(c, cfg.stage_channels(s - 1), 3);
    }
    int cb = cfg.stage_channels(S - 1);
    n += 2 * resblock(cb, te);
    if (cfg.attention_at(cfg.stage_resolution(S - 1))) n += attnblock(cb);
    n += norm(cfg.stage_channels(0)) + conv(cfg.stage_channels(0), cfg.in_channels, 3);
    return n;
}

Denoiser::Denoiser(DenoiserConfig cfg, DenoiserParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)), native_(make_schedule(50)) {
    cfg_.validate();
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)), native_(make_schedule(50)) {
    cfg_.validate();
    params_ = init_params(cfg_);
}

int Denoiser::attention_block_count() const {
    const int S = static_cast<int>(cfg_.channel_multipliers.size());
    int n = 0;
    for (int s = 0; s < S; ++s) {
        if (cfg_.attention_at(cfg_.stage_resolution(s))) n += 2 * cfg_.num_res_blocks;
    }
    if (cfg_.attention_at(cfg_.stage_resolution(S - 1))) n += 1;
    return n;
}

// Builds the whole forward pass on a tape. Shared by inference (no grads)
// and training (param leaves require grad).
struct DenoiserForward {
    ag::Tape& tape;
    const DenoiserConfig& cfg;
    std::map<std::string, ag::NodePtr>& leaves;
    const AttentionContext* ctx;
    int timestep;
    int block_counter = 0;

    ag::NodePtr p(const std::string& name) { return leaves.at(name); }

    ag::NodePtr time_embedding(int t) {
        const int dim = cfg.time_embed_dim;
        const int half = dim / 2;
        Tensor e({1, dim});
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
            e.at(0, i) = static_cast<float>(std::sin(t * freq));
            e.at(0, half + i) = static_cast<float>(std::cos(t * freq));
        }
        auto emb = tape.leaf(std::move(e));
        emb = tape.linear(emb, p("time.fc1.w"), p("time.fc1.b"));
        emb = tape.silu(emb);
        emb = tape.linear(emb, p("time.fc2.w"), p("time.fc2.b"));
        return emb;
    }

    ag::NodePtr resblock(ag::NodePtr x, const std::string& pre, int c, ag::NodePtr emb) {
        auto h = tape.group_norm(x, p(pre + ".n1.gamma"), p(pre + ".n1.beta"), cfg.norm_groups);
        h = tape.silu(h);
        h = tape.conv2d(h, p(pre + ".c1.w"), p(pre + ".c1.b"), 1, 1);
        auto et = tape.linear(emb, p(pre + ".emb.w"), p(pre + ".emb.b"));
        et = tape.reshape(et, {c});
        h = tape.add_channel_bias(h, et);
        h = tape.group_norm(h, p(pre + ".n2.gamma"), p(pre + ".n2.beta"), cfg.norm_groups);
        h = tape.silu(h);
        h = tape.conv2d(h, p(pre + ".c2.w"), p(pre + ".c2.b"), 1, 1);
        return tape.add(x, h);
    }

    ag::NodePtr attnblock(ag::NodePtr x, const std::string& pre, int c, int res) {
        auto nrm = tape.group_norm(x, p(pre + ".norm.gamma"), p(pre + ".norm.beta"), cfg.norm_groups);
        auto tokens = tape.transpose2d(tape.reshape(nrm, {c, res * res}));
        auto q = tape.linear(tokens, p(pre + ".q.w"), p(pre + ".q.b"));
        auto k = tape.linear(tokens, p(pre + ".k.w"), p(pre + ".k.b"));
        auto v = tape.linear(tokens, p(pre + ".v.w"), p(pre + ".v.b"));
        ag::NodePtr att;
        if (ctx != nullptr && ctx->processor != nullptr) {
            AttentionCall call{block_counter, res, timestep};
            att = tape.leaf(ctx->processor->run(q->value, k->value, v->value, call));
        } else {
            auto logits = tape.matmul(q, tape.transpose2d(k));
            logits = tape.scale(logits, 1.0f / std::sqrt(static_cast<float>(c)));
            att = tape.matmul(tape.softmax_lastdim(logits), v);
        }
        ++block_counter;
        auto o = tape.linear(att, p(pre + ".o.w"), p(pre + ".o.b"));
        auto spatial = tape.reshape(tape.transpose2d(o), {c, res, res});
        return tape.add(x, spatial);
    }

    ag::NodePtr run(ag::NodePtr z, int t) {
        timestep = t;
        const int S = static_cast<int>(cfg.channel_multipliers.size());
        auto emb = time_embedding(t);
        auto h = tape.conv2d(z, p("conv_in.w"), p("conv_in.b"), 1, 1);
        std::vector<ag::NodePtr> skips(static_cast<size_t>(S));
        for (int s = 0; s < S; ++s) {
            int c = cfg.stage_channels(s);
            int res = cfg.stage_resolution(s);
            bool attn = cfg.attention_at(res);
            for (int r = 0; r < cfg.num_res_blocks; ++r) {
                std::string base = "down" + std::to_string(s);
                h = resblock(h, base + ".res" + std::to_string(r), c, emb);
                if (attn) h = attnblock(h, base + ".attn" + std::to_string(r), c, res);
            }
            skips[static_cast<size_t>(s)] = h;
            if (s + 1 < S) {
                h = tape.conv2d(h, p("down" + std::to_string(s) + ".down.w"),
                                p("down" + std::to_string(s) + ".down.b"), 2, 1);
            }
        }
        h = resblock(h, "mid.res0", cfg.stage_channels(S - 1), emb);
        if (cfg.attention_at(cfg.stage_resolution(S - 1))) {
            h = attnblock(h, "mid.attn", cfg.stage_channels(S - 1), cfg.stage_resolution(S - 1));
        }
        h = resblock(h, "mid.res1", cfg.stage_channels(S - 1), emb);
        for (int s = S - 1; s >= 0; --s) {
            int c = cfg.stage_channels(s);
            int res = cfg.stage_resolution(s);
            bool attn = cfg.attention_at(res);
            h = tape.add(h, skips[static_cast<size_t>(s)]);
            for (int r = 0; r < cfg.num_res_blocks; ++r) {
                std::string base = "up" + std::to_string(s);
                h = resblock(h, base + ".res" + std::to_string(r), c, emb);
                if (attn) h = attnblock(h, base + ".attn" + std::to_string(r), c, res);
            }
            if (s > 0) {
                h = tape.nearest_upsample2x(h);
                h = tape.conv2d(h, p("up" + std::to_string(s) + ".upconv.w"),
                                p("up" + std::to_string(s) + ".upconv.b"), 1, 1);
            }
        }
        h = tape.group_norm(h, p("out.norm.gamma"), p("out.norm.beta"), cfg.norm_groups);
        h = tape.silu(h);
        h = tape.conv2d(h, p("out.conv.w"), p("out.conv.b"), 1, 1);
        return h;
    }
};

namespace {

std::map<std::string, ag::NodePtr> make_leaves(ag::Tape& tape, const DenoiserParams& params,
                                               bool requires_grad) {
    std::map<std::string, ag::NodePtr> leaves;
    for (const auto& name : params.names()) {
        leaves.emplace(name, tape.leaf(params.at(name), requires_grad));
    }
    return leaves;
}

}  // namespace

Tensor Denoiser::predict_x0(const Tensor& z, int t, const AttentionContext* ctx) const {
    if (z.rank() != 3 || z.dim(0) != cfg_.in_channels || z.dim(1) != cfg_.latent_size ||
        z.dim(2) != cfg_.latent_size) {
        throw DimensionError("latent " + z.shape_str() + " does not match denoiser config");
    }
    ag::Tape tape;
    auto leaves = make_leaves(tape, params_, false);
    DenoiserForward fwd{tape, cfg_, leaves, ctx, t};
    auto out = fwd.run(tape.leaf(z), t);
    if (!all_finite(out->value)) {
        throw NumericError("denoiser produced non-finite output at t=" + std::to_string(t));
    }
    return out->value;
}

Tensor Denoiser::epsilon(const Tensor& z, int t, const AttentionContext* ctx) const {
    Tensor x0 = predict_x0(z, t, ctx);
    const int tt = std::clamp(t, 1, native_.T);
    const float ab = native_.alpha_bar[static_cast<size_t>(tt)];
    const float sa = std::sqrt(ab), sb = std::sqrt(1.0f - ab);
    Tensor out(z.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = (z.data()[i] - sa * x0.data()[i]) / sb;
    }
    return out;
}

TrainResult train_toy(Denoiser& model, const TrainConfig& tc, const NoiseSchedule& schedule) {
    if (tc.steps < 0) throw ParameterError("train steps must be >= 0");
    const DenoiserConfig& cfg = model.config();
    TrainResult result;
    if (tc.steps == 0) return result;

    GaussRng rng(tc.data_seed * 0xda942042e4dd58b5ull + 0x9e3779b97f4a7c15ull);
    SceneConfig sc{tc.image_size, tc.data_seed};
    std::map<std::string, Tensor> moment1, moment2;

    for (int step = 0; step < tc.steps; ++step) {
        ag::Tape tape;
        auto leaves = make_leaves(tape, model.params(), true);
        ag::NodePtr total;
        for (int b = 0; b < tc.batch; ++b) {
            Scene scene = make_scene(sc, static_cast<uint64_t>(step) * tc.batch + b);
            Tensor z0 = encode(scene.image, tc.codec_factor);
            if (z0.dim(0) != cfg.in_channels || z0.dim(1) != cfg.latent_size) {
                throw DimensionError("training scene latent " + z0.shape_str() +
                                     " does not match denoiser config");
            }
            int t = 1 + static_cast<int>(rng.uniform() * schedule.T);
            t = std::min(t, schedule.T);
            float ab = schedule.alpha_bar[static_cast<size_t>(t)];
            float sa = std::sqrt(ab), sb = std::sqrt(1.0f - ab);
            Tensor zt(z0.shape());
            for (size_t i = 0; i < zt.size(); ++i) {
                zt.data()[i] = sa * z0.data()[i] + sb * static_cast<float>(rng.gauss());
            }
            DenoiserForward fwd{tape, cfg, leaves, nullptr, t};
            auto pred = fwd.run(tape.leaf(std::move(zt)), t);
            auto loss = tape.mse_loss(pred, tape.leaf(std::move(z0)));
            total = total ? tape.add(total, loss) : loss;
        }
        total = tape.scale(total, 1.0f / static_cast<float>(tc.batch));
        float loss_value = total->value[0];
        if (!std::isfinite(loss_value)) {
            throw TrainingError("training loss non-finite at step " + std::to_string(step));
        }
        result.loss_trace.push_back(loss_value);
        tape.backward(total);
        // Adam with bias correction.
        const float bc1 = 1.0f - std::pow(tc.beta1, static_cast<float>(step + 1));
        const float bc2 = 1.0f - std::pow(tc.beta2, static_cast<float>(step + 1));
        for (const auto& name : model.params().names()) {
            auto& leaf = leaves.at(name);
            if (leaf->grad.empty()) continue;
            Tensor& param = model.params().at(name);
            Tensor& m1 = moment1.try_emplace(name, Tensor(param.shape())).first->second;
            Tensor& m2 = moment2.try_emplace(name, Tensor(param.shape())).first->second;
            for (size_t i = 0; i < param.size(); ++i) {
                const float g = leaf->grad.data()[i];
                m1.data()[i] = tc.beta1 * m1.data()[i] + (1.0f - tc.beta1) * g;
                m2.data()[i] = tc.beta2 * m2.data()[i] + (1.0f - tc.beta2) * g * g;
                const float mhat = m1.data()[i] / bc1;
                const float vhat = m2.data()[i] / bc2;
                param.data()[i] -= tc.learning_rate * mhat /
                                   (std::sqrt(vhat) + tc.adam_eps);
            }
        }
    }
    return result;
}

namespace {

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::ifstream& f, const std::string& path) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw FormatError(path + ": truncated LPAR file");
    return v;
}

uint64_t read_u64(std::ifstream& f, const std::string& path) {
    uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    if (!f) throw FormatError(path + ": truncated LPAR file");
    return v;
}

}  // namespace

void save_params(const DenoiserConfig& cfg, const DenoiserParams& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write("LPAR", 4);
    write_u32(f, 1);
    write_u32(f, static_cast<uint32_t>(cfg.in_channels));
    write_u32(f, static_cast<uint32_t>(cfg.latent_size));
    write_u32(f, static_cast<uint32_t>(cfg.base_channels));
    write_u32(f, static_cast<uint32_t>(cfg.num_res_blocks));
    write_u32(f, static_cast<uint32_t>(cfg.time_embed_dim));
    write_u32(f, static_cast<uint32_t>(cfg.norm_groups));
    write_u32(f, static_cast<uint32_t>(cfg.channel_multipliers.size()));
    for (int m : cfg.channel_multipliers) write_u32(f, static_cast<uint32_t>(m));
    write_u32(f, static_cast<uint32_t>(cfg.attention_resolutions.size()));
    for (int r : cfg.attention_resolutions) write_u32(f, static_cast<uint32_t>(r));
    write_u64(f, cfg.seed);
    write_u32(f, static_cast<uint32_t>(params.names().size()));
    for (const auto& name : params.names()) {
        const Tensor& t = params.at(name);
        write_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(f, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_u32(f, static_cast<uint32_t>(t.dim(i)));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!f) throw IoError("short write to " + path);
}

std::pair<DenoiserConfig, DenoiserParams> load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "LPAR", 4) != 0) {
        throw FormatError(path + ": bad LPAR magic at byte offset 0");
    }
    if (read_u32(f, path) != 1) throw FormatError(path + ": unsupported LPAR version");
    DenoiserConfig cfg;
    cfg.in_channels = static_cast<int>(read_u32(f, path));
    cfg.latent_size = static_cast<int>(read_u32(f, path));
    cfg.base_channels = static_cast<int>(read_u32(f, path));
    cfg.num_res_blocks = static_cast<int>(read_u32(f, path));
    cfg.time_embed_dim = static_cast<int>(read_u32(f, path));
    cfg.norm_groups = static_cast<int>(read_u32(f, path));
    cfg.channel_multipliers.resize(read_u32(f, path));
    for (auto& m : cfg.channel_multipliers) m = static_cast<int>(read_u32(f, path));
    cfg.attention_resolutions.resize(read_u32(f, path));
    for (auto& r : cfg.attention_resolutions) r = static_cast<int>(read_u32(f, path));
    cfg.seed = read_u64(f, path);
    cfg.validate();
    uint32_t count = read_u32(f, path);
    DenoiserParams params;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = read_u32(f, path);
        if (len > 512) throw FormatError(path + ": implausible parameter name length");
        std::string name(len, '\0');
        f.read(name.data(), len);
        uint32_t nd = read_u32(f, path);
        if (nd > 8) throw FormatError(path + ": implausible tensor rank");
        std::vector<int> shape(nd);
        for (auto& d : shape) d = static_cast<int>(read_u32(f, path));
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!f) throw FormatError(path + ": truncated LPAR tensor payload");
        params.add(name, std::move(t));
    }
    return {cfg, params};
}

}  // namespace layerlat
