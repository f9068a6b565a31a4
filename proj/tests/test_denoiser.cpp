#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "layerlat/attention.hpp"
#include "layerlat/autograd.hpp"
#include "layerlat/denoiser.hpp"
#include "layerlat/errors.hpp"
#include "layerlat/schedule.hpp"
#include "oracles.hpp"

using namespace layerlat;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig cfg;
    cfg.in_channels = 4;
    cfg.latent_size = 4;
    cfg.base_channels = 8;
    cfg.channel_multipliers = {1};
    cfg.attention_resolutions = {4};
    cfg.num_res_blocks = 1;
    cfg.time_embed_dim = 8;
    cfg.norm_groups = 2;
    cfg.seed = 42;
    return cfg;
}

struct SpyProcessor : AttentionProcessor {
    int calls = 0;
    std::vector<int> resolutions;
    Tensor run(const Tensor& q, const Tensor& k, const Tensor& v,
               const AttentionCall& call) override {
        ++calls;
        resolutions.push_back(call.resolution);
        PlainAttentionProcessor plain;
        return plain.run(q, k, v, call);
    }
};

}  // namespace

TEST_CASE("init is deterministic per seed and sensitive to it") {
    DenoiserConfig cfg;
    DenoiserParams a = Denoiser::init_params(cfg);
    DenoiserParams b = Denoiser::init_params(cfg);
    CHECK(a == b);
    cfg.seed = cfg.seed + 1;
    DenoiserParams c = Denoiser::init_params(cfg);
    CHECK_FALSE(a == c);
}

TEST_CASE("parameter count matches the closed form") {
    for (auto cfg : {DenoiserConfig{}, tiny_config()}) {
        DenoiserParams p = Denoiser::init_params(cfg);
        CHECK(p.parameter_count() == Denoiser::expected_parameter_count(cfg));
    }
}

TEST_CASE("epsilon output shape matches input and inputs are validated") {
    DenoiserConfig cfg;
    Denoiser model(cfg);
    oracle::Rng rng(300);
    Tensor z = oracle::random_tensor(rng, {48, 16, 16});
    Tensor eps = model.epsilon(z, 25, nullptr);
    CHECK(eps.shape() == z.shape());
    CHECK(all_finite(eps));
    CHECK_THROWS_AS(model.epsilon(Tensor({48, 8, 8}), 25, nullptr), DimensionError);
}

TEST_CASE("the initialized network is input-sensitive") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model(cfg);
    oracle::Rng rng(301);
    Tensor z = oracle::random_tensor(rng, {4, 4, 4});
    Tensor base = model.epsilon(z, 3, nullptr);
    z.at(0, 1, 2) += 0.25f;
    Tensor bumped = model.epsilon(z, 3, nullptr);
    CHECK_FALSE(oracle::bitwise_equal(base, bumped));
}

TEST_CASE("spy processor sees exactly attention_block_count calls per forward") {
    DenoiserConfig cfg;
    Denoiser model(cfg);
    SpyProcessor spy;
    AttentionContext ctx{&spy, 25};
    oracle::Rng rng(302);
    Tensor z = oracle::random_tensor(rng, {48, 16, 16});
    model.epsilon(z, 25, &ctx);
    CHECK(spy.calls == model.attention_block_count());
    for (int r : spy.resolutions) CHECK((r == 16 || r == 8));
}

TEST_CASE("all-zero token masks are bitwise equal to the plain path end-to-end") {
    DenoiserConfig cfg;
    Denoiser model(cfg);
    oracle::Rng rng(303);
    Tensor z = oracle::random_tensor(rng, {48, 16, 16});

    AttentionMaskSet set;
    set.mode = MaskMode::Key;
    set.remove = prepare_token_masks(MaskGrid(16, 16), cfg.attention_resolutions);
    MaskedAttentionProcessor masked(set);
    AttentionContext mctx{&masked, 25};

    PlainAttentionProcessor plain;
    AttentionContext pctx{&plain, 25};

    Tensor with_zero_mask = model.epsilon(z, 25, &mctx);
    Tensor with_plain = model.epsilon(z, 25, &pctx);
    Tensor with_null = model.epsilon(z, 25, nullptr);
    CHECK(oracle::bitwise_equal(with_zero_mask, with_plain));
    CHECK(oracle::bitwise_equal(with_plain, with_null));

    // a real mask changes the output
    MaskGrid live(16, 16);
    for (int y = 4; y < 10; ++y)
        for (int x = 4; x < 10; ++x) live.at(y, x) = 1;
    set.remove = prepare_token_masks(live, cfg.attention_resolutions);
    MaskedAttentionProcessor masked2(set);
    AttentionContext mctx2{&masked2, 25};
    CHECK_FALSE(oracle::bitwise_equal(model.epsilon(z, 25, &mctx2), with_null));
}

TEST_CASE("tape gradients agree with central finite differences") {
    oracle::Rng rng(304);
    // conv -> group_norm -> silu -> attention-ish matmul chain -> mse
    Tensor xv = oracle::random_tensor(rng, {2, 4, 4});
    Tensor wv = oracle::random_tensor(rng, {2, 2, 3, 3}, -0.4f, 0.4f);
    Tensor bv = oracle::random_tensor(rng, {2}, -0.1f, 0.1f);
    Tensor gv = oracle::random_tensor(rng, {2}, 0.8f, 1.2f);
    Tensor bev = oracle::random_tensor(rng, {2}, -0.1f, 0.1f);
    Tensor target = oracle::random_tensor(rng, {2, 4, 4});

    auto loss_value = [&](const Tensor& w_in, const Tensor& x_in) {
        ag::Tape tape;
        auto x = tape.leaf(x_in, true);
        auto w = tape.leaf(w_in, true);
        auto b = tape.leaf(bv, true);
        auto g = tape.leaf(gv, true);
        auto be = tape.leaf(bev, true);
        auto h = tape.conv2d(x, w, b, 1, 1);
        h = tape.group_norm(h, g, be, 2);
        h = tape.silu(h);
        auto flat = tape.reshape(h, {2, 16});
        auto attn = tape.softmax_lastdim(tape.scale(tape.matmul(flat, tape.transpose2d(flat)), 0.25f));
        h = tape.reshape(tape.matmul(attn, flat), {2, 4, 4});
        auto loss = tape.mse_loss(h, tape.leaf(target));
        return std::pair(tape, loss);
    };

    ag::Tape t2;
    auto x = t2.leaf(xv, true);
    auto w = t2.leaf(wv, true);
    auto b = t2.leaf(bv, true);
    auto g = t2.leaf(gv, true);
    auto be = t2.leaf(bev, true);
    auto h = t2.conv2d(x, w, b, 1, 1);
    h = t2.group_norm(h, g, be, 2);
    h = t2.silu(h);
    auto flat = t2.reshape(h, {2, 16});
    auto attn = t2.softmax_lastdim(t2.scale(t2.matmul(flat, t2.transpose2d(flat)), 0.25f));
    h = t2.reshape(t2.matmul(attn, flat), {2, 4, 4});
    auto l2 = t2.mse_loss(h, t2.leaf(target));
    t2.backward(l2);

    auto numeric = [&](Tensor& param, size_t idx) {
        const float h_step = 1e-3f;
        float saved = param.data()[idx];
        param.data()[idx] = saved + h_step;
        auto [tp, lp] = loss_value(wv, xv);
        float up = lp->value.at(0);
        param.data()[idx] = saved - h_step;
        auto [tm, lm] = loss_value(wv, xv);
        float dn = lm->value.at(0);
        param.data()[idx] = saved;
        return (up - dn) / (2.0f * h_step);
    };

    for (size_t idx : {size_t(0), size_t(7), size_t(20)}) {
        float analytic = w->grad.data()[idx % w->grad.size()];
        float fd = numeric(wv, idx % wv.size());
        CHECK(std::abs(analytic - fd) < 5e-3f * (1.0f + std::abs(fd)));
    }
    for (size_t idx : {size_t(1), size_t(13)}) {
        float analytic = x->grad.data()[idx];
        float fd = numeric(xv, idx);
        CHECK(std::abs(analytic - fd) < 5e-3f * (1.0f + std::abs(fd)));
    }
}

TEST_CASE("training zero steps is a no-op and short runs are deterministic") {
    DenoiserConfig cfg = tiny_config();
    cfg.in_channels = 48;
    cfg.latent_size = 16;
    cfg.attention_resolutions = {16};
    Denoiser model(cfg);
    DenoiserParams before = model.params();
    TrainConfig tc;
    tc.steps = 0;
    NoiseSchedule s = make_schedule(50);
    TrainResult r0 = train_toy(model, tc, s);
    CHECK(r0.loss_trace.empty());
    CHECK(model.params() == before);

    tc.steps = 3;
    Denoiser m1(cfg), m2(cfg);
    TrainResult r1 = train_toy(m1, tc, s);
    TrainResult r2 = train_toy(m2, tc, s);
    REQUIRE(r1.loss_trace.size() == 3u);
    for (size_t i = 0; i < 3; ++i) CHECK(r1.loss_trace[i] == r2.loss_trace[i]);
    CHECK(m1.params() == m2.params());
}

TEST_CASE("a short training run reduces the loss moving average") {
    DenoiserConfig cfg;
    cfg.base_channels = 16;
    cfg.num_res_blocks = 1;
    cfg.attention_resolutions = {16};
    Denoiser model(cfg);
    TrainConfig tc;
    tc.steps = 60;
    tc.batch = 2;
    NoiseSchedule s = make_schedule(50);
    TrainResult r = train_toy(model, tc, s);
    REQUIRE(r.loss_trace.size() == 60u);
    auto avg = [&](size_t from, size_t to) {
        double acc = 0.0;
        for (size_t i = from; i < to; ++i) acc += r.loss_trace[i];
        return acc / static_cast<double>(to - from);
    };
    CHECK(avg(50, 60) < avg(0, 10));
}

TEST_CASE("checkpoint save/load round trips config and params") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model(cfg);
    auto path = (std::filesystem::temp_directory_path() / "layerlat_test.lpar").string();
    save_params(model.config(), model.params(), path);
    auto [cfg2, params2] = load_params(path);
    CHECK(cfg2.in_channels == cfg.in_channels);
    CHECK(cfg2.latent_size == cfg.latent_size);
    CHECK(cfg2.base_channels == cfg.base_channels);
    CHECK(cfg2.channel_multipliers == cfg.channel_multipliers);
    CHECK(cfg2.attention_resolutions == cfg.attention_resolutions);
    CHECK(params2 == model.params());
}

TEST_CASE("config validation rejects impossible layouts") {
    DenoiserConfig cfg;
    cfg.attention_resolutions = {};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = DenoiserConfig{};
    cfg.attention_resolutions = {7};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}
