#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "layerlat/codec.hpp"
#include "layerlat/ddim.hpp"
#include "layerlat/denoiser.hpp"
#include "layerlat/editing.hpp"
#include "layerlat/errors.hpp"
#include "layerlat/scenes.hpp"
#include "layerlat/schedule.hpp"
#include "oracles.hpp"

using namespace layerlat;

namespace {

MaskGrid latent_mask_of(const Scene& scene) {
    return MaskGrid::from_tensor(maxpool_downsample(scene.object_mask.to_tensor(), 16, 16));
}

bool equal_outside(const Tensor& a, const Tensor& b, const MaskGrid& m) {
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!m.at(y, x) && a.at(ch, y, x) != b.at(ch, y, x)) return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("move laws: identity, index formula, involution interior, linearity") {
    oracle::Rng rng(400);
    Tensor grid = oracle::random_tensor(rng, {16, 16});
    CHECK(oracle::bitwise_equal(move(grid, {0, 0}), grid));

    Tensor two = Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});  // [[a,b],[c,d]]
    Tensor shifted = move(two, {1, 0});
    CHECK(shifted.at(0, 0) == 0.0f);
    CHECK(shifted.at(0, 1) == 1.0f);
    CHECK(shifted.at(1, 0) == 0.0f);
    CHECK(shifted.at(1, 1) == 3.0f);

    for (int trial = 0; trial < 20; ++trial) {
        MoveVector v{rng.range(-8, 8), rng.range(-8, 8)};
        Tensor a = oracle::random_tensor(rng, {16, 16});
        Tensor b = oracle::random_tensor(rng, {16, 16});

        // involution on the doubly-in-bounds interior
        Tensor round_trip = move(move(a, v), {-v.dx, -v.dy});
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                bool interior = y + v.dy >= 0 && y + v.dy < 16 && x + v.dx >= 0 && x + v.dx < 16;
                CHECK(round_trip.at(y, x) == (interior ? a.at(y, x) : 0.0f));
            }
        }

        // linearity
        Tensor sum_then_move = move(add(a, b), v);
        Tensor move_then_sum = add(move(a, v), move(b, v));
        CHECK(oracle::bitwise_equal(sum_then_move, move_then_sum));
    }
}

TEST_CASE("removal_blend boundary masks and single-cell count") {
    oracle::Rng rng(401);
    Tensor z_l0 = oracle::random_tensor(rng, {4, 8, 8});
    Tensor z_s = oracle::random_tensor(rng, {4, 8, 8});
    CHECK(oracle::bitwise_equal(removal_blend(z_l0, z_s, MaskGrid(8, 8, 1)), z_l0));
    CHECK(oracle::bitwise_equal(removal_blend(z_l0, z_s, MaskGrid(8, 8, 0)), z_s));

    MaskGrid one(8, 8);
    one.at(3, 4) = 1;
    Tensor blended = removal_blend(z_l0, z_s, one);
    int from_l0 = 0;
    for (int c = 0; c < 4; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                float got = blended.at(c, y, x);
                if (y == 3 && x == 4) {
                    CHECK(got == z_l0.at(c, y, x));
                    ++from_l0;
                } else {
                    CHECK(got == z_s.at(c, y, x));
                }
            }
        }
    }
    CHECK(from_l0 == 4);
}

TEST_CASE("fuse_layers pastes inside moved masks, overlaps resolve to higher index") {
    oracle::Rng rng(402);
    Tensor canvas = oracle::random_tensor(rng, {4, 8, 8});
    Tensor z1 = oracle::random_tensor(rng, {4, 8, 8});
    Tensor z2 = oracle::random_tensor(rng, {4, 8, 8});

    MaskGrid m1(8, 8), m2(8, 8);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) m1.at(y, x) = 1;
    for (int y = 2; y < 5; ++y)
        for (int x = 2; x < 5; ++x) m2.at(y, x) = 1;

    std::vector<LayerState> layers;
    layers.push_back({2, z2, m2, {{0, 0}}});
    layers.push_back({1, z1, m1, {{0, 0}}});  // order in vector must not matter

    Tensor fused = fuse_layers(canvas, layers);
    for (int c = 0; c < 4; ++c) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                float want = m2.at(y, x) ? z2.at(c, y, x)
                             : m1.at(y, x) ? z1.at(c, y, x)
                                           : canvas.at(c, y, x);
                CHECK(fused.at(c, y, x) == want);
            }
        }
    }
    CHECK(oracle::bitwise_equal(fuse_layers(canvas, {}), canvas));
}

TEST_CASE("a two-move layer pastes two instances") {
    oracle::Rng rng(403);
    Tensor canvas({3, 8, 8}, 0.0f);
    Tensor z = oracle::random_tensor(rng, {3, 8, 8}, 0.5f, 1.0f);
    MaskGrid m(8, 8);
    m.at(1, 1) = 1;
    std::vector<LayerState> layers{{1, z, m, {{2, 0}, {4, 3}}}};
    Tensor fused = fuse_layers(canvas, layers);
    CHECK(fused.at(0, 1, 3) == z.at(0, 1, 1));  // move (dx=2, dy=0)
    CHECK(fused.at(0, 4, 5) == z.at(0, 1, 1));  // move (dx=4, dy=3)
    int nonzero = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) nonzero += fused.at(0, y, x) != 0.0f;
    CHECK(nonzero == 2);
}

TEST_CASE("occlusion_blend with empty mask degenerates to the canvas") {
    oracle::Rng rng(404);
    Tensor z_hat = oracle::random_tensor(rng, {3, 8, 8});
    Tensor z_c = oracle::random_tensor(rng, {3, 8, 8});
    CHECK(oracle::bitwise_equal(occlusion_blend(z_hat, z_c, MaskGrid(8, 8)), z_c));
    MaskGrid m(8, 8);
    m.at(0, 0) = 1;
    Tensor out = occlusion_blend(z_hat, z_c, m);
    CHECK(out.at(1, 0, 0) == z_hat.at(1, 0, 0));
    CHECK(out.at(1, 0, 1) == z_c.at(1, 0, 1));
}

TEST_CASE("decomposition keeps the outside bitwise at every removal step") {
    DenoiserConfig cfg;
    cfg.seed = 21;
    Denoiser model(cfg);
    NoiseSchedule s = make_schedule(50);
    Scene scene = make_scene(SceneConfig{}, 1);

    DecompositionInput din;
    din.source = scene.image;
    din.remove_mask = latent_mask_of(scene);
    din.K = 40;
    din.attention_resolutions = cfg.attention_resolutions;
    DecompositionResult res = run_decomposition(din, model, s);

    CHECK(res.source_traj.entries() == 51u);
    int checked = 0;
    for (const auto& [t, z] : res.removal_per_step) {
        CHECK(equal_outside(z, res.source_traj.at(t), din.remove_mask));
        ++checked;
    }
    CHECK(checked == 40);
    CHECK(oracle::bitwise_equal(res.background_at_fuse, res.removal_per_step.at(10)));
    // something was inpainted: inside the mask the latent diverged
    CHECK_FALSE(oracle::bitwise_equal(res.background_at_fuse, res.source_traj.at(10)));
}

TEST_CASE("decomposition with an empty remove mask is a bitwise no-op") {
    DenoiserConfig cfg;
    cfg.seed = 22;
    Denoiser model(cfg);
    NoiseSchedule s = make_schedule(50);
    Scene scene = make_scene(SceneConfig{}, 2);

    DecompositionInput din;
    din.source = scene.image;
    din.remove_mask = MaskGrid(16, 16);
    din.K = 40;
    din.attention_resolutions = cfg.attention_resolutions;
    DecompositionResult res = run_decomposition(din, model, s);
    CHECK(oracle::bitwise_equal(res.background_at_fuse, res.source_traj.at(10)));
}

TEST_CASE("adjusted layers invert their adjusted image; unadjusted reuse the trajectory") {
    DenoiserConfig cfg;
    cfg.seed = 23;
    Denoiser model(cfg);
    NoiseSchedule s = make_schedule(20);
    Scene scene = make_scene(SceneConfig{}, 3);

    DecompositionInput din;
    din.source = scene.image;
    din.remove_mask = latent_mask_of(scene);
    din.K = 15;
    din.attention_resolutions = cfg.attention_resolutions;

    DecompositionLayer plain_layer;
    plain_layer.index = 1;
    plain_layer.mask_latent = din.remove_mask;
    din.layers.push_back(plain_layer);

    DecompositionLayer adjusted_layer;
    adjusted_layer.index = 2;
    adjusted_layer.mask_latent = din.remove_mask;
    adjusted_layer.adjusted = true;
    adjusted_layer.adjusted_image = adjust_resize(scene.image, 0.5, 0.5);
    din.layers.push_back(adjusted_layer);

    DecompositionResult res = run_decomposition(din, model, s);
    CHECK(oracle::bitwise_equal(res.layer_latents_at_fuse.at(1), res.source_traj.at(5)));
    CHECK_FALSE(oracle::bitwise_equal(res.layer_latents_at_fuse.at(2), res.source_traj.at(5)));
    CHECK(res.layer_trajs.count(2) == 1);
    Tensor adjusted_z0 = encode(adjusted_layer.adjusted_image);
    CHECK(oracle::bitwise_equal(res.layer_trajs.at(2).at(0), adjusted_z0));
}

TEST_CASE("harmonize with K == T returns the canvas unchanged") {
    DenoiserConfig cfg;
    Denoiser model(cfg);
    NoiseSchedule s = make_schedule(50);
    oracle::Rng rng(405);
    Tensor canvas = oracle::random_tensor(rng, {48, 16, 16});
    CHECK(oracle::bitwise_equal(harmonize(canvas, model, s, 50), canvas));
}

TEST_CASE("occlusion tail with an empty effective mask equals plain harmonization") {
    DenoiserConfig cfg;
    cfg.seed = 24;
    Denoiser model(cfg);
    NoiseSchedule s = make_schedule(20);
    oracle::Rng rng(406);
    Tensor canvas = oracle::random_tensor(rng, {48, 16, 16}, -0.5f, 0.5f);

    DecompositionInput attn_cfg;
    attn_cfg.attention_resolutions = cfg.attention_resolutions;
    attn_cfg.step_hi = 20;
    attn_cfg.step_lo = 0;  // keep masking live through the whole tail
    Tensor tail = run_occlusion_tail(canvas, MaskGrid(16, 16), model, s, 15, attn_cfg);
    Tensor plain = harmonize(canvas, model, s, 15);
    CHECK(oracle::bitwise_equal(tail, plain));

    MaskGrid live(16, 16);
    for (int y = 6; y < 10; ++y)
        for (int x = 6; x < 10; ++x) live.at(y, x) = 1;
    Tensor occluded = run_occlusion_tail(canvas, live, model, s, 15, attn_cfg);
    CHECK_FALSE(oracle::bitwise_equal(occluded, plain));
    CHECK(equal_outside(occluded, plain, live));
}

TEST_CASE("moved_union covers every destination") {
    MaskGrid m(8, 8);
    m.at(2, 2) = 1;
    MaskGrid u = moved_union(m, {{1, 0}, {0, 1}, {-5, 0}});
    CHECK(u.count_ones() == 2u);  // the third move falls off the grid
    CHECK(u.at(2, 3) == 1);
    CHECK(u.at(3, 2) == 1);
}
