#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "layerlat/codec.hpp"
#include "layerlat/ddim.hpp"
#include "layerlat/denoiser.hpp"
#include "layerlat/errors.hpp"
#include "layerlat/pipeline.hpp"
#include "layerlat/plan.hpp"
#include "layerlat/schedule.hpp"

namespace fs = std::filesystem;
using namespace layerlat;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

bool env_seed(uint64_t& out) {
    const char* s = std::getenv("LAYERLAT_SEED");
    if (!s || !*s) return false;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw ValidationError("LAYERLAT_SEED: not an integer");
    out = v;
    return true;
}

Denoiser make_model(const std::string& params_path, uint64_t seed) {
    if (!params_path.empty()) {
        auto [cfg, params] = load_params(params_path);
        return Denoiser(cfg, std::move(params));
    }
    DenoiserConfig cfg;
    cfg.seed = seed;
    return Denoiser(cfg);
}

std::string two_digits(int t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", t);
    return buf;
}

int run(int argc, char** argv) {
    CLI::App app{"layerlat: layered-latent spatial image editing"};
    app.require_subcommand(1);

    // invert
    auto* invert_cmd = app.add_subcommand("invert", "DDIM-invert an image, dumping the trajectory");
    std::string invert_image, invert_out, invert_model;
    int invert_T = 50;
    invert_cmd->add_option("image", invert_image, "input PPM")->required();
    invert_cmd->add_option("--out", invert_out, "output directory")->required();
    invert_cmd->add_option("--model", invert_model, "denoiser checkpoint (.lpar)");
    invert_cmd->add_option("--steps", invert_T, "number of inversion steps");

    // edit
    auto* edit_cmd = app.add_subcommand("edit", "execute an edit plan");
    std::string edit_plan, edit_out, edit_model;
    bool dump_heatmaps = false, dump_stages = false, dump_trajectory = false;
    edit_cmd->add_option("plan", edit_plan, "plan JSON file")->required();
    edit_cmd->add_option("--out", edit_out, "output directory")->required();
    edit_cmd->add_option("--model", edit_model, "denoiser checkpoint (.lpar)");
    edit_cmd->add_flag("--dump-heatmaps", dump_heatmaps, "write attention heatmaps");
    edit_cmd->add_flag("--dump-stages", dump_stages, "write intermediate latents");
    edit_cmd->add_flag("--dump-trajectory", dump_trajectory, "write the source trajectory");

    // train-toy
    auto* train_cmd = app.add_subcommand("train-toy", "train the toy denoiser");
    std::string train_out;
    int train_steps = 2000;
    uint64_t train_seed = 1234;
    train_cmd->add_option("--steps", train_steps, "optimizer steps")->required();
    train_cmd->add_option("--out", train_out, "checkpoint path (.lpar)")->required();
    train_cmd->add_option("--seed", train_seed, "parameter init seed");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation study");
    std::string ablate_mode, ablate_out, ablate_model;
    ablate_cmd
        ->add_option("--mode", ablate_mode,
                     "mask-placement|effect-range|canvas-init|resize-level")
        ->required();
    ablate_cmd->add_option("--out", ablate_out, "output directory")->required();
    ablate_cmd->add_option("--model", ablate_model, "denoiser checkpoint (.lpar)");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "pixel metrics between two images");
    std::string metrics_a, metrics_b, metrics_mask;
    metrics_cmd->add_option("a", metrics_a, "first PPM")->required();
    metrics_cmd->add_option("b", metrics_b, "second PPM")->required();
    metrics_cmd->add_option("--mask", metrics_mask, "restrict to a PGM region");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    uint64_t seed_override = 0;
    const bool has_seed_override = env_seed(seed_override);

    if (invert_cmd->parsed()) {
        Denoiser model = make_model(invert_model, has_seed_override ? seed_override : 1234);
        ImageBuffer img = load_ppm(invert_image);
        NoiseSchedule schedule = make_schedule(invert_T);
        Trajectory traj = invert(encode(img), model, schedule);
        fs::create_directories(invert_out);
        for (const auto& [t, z] : traj.latents) {
            save_latent(z, (fs::path(invert_out) / ("traj_t" + two_digits(t) + ".llat")).string());
        }
        return 0;
    }
    if (edit_cmd->parsed()) {
        EditPlan plan = load_plan(edit_plan);
        if (has_seed_override) plan.hyper.seed = seed_override;
        Denoiser model = make_model(edit_model, plan.hyper.seed);
        RunOptions opts;
        opts.out_dir = edit_out;
        opts.dump_heatmaps = dump_heatmaps;
        opts.dump_stages = dump_stages;
        opts.dump_trajectory = dump_trajectory;
        run_edit(plan, model, opts);
        return 0;
    }
    if (train_cmd->parsed()) {
        if (has_seed_override) train_seed = seed_override;
        DenoiserConfig cfg;
        cfg.seed = train_seed;
        Denoiser model(cfg);
        TrainConfig tc;
        tc.steps = train_steps;
        NoiseSchedule schedule = make_schedule(50);
        TrainResult tr = train_toy(model, tc, schedule);
        if (!tr.loss_trace.empty()) {
            std::printf("final loss %.6f after %d steps\n", tr.loss_trace.back(), train_steps);
        }
        save_params(model.config(), model.params(), train_out);
        return 0;
    }
    if (ablate_cmd->parsed()) {
        Denoiser model = make_model(ablate_model, has_seed_override ? seed_override : 1234);
        run_ablation(ablate_mode, model, ablate_out);
        return 0;
    }
    if (metrics_cmd->parsed()) {
        ImageBuffer a = load_ppm(metrics_a);
        ImageBuffer b = load_ppm(metrics_b);
        Metrics m;
        if (!metrics_mask.empty()) {
            MaskGrid region = load_pgm(metrics_mask);
            m = compute_metrics(a, b, &region);
        } else {
            m = compute_metrics(a, b);
        }
        std::printf("{\"l1\": %.8f, \"l2\": %.8f, \"psnr\": %.4f}\n", m.l1, m.l2, m.psnr);
        return 0;
    }
    return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
