#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "layerlat/model.hpp"
#include "layerlat/schedule.hpp"
#include "layerlat/tensor.hpp"

namespace layerlat {

// Per-timestep latents recorded during inversion; index 0 is the encoded
// source, index T the fully noised latent.
struct Trajectory {
    std::map<int, Tensor> latents;

    const Tensor& at(int t) const;
    bool has(int t) const { return latents.count(t) > 0; }
    size_t entries() const { return latents.size(); }
};

// Deterministic (eta = 0) DDIM update from t down to t_prev.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev,
                 const NoiseSchedule& schedule);

// Exact algebraic inverse of ddim_step under the same eps.
Tensor ddim_inverse_step(const Tensor& z_prev, const Tensor& eps, int t_prev, int t,
                         const NoiseSchedule& schedule);

// DDIM inversion from t=0 to t=T, recording every intermediate latent.
Trajectory invert(const Tensor& z0, const EpsilonModel& model, const NoiseSchedule& schedule,
                  const AttentionContext* ctx = nullptr);

// The set of latents tracked through one sampling run, keyed by role
// (e.g. "source", "removal", "canvas").
struct LatentSet {
    std::map<std::string, Tensor> latents;

    Tensor& at(const std::string& role);
    const Tensor& at(const std::string& role) const;
};

// Invoked after each denoising step with the timestep just reached and
// mutable access to all tracked latents. Hooks may rewrite contents but
// never shapes.
using StepHook = std::function<void(int t, LatentSet&)>;

// Supplies the attention context for a given (timestep, latent role);
// may return null for plain attention.
using CtxProvider = std::function<const AttentionContext*(int t, const std::string& role)>;

// Runs denoising from t_start (default: schedule.T) down to 0, firing hooks
// in registration order after every step, and returns the target role's
// latent at t=0.
Tensor sample(LatentSet init, const EpsilonModel& model, const NoiseSchedule& schedule,
              const std::vector<StepHook>& hooks, const CtxProvider& ctx_provider,
              const std::string& target_role, int t_start = -1);

}  // namespace layerlat
