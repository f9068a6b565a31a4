#include "layerlat/ddim.hpp"

#include <cmath>

#include "layerlat/errors.hpp"

namespace layerlat {

const Tensor& Trajectory::at(int t) const {
    auto it = latents.find(t);
    if (it == latents.end()) {
        throw ParameterError("trajectory has no latent for t=" + std::to_string(t));
    }
    return it->second;
}

Tensor& LatentSet::at(const std::string& role) {
    auto it = latents.find(role);
    if (it == latents.end()) throw ParameterError("latent set has no role '" + role + "'");
    return it->second;
}

const Tensor& LatentSet::at(const std::string& role) const {
    auto it = latents.find(role);
    if (it == latents.end()) throw ParameterError("latent set has no role '" + role + "'");
    return it->second;
}

namespace {

void check_step(int t, int t_prev, const NoiseSchedule& s) {
    if (t_prev >= t || t_prev < 0 || t > s.T) {
        throw ParameterError("invalid DDIM step " + std::to_string(t) + " -> " +
                             std::to_string(t_prev));
    }
}

}  // namespace

Tensor ddim_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev,
                 const NoiseSchedule& schedule) {
    check_step(t, t_prev, schedule);
    if (!z_t.same_shape(eps)) throw DimensionError("ddim_step latent/eps shapes differ");
    const float ab_t = schedule.alpha_bar[static_cast<size_t>(t)];
    const float ab_p = schedule.alpha_bar[static_cast<size_t>(t_prev)];
    const float sa_t = std::sqrt(ab_t), sb_t = std::sqrt(1.0f - ab_t);
    const float sa_p = std::sqrt(ab_p), sb_p = std::sqrt(1.0f - ab_p);
    Tensor out(z_t.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        float x0 = (z_t.data()[i] - sb_t * eps.data()[i]) / sa_t;
        out.data()[i] = sa_p * x0 + sb_p * eps.data()[i];
    }
    return out;
}

Tensor ddim_inverse_step(const Tensor& z_prev, const Tensor& eps, int t_prev, int t,
                         const NoiseSchedule& schedule) {
    check_step(t, t_prev, schedule);
    if (!z_prev.same_shape(eps)) throw DimensionError("ddim_inverse_step latent/eps shapes differ");
    const float ab_t = schedule.alpha_bar[static_cast<size_t>(t)];
    const float ab_p = schedule.alpha_bar[static_cast<size_t>(t_prev)];
    const float sa_t = std::sqrt(ab_t), sb_t = std::sqrt(1.0f - ab_t);
    const float sa_p = std::sqrt(ab_p), sb_p = std::sqrt(1.0f - ab_p);
    Tensor out(z_prev.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        float x0 = (z_prev.data()[i] - sb_p * eps.data()[i]) / sa_p;
        out.data()[i] = sa_t * x0 + sb_t * eps.data()[i];
    }
    return out;
}

Trajectory invert(const Tensor& z0, const EpsilonModel& model, const NoiseSchedule& schedule,
                  const AttentionContext* ctx) {
    Trajectory traj;
    traj.latents[0] = z0;
    Tensor z = z0;
    for (int t_prev = 0; t_prev < schedule.T; ++t_prev) {
        Tensor eps = model.epsilon(z, t_prev, ctx);
        z = ddim_inverse_step(z, eps, t_prev, t_prev + 1, schedule);
        if (!all_finite(z)) {
            throw NumericError("inversion produced non-finite latent at step " +
                               std::to_string(t_prev + 1));
        }
        traj.latents[t_prev + 1] = z;
    }
    return traj;
}

Tensor sample(LatentSet init, const EpsilonModel& model, const NoiseSchedule& schedule,
              const std::vector<StepHook>& hooks, const CtxProvider& ctx_provider,
              const std::string& target_role, int t_start) {
    if (t_start < 0) t_start = schedule.T;
    if (t_start > schedule.T) throw ParameterError("sample t_start exceeds schedule T");
    if (!init.latents.count(target_role)) {
        throw ParameterError("sample target role '" + target_role + "' not in latent set");
    }
    LatentSet set = std::move(init);
    for (int t = t_start; t >= 1; --t) {
        for (auto& [role, z] : set.latents) {
            const AttentionContext* ctx = ctx_provider ? ctx_provider(t, role) : nullptr;
            Tensor eps = model.epsilon(z, t, ctx);
            z = ddim_step(z, eps, t, t - 1, schedule);
        }
        for (const auto& hook : hooks) {
            std::map<std::string, std::vector<int>> shapes;
            for (const auto& [role, z] : set.latents) shapes[role] = z.shape();
            hook(t - 1, set);
            for (const auto& [role, z] : set.latents) {
                auto it = shapes.find(role);
                if (it == shapes.end() || it->second != z.shape()) {
                    throw ContractError("step hook changed shape of latent role '" + role + "'");
                }
            }
        }
    }
    return set.at(target_role);
}

}  // namespace layerlat
