#include "layerlat/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "layerlat/errors.hpp"

namespace layerlat {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "linear") return ScheduleKind::Linear;
    throw ValidationError("unknown schedule kind: " + s);
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
    if (T < 1) throw ParameterError("schedule needs T >= 1, got " + std::to_string(T));
    NoiseSchedule s;
    s.T = T;
    s.alpha_bar.resize(static_cast<size_t>(T) + 1);
    if (kind == ScheduleKind::Cosine) {
        const double off = 0.008;
        auto f = [&](double t) {
            double x = (t / T + off) / (1.0 + off) * (M_PI / 2.0);
            double c = std::cos(x);
            return c * c;
        };
        double f0 = f(0.0);
        for (int t = 0; t <= T; ++t) {
            s.alpha_bar[static_cast<size_t>(t)] = static_cast<float>(f(t) / f0);
        }
    } else {
        // DDPM betas defined on 1000 steps, rescaled to T.
        const double b_lo = 1e-4 * 1000.0 / T;
        const double b_hi = 0.02 * 1000.0 / T;
        double ab = 1.0;
        s.alpha_bar[0] = 1.0f;
        for (int t = 1; t <= T; ++t) {
            double beta = T == 1 ? b_hi : b_lo + (b_hi - b_lo) * (t - 1) / (T - 1);
            beta = std::min(beta, 0.999);
            ab *= 1.0 - beta;
            s.alpha_bar[static_cast<size_t>(t)] = static_cast<float>(ab);
        }
    }
    // Clamp to (0,1] and enforce strict monotone decrease.
    s.alpha_bar[0] = 1.0f;
    for (int t = 1; t <= T; ++t) {
        float prev = s.alpha_bar[static_cast<size_t>(t) - 1];
        float cur = s.alpha_bar[static_cast<size_t>(t)];
        cur = std::max(cur, 1e-6f);
        if (cur >= prev) cur = prev * 0.9999f;
        s.alpha_bar[static_cast<size_t>(t)] = cur;
    }
    return s;
}

}  // namespace layerlat
