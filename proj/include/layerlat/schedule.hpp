#pragma once

#include <string>
#include <vector>

namespace layerlat {

enum class ScheduleKind { Cosine, Linear };

ScheduleKind schedule_kind_from_string(const std::string& s);

// alpha_bar is indexed 0..T with alpha_bar[0] = 1 and strictly decreasing
// values in (0, 1].
struct NoiseSchedule {
    int T = 0;
    std::vector<float> alpha_bar;
};

NoiseSchedule make_schedule(int T, ScheduleKind kind = ScheduleKind::Cosine);

}  // namespace layerlat
