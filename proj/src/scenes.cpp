#include "layerlat/scenes.hpp"

#include <cmath>
#include <cstdint>

namespace layerlat {

namespace {

// splitmix64; gives an independent stream per (seed, index).
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t s) : state(s) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    int range(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

uint8_t lerp8(int a, int b, double t) {
    return static_cast<uint8_t>(std::lround(a + (b - a) * t));
}

}  // namespace

Scene make_scene(const SceneConfig& cfg, uint64_t index) {
    const int n = cfg.image_size;
    Rng rng(cfg.seed * 0x9e3779b97f4a7c15ull + index * 0xd1b54a32d192ed03ull + 1);

    Scene scene;
    scene.background = ImageBuffer(n, n);

    // Background: uniform, vertical gradient or horizontal gradient.
    int kind = rng.range(0, 2);
    int c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.range(30, 225);
        c1[c] = rng.range(30, 225);
    }
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double t = kind == 0 ? 0.0 : (kind == 1 ? static_cast<double>(y) / (n - 1)
                                                    : static_cast<double>(x) / (n - 1));
            for (int c = 0; c < 3; ++c) scene.background.at(y, x, c) = lerp8(c0[c], c1[c], t);
        }
    }

    scene.image = scene.background;
    scene.object_mask = MaskGrid(n, n);

    int num_objects = rng.range(1, 3);
    for (int o = 0; o < num_objects; ++o) {
        bool ellipse = rng.range(0, 1) == 1;
        int oh = rng.range(n / 6, n / 2 - 4);
        int ow = rng.range(n / 6, n / 2 - 4);
        int cy = rng.range(oh / 2 + 1, n - oh / 2 - 2);
        int cx = rng.range(ow / 2 + 1, n - ow / 2 - 2);
        uint8_t col[3];
        for (int c = 0; c < 3; ++c) col[c] = static_cast<uint8_t>(rng.range(0, 255));
        MaskGrid mask(n, n);
        for (int y = cy - oh / 2; y <= cy + oh / 2; ++y) {
            for (int x = cx - ow / 2; x <= cx + ow / 2; ++x) {
                if (y < 0 || y >= n || x < 0 || x >= n) continue;
                bool inside = true;
                if (ellipse) {
                    double dy = (y - cy) / (oh / 2.0 + 0.5);
                    double dx = (x - cx) / (ow / 2.0 + 0.5);
                    inside = dy * dy + dx * dx <= 1.0;
                }
                if (!inside) continue;
                mask.at(y, x) = 1;
                scene.object_mask.at(y, x) = 1;
                for (int c = 0; c < 3; ++c) scene.image.at(y, x, c) = col[c];
            }
        }
        scene.object_masks.push_back(std::move(mask));
    }
    return scene;
}

}  // namespace layerlat
