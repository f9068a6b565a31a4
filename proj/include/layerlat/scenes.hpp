#pragma once

#include <cstdint>
#include <vector>

#include "layerlat/image.hpp"

namespace layerlat {

// Procedural desk-scale dataset: uniform or gradient backgrounds with 1-3
// colored rectangles/ellipses and a known clean background.
struct SceneConfig {
    int image_size = 64;
    uint64_t seed = 7;
};

struct Scene {
    ImageBuffer image;                 // background with objects composited
    ImageBuffer background;            // clean background ground truth
    MaskGrid object_mask;              // union of object masks, image resolution
    std::vector<MaskGrid> object_masks;
};

Scene make_scene(const SceneConfig& cfg, uint64_t index);

}  // namespace layerlat
