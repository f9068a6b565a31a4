#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layerlat/tensor.hpp"

namespace layerlat {

// 8-bit RGB image, row-major, interleaved channels.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;  // height * width * 3

    ImageBuffer() = default;
    ImageBuffer(int h, int w, uint8_t fill = 0)
        : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, fill) {}

    uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }

    bool operator==(const ImageBuffer& o) const {
        return height == o.height && width == o.width && pixels == o.pixels;
    }
};

// Strictly binary mask, usually at latent resolution.
struct MaskGrid {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values;  // 0 or 1

    MaskGrid() = default;
    MaskGrid(int h, int w, uint8_t fill = 0)
        : height(h), width(w), values(static_cast<size_t>(h) * w, fill ? 1 : 0) {}

    uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }

    size_t count_ones() const;

    Tensor to_tensor() const;  // h x w floats in {0,1}
    static MaskGrid from_tensor(const Tensor& t);

    bool operator==(const MaskGrid& o) const {
        return height == o.height && width == o.width && values == o.values;
    }
};

// Union / intersection of two masks (same dims), clamped to binary.
MaskGrid mask_union(const MaskGrid& a, const MaskGrid& b);
MaskGrid mask_intersection(const MaskGrid& a, const MaskGrid& b);

// NetPBM binary I/O: P6 for images, P5 for masks/heatmaps, maxval 255.
void save_ppm(const ImageBuffer& img, const std::string& path);
ImageBuffer load_ppm(const std::string& path);

// Masks binarize at threshold 128 on load.
void save_pgm(const MaskGrid& mask, const std::string& path);
MaskGrid load_pgm(const std::string& path);

// Min-max normalize to [0,255]; a constant map is emitted as all-zero.
void save_heatmap(const Tensor& map, const std::string& path);

}  // namespace layerlat
