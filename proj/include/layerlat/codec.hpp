#pragma once

#include <string>

#include "layerlat/image.hpp"
#include "layerlat/tensor.hpp"

namespace layerlat {

// A latent is a (channels x height x width) tensor; after encode the values
// lie in [-1, 1] and channels = 3 * factor^2.
using LatentGrid = Tensor;

constexpr int kDefaultCodecFactor = 4;

// Underlay used when pan/zoom paste exposes canvas regions.
enum class CanvasInit { Original, Black, White };

enum class FlipAxis { Horizontal, Vertical };

enum class PanDirection { Left, Right, Up, Down };

PanDirection pan_direction_from_string(const std::string& s);
FlipAxis flip_axis_from_string(const std::string& s);
CanvasInit canvas_init_from_string(const std::string& s);

// Lossless pixel <-> latent mapping: map channels to [-1,1] via v/127.5 - 1,
// then space-to-depth by `factor`. decode inverts it exactly on 8-bit input.
LatentGrid encode(const ImageBuffer& img, int factor = kDefaultCodecFactor);
ImageBuffer decode(const LatentGrid& lat, int factor = kDefaultCodecFactor);

ImageBuffer resize_bilinear(const ImageBuffer& img, int new_h, int new_w);

// Resize content by the given ratios while keeping the canvas size and the
// content centered; exposed borders are filled by edge replication. Ratios
// above 1 crop centered.
ImageBuffer adjust_resize(const ImageBuffer& img, double h_ratio, double w_ratio);

ImageBuffer adjust_flip(const ImageBuffer& img, FlipAxis axis);

// Camera pan: content shifts opposite to `dir` by round(scale * dim) pixels;
// the vacated band keeps the underlay given by `canvas`.
ImageBuffer pan_paste(const ImageBuffer& img, PanDirection dir, double scale,
                      CanvasInit canvas = CanvasInit::Original);

// Zoom out: content shrinks to round(dim / scale) and is pasted centered.
ImageBuffer zoom_paste(const ImageBuffer& img, double scale,
                       CanvasInit canvas = CanvasInit::Original);

// Latent-resolution masks marking the regions to complete (1 = inpaint).
MaskGrid build_pan_mask(PanDirection dir, double scale, int lat_h, int lat_w);
MaskGrid build_zoom_mask(double scale, int lat_h, int lat_w);

// Latent-level resize (ablation path only; the default pipeline resizes at
// image level and re-encodes).
LatentGrid adjust_resize_latent(const LatentGrid& lat, double h_ratio, double w_ratio);

// Latent dump: magic "LLAT", u32 version=1, u32 c,h,w, then c*h*w LE f32.
void save_latent(const LatentGrid& lat, const std::string& path);
LatentGrid load_latent(const std::string& path);

}  // namespace layerlat
