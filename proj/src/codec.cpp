#include "layerlat/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "layerlat/errors.hpp"

namespace layerlat {

PanDirection pan_direction_from_string(const std::string& s) {
    if (s == "left") return PanDirection::Left;
    if (s == "right") return PanDirection::Right;
    if (s == "up") return PanDirection::Up;
    if (s == "down") return PanDirection::Down;
    throw ValidationError("unknown pan direction: " + s);
}

FlipAxis flip_axis_from_string(const std::string& s) {
    if (s == "horizontal" || s == "h") return FlipAxis::Horizontal;
    if (s == "vertical" || s == "v") return FlipAxis::Vertical;
    throw ValidationError("unknown flip axis: " + s);
}

CanvasInit canvas_init_from_string(const std::string& s) {
    if (s == "original") return CanvasInit::Original;
    if (s == "black") return CanvasInit::Black;
    if (s == "white") return CanvasInit::White;
    throw ValidationError("unknown canvas init: " + s);
}

LatentGrid encode(const ImageBuffer& img, int factor) {
    if (factor < 1) throw ParameterError("codec factor must be >= 1");
    if (img.height < 8 || img.width < 8 || img.height % factor != 0 || img.width % factor != 0) {
        throw DimensionError("image dims " + std::to_string(img.height) + "x" +
                             std::to_string(img.width) + " not divisible by factor " +
                             std::to_string(factor));
    }
    const int lh = img.height / factor, lw = img.width / factor;
    const int lc = 3 * factor * factor;
    LatentGrid lat({lc, lh, lw});
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int by = y % factor, bx = x % factor;
            int base = (by * factor + bx) * 3;
            for (int c = 0; c < 3; ++c) {
                lat.at(base + c, y / factor, x / factor) =
                    static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
            }
        }
    }
    return lat;
}

ImageBuffer decode(const LatentGrid& lat, int factor) {
    if (factor < 1) throw ParameterError("codec factor must be >= 1");
    if (lat.rank() != 3 || lat.dim(0) != 3 * factor * factor) {
        throw DimensionError("latent channels " + lat.shape_str() + " do not match factor " +
                             std::to_string(factor));
    }
    const int lh = lat.dim(1), lw = lat.dim(2);
    ImageBuffer img(lh * factor, lw * factor);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int by = y % factor, bx = x % factor;
            int base = (by * factor + bx) * 3;
            for (int c = 0; c < 3; ++c) {
                float v = lat.at(base + c, y / factor, x / factor);
                v = std::clamp(v, -1.0f, 1.0f);
                img.at(y, x, c) = static_cast<uint8_t>(std::lround((v + 1.0f) * 127.5f));
            }
        }
    }
    return img;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int new_h, int new_w) {
    if (new_h < 1 || new_w < 1) throw ParameterError("resize target dims must be >= 1");
    ImageBuffer out(new_h, new_w);
    for (int y = 0; y < new_h; ++y) {
        // align-corners-off sampling
        float sy = (static_cast<float>(y) + 0.5f) * img.height / new_h - 0.5f;
        sy = std::clamp(sy, 0.0f, static_cast<float>(img.height - 1));
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, img.height - 1);
        float fy = sy - static_cast<float>(y0);
        for (int x = 0; x < new_w; ++x) {
            float sx = (static_cast<float>(x) + 0.5f) * img.width / new_w - 0.5f;
            sx = std::clamp(sx, 0.0f, static_cast<float>(img.width - 1));
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, img.width - 1);
            float fx = sx - static_cast<float>(x0);
            for (int c = 0; c < 3; ++c) {
                float v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
                float v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
                float v = v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx +
                          v10 * fy * (1 - fx) + v11 * fy * fx;
                out.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f)));
            }
        }
    }
    return out;
}

ImageBuffer adjust_resize(const ImageBuffer& img, double h_ratio, double w_ratio) {
    if (h_ratio <= 0.0 || w_ratio <= 0.0) throw ParameterError("resize ratios must be positive");
    int rh = static_cast<int>(std::lround(img.height * h_ratio));
    int rw = static_cast<int>(std::lround(img.width * w_ratio));
    if (rh < 1 || rw < 1) throw ParameterError("resize ratio yields empty image");
    ImageBuffer resized = resize_bilinear(img, rh, rw);
    ImageBuffer out(img.height, img.width);
    int off_y = (img.height - rh) / 2;
    int off_x = (img.width - rw) / 2;
    // Centered paste; pixels outside the content clamp to its nearest edge.
    for (int y = 0; y < img.height; ++y) {
        int sy = std::clamp(y - off_y, 0, rh - 1);
        for (int x = 0; x < img.width; ++x) {
            int sx = std::clamp(x - off_x, 0, rw - 1);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = resized.at(sy, sx, c);
        }
    }
    return out;
}

ImageBuffer adjust_flip(const ImageBuffer& img, FlipAxis axis) {
    ImageBuffer out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int sy = axis == FlipAxis::Vertical ? img.height - 1 - y : y;
            int sx = axis == FlipAxis::Horizontal ? img.width - 1 - x : x;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

namespace {

ImageBuffer make_underlay(const ImageBuffer& img, CanvasInit canvas) {
    switch (canvas) {
        case CanvasInit::Original: return img;
        case CanvasInit::Black: return ImageBuffer(img.height, img.width, 0);
        case CanvasInit::White: return ImageBuffer(img.height, img.width, 255);
    }
    return img;
}

}  // namespace

ImageBuffer pan_paste(const ImageBuffer& img, PanDirection dir, double scale, CanvasInit canvas) {
    if (scale <= 0.0 || scale >= 1.0) throw ParameterError("pan scale must be in (0, 1)");
    bool horizontal = dir == PanDirection::Left || dir == PanDirection::Right;
    int s = static_cast<int>(std::lround(scale * (horizontal ? img.width : img.height)));
    ImageBuffer out = make_underlay(img, canvas);
    // Camera pans toward `dir`; scene content shifts the other way.
    int dy = 0, dx = 0;
    switch (dir) {
        case PanDirection::Right: dx = -s; break;
        case PanDirection::Left: dx = s; break;
        case PanDirection::Up: dy = s; break;
        case PanDirection::Down: dy = -s; break;
    }
    for (int y = 0; y < img.height; ++y) {
        int sy = y - dy;
        if (sy < 0 || sy >= img.height) continue;
        for (int x = 0; x < img.width; ++x) {
            int sx = x - dx;
            if (sx < 0 || sx >= img.width) continue;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

ImageBuffer zoom_paste(const ImageBuffer& img, double scale, CanvasInit canvas) {
    if (scale < 1.0) throw ParameterError("zoom-out scale must be >= 1");
    int rh = static_cast<int>(std::lround(img.height / scale));
    int rw = static_cast<int>(std::lround(img.width / scale));
    if (rh < 1 || rw < 1) throw ParameterError("zoom scale yields empty image");
    ImageBuffer shrunk = resize_bilinear(img, rh, rw);
    ImageBuffer out = make_underlay(img, canvas);
    int off_y = (img.height - rh) / 2;
    int off_x = (img.width - rw) / 2;
    for (int y = 0; y < rh; ++y) {
        for (int x = 0; x < rw; ++x) {
            for (int c = 0; c < 3; ++c) out.at(off_y + y, off_x + x, c) = shrunk.at(y, x, c);
        }
    }
    return out;
}

MaskGrid build_pan_mask(PanDirection dir, double scale, int lat_h, int lat_w) {
    if (scale <= 0.0 || scale >= 1.0) throw ParameterError("pan scale must be in (0, 1)");
    bool horizontal = dir == PanDirection::Left || dir == PanDirection::Right;
    int s = static_cast<int>(std::lround(scale * (horizontal ? lat_w : lat_h)));
    MaskGrid m(lat_h, lat_w);
    for (int y = 0; y < lat_h; ++y) {
        for (int x = 0; x < lat_w; ++x) {
            bool vacated = false;
            switch (dir) {
                case PanDirection::Right: vacated = x >= lat_w - s; break;
                case PanDirection::Left: vacated = x < s; break;
                case PanDirection::Up: vacated = y < s; break;
                case PanDirection::Down: vacated = y >= lat_h - s; break;
            }
            m.at(y, x) = vacated ? 1 : 0;
        }
    }
    return m;
}

MaskGrid build_zoom_mask(double scale, int lat_h, int lat_w) {
    if (scale < 1.0) throw ParameterError("zoom-out scale must be >= 1");
    int rh = static_cast<int>(std::lround(lat_h / scale));
    int rw = static_cast<int>(std::lround(lat_w / scale));
    int off_y = (lat_h - rh) / 2;
    int off_x = (lat_w - rw) / 2;
    MaskGrid m(lat_h, lat_w);
    for (int y = 0; y < lat_h; ++y) {
        for (int x = 0; x < lat_w; ++x) {
            bool inside = y >= off_y && y < off_y + rh && x >= off_x && x < off_x + rw;
            m.at(y, x) = inside ? 0 : 1;
        }
    }
    return m;
}

LatentGrid adjust_resize_latent(const LatentGrid& lat, double h_ratio, double w_ratio) {
    if (h_ratio <= 0.0 || w_ratio <= 0.0) throw ParameterError("resize ratios must be positive");
    if (lat.rank() != 3) throw DimensionError("latent must be c x h x w");
    int rh = static_cast<int>(std::lround(lat.dim(1) * h_ratio));
    int rw = static_cast<int>(std::lround(lat.dim(2) * w_ratio));
    if (rh < 1 || rw < 1) throw ParameterError("resize ratio yields empty latent");
    Tensor resized = nearest_resize(lat, rh, rw);
    Tensor out = lat;  // underlay keeps original content at the borders
    paste_region(out, resized, {0, (lat.dim(1) - rh) / 2, (lat.dim(2) - rw) / 2});
    return out;
}

void save_latent(const LatentGrid& lat, const std::string& path) {
    if (lat.rank() != 3) throw DimensionError("latent must be c x h x w, got " + lat.shape_str());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    const char magic[4] = {'L', 'L', 'A', 'T'};
    uint32_t header[4] = {1u, static_cast<uint32_t>(lat.dim(0)), static_cast<uint32_t>(lat.dim(1)),
                          static_cast<uint32_t>(lat.dim(2))};
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(header), sizeof(header));
    f.write(reinterpret_cast<const char*>(lat.data()),
            static_cast<std::streamsize>(lat.size() * sizeof(float)));
    if (!f) throw IoError("short write to " + path);
}

LatentGrid load_latent(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    uint32_t header[4];
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!f || std::memcmp(magic, "LLAT", 4) != 0) {
        throw FormatError(path + ": bad LLAT magic at byte offset 0");
    }
    if (header[0] != 1) throw FormatError(path + ": unsupported LLAT version");
    int c = static_cast<int>(header[1]), h = static_cast<int>(header[2]),
        w = static_cast<int>(header[3]);
    if (c <= 0 || h <= 0 || w <= 0 || static_cast<size_t>(c) * h * w > (1u << 28)) {
        throw FormatError(path + ": implausible LLAT dims");
    }
    Tensor lat({c, h, w});
    f.read(reinterpret_cast<char*>(lat.data()),
           static_cast<std::streamsize>(lat.size() * sizeof(float)));
    if (!f) throw FormatError(path + ": truncated LLAT payload at byte offset 20");
    return lat;
}

}  // namespace layerlat
