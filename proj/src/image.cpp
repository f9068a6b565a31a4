#include "layerlat/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "layerlat/errors.hpp"

namespace layerlat {

size_t MaskGrid::count_ones() const {
    size_t n = 0;
    for (uint8_t v : values) n += v ? 1 : 0;
    return n;
}

Tensor MaskGrid::to_tensor() const {
    Tensor t({height, width});
    for (size_t i = 0; i < values.size(); ++i) t.data()[i] = values[i] ? 1.0f : 0.0f;
    return t;
}

MaskGrid MaskGrid::from_tensor(const Tensor& t) {
    if (t.rank() != 2) throw DimensionError("mask tensor must be h x w, got " + t.shape_str());
    MaskGrid m(t.dim(0), t.dim(1));
    for (size_t i = 0; i < t.size(); ++i) m.values[i] = t.data()[i] != 0.0f ? 1 : 0;
    return m;
}

MaskGrid mask_union(const MaskGrid& a, const MaskGrid& b) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError("mask_union dims differ");
    }
    MaskGrid out = a;
    for (size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (a.values[i] || b.values[i]) ? 1 : 0;
    }
    return out;
}

MaskGrid mask_intersection(const MaskGrid& a, const MaskGrid& b) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError("mask_intersection dims differ");
    }
    MaskGrid out = a;
    for (size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (a.values[i] && b.values[i]) ? 1 : 0;
    }
    return out;
}

namespace {

struct PnmHeader {
    int magic;  // 5 or 6
    int width;
    int height;
    size_t payload_offset;
};

// Parses "P5"/"P6", whitespace/comments, width height maxval, one ws byte.
PnmHeader parse_pnm_header(const std::vector<char>& buf, const std::string& path) {
    size_t pos = 0;
    auto fail = [&](const std::string& why) -> PnmHeader {
        throw FormatError(path + ": " + why + " at byte offset " + std::to_string(pos));
    };
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
        return fail("not a binary PGM/PPM header");
    }
    PnmHeader h{};
    h.magic = buf[1] - '0';
    pos = 2;
    auto skip_ws = [&]() {
        while (pos < buf.size()) {
            char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> int {
        skip_ws();
        if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9') fail("expected integer");
        long v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1 << 24) fail("integer out of range");
            ++pos;
        }
        return static_cast<int>(v);
    };
    h.width = read_int();
    h.height = read_int();
    int maxval = read_int();
    if (maxval != 255) fail("unsupported maxval " + std::to_string(maxval));
    if (pos >= buf.size()) fail("truncated header");
    ++pos;  // single whitespace byte after maxval
    h.payload_offset = pos;
    if (h.width <= 0 || h.height <= 0) fail("non-positive dimensions");
    return h;
}

std::vector<char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return buf;
}

void write_file(const std::string& path, const std::string& header, const uint8_t* payload,
                size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(payload), static_cast<std::streamsize>(n));
    if (!f) throw IoError("short write to " + path);
}

}  // namespace

void save_ppm(const ImageBuffer& img, const std::string& path) {
    std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                         "\n255\n";
    write_file(path, header, img.pixels.data(), img.pixels.size());
}

ImageBuffer load_ppm(const std::string& path) {
    auto buf = read_file(path);
    auto h = parse_pnm_header(buf, path);
    if (h.magic != 6) throw FormatError(path + ": expected P6, got P" + std::to_string(h.magic));
    size_t need = static_cast<size_t>(h.width) * h.height * 3;
    if (buf.size() - h.payload_offset < need) {
        throw FormatError(path + ": truncated payload at byte offset " +
                          std::to_string(buf.size()));
    }
    ImageBuffer img(h.height, h.width);
    std::copy(buf.begin() + static_cast<long>(h.payload_offset),
              buf.begin() + static_cast<long>(h.payload_offset + need),
              reinterpret_cast<char*>(img.pixels.data()));
    return img;
}

void save_pgm(const MaskGrid& mask, const std::string& path) {
    std::string header = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                         "\n255\n";
    std::vector<uint8_t> payload(mask.values.size());
    for (size_t i = 0; i < payload.size(); ++i) payload[i] = mask.values[i] ? 255 : 0;
    write_file(path, header, payload.data(), payload.size());
}

MaskGrid load_pgm(const std::string& path) {
    auto buf = read_file(path);
    auto h = parse_pnm_header(buf, path);
    if (h.magic != 5) throw FormatError(path + ": expected P5, got P" + std::to_string(h.magic));
    size_t need = static_cast<size_t>(h.width) * h.height;
    if (buf.size() - h.payload_offset < need) {
        throw FormatError(path + ": truncated payload at byte offset " +
                          std::to_string(buf.size()));
    }
    MaskGrid mask(h.height, h.width);
    for (size_t i = 0; i < need; ++i) {
        mask.values[i] = static_cast<uint8_t>(buf[h.payload_offset + i]) >= 128 ? 1 : 0;
    }
    return mask;
}

void save_heatmap(const Tensor& map, const std::string& path) {
    if (map.rank() != 2) throw DimensionError("heatmap must be h x w, got " + map.shape_str());
    float mn = map.data()[0], mx = map.data()[0];
    for (size_t i = 0; i < map.size(); ++i) {
        mn = std::min(mn, map.data()[i]);
        mx = std::max(mx, map.data()[i]);
    }
    std::vector<uint8_t> payload(map.size(), 0);
    if (mx > mn) {
        for (size_t i = 0; i < map.size(); ++i) {
            float v = (map.data()[i] - mn) / (mx - mn);
            payload[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    }
    std::string header = "P5\n" + std::to_string(map.dim(1)) + " " + std::to_string(map.dim(0)) +
                         "\n255\n";
    write_file(path, header, payload.data(), payload.size());
}

}  // namespace layerlat
