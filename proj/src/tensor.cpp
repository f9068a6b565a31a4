#include "layerlat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace layerlat {

namespace {

size_t checked_product(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw DimensionError("tensor dimension must be positive, got " + std::to_string(d));
        }
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::string shape_to_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(checked_product(shape_), fill) {}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data) {
    Tensor t;
    size_t n = checked_product(shape);
    if (n != data.size()) {
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_to_str(shape));
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

std::string Tensor::shape_str() const { return shape_to_str(shape_); }

size_t Tensor::idx(int i) const { return static_cast<size_t>(i); }

size_t Tensor::idx(int i, int j) const {
    return static_cast<size_t>(i) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(j);
}

size_t Tensor::idx(int i, int j, int k) const {
    return (static_cast<size_t>(i) * static_cast<size_t>(shape_[1]) + static_cast<size_t>(j)) *
               static_cast<size_t>(shape_[2]) +
           static_cast<size_t>(k);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_str() + " and " +
                             b.shape_str());
    }
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul inner dimensions differ: " + a.shape_str() + " vs " +
                             b.shape_str());
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    // k-outer / j-inner keeps the per-element left-to-right k summation while
    // making every access contiguous.
    for (int i = 0; i < m; ++i) {
        float* orow = po + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = pa[static_cast<size_t>(i) * k + p];
            const float* brow = pb + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() < 1) throw DimensionError("softmax_lastdim on rank-0 tensor");
    const int last = x.dim(x.rank() - 1);
    const size_t rows = x.size() / static_cast<size_t>(last);
    Tensor out = x;
    float* p = out.data();
    for (size_t r = 0; r < rows; ++r) {
        float* row = p + r * static_cast<size_t>(last);
        float mx = row[0];
        for (int j = 1; j < last; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int j = 0; j < last; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < last; ++j) row[j] /= sum;
    }
    return out;
}

namespace {

// Returns true if `small` broadcasts over `big` as a spatial mask:
// (1 x h x w) or (h x w) against (c x h x w).
bool mask_broadcastable(const Tensor& small, const Tensor& big) {
    if (big.rank() != 3) return false;
    if (small.rank() == 3 && small.dim(0) == 1 && small.dim(1) == big.dim(1) &&
        small.dim(2) == big.dim(2)) {
        return true;
    }
    if (small.rank() == 2 && small.dim(0) == big.dim(1) && small.dim(1) == big.dim(2)) {
        return true;
    }
    return false;
}

float apply_op(float x, float y, ElemOp op) {
    switch (op) {
        case ElemOp::Mul: return x * y;
        case ElemOp::Add: return x + y;
        case ElemOp::Sub: return x - y;
    }
    return 0.0f;
}

}  // namespace

Tensor elementwise(const Tensor& a, const Tensor& b, ElemOp op) {
    if (a.same_shape(b)) {
        Tensor out = a;
        float* po = out.data();
        const float* pb = b.data();
        for (size_t i = 0; i < out.size(); ++i) po[i] = apply_op(po[i], pb[i], op);
        return out;
    }
    if (mask_broadcastable(b, a)) {
        Tensor out = a;
        const int c = a.dim(0);
        const size_t hw = static_cast<size_t>(a.dim(1)) * static_cast<size_t>(a.dim(2));
        float* po = out.data();
        const float* pb = b.data();
        for (int ch = 0; ch < c; ++ch) {
            for (size_t i = 0; i < hw; ++i) {
                po[static_cast<size_t>(ch) * hw + i] =
                    apply_op(po[static_cast<size_t>(ch) * hw + i], pb[i], op);
            }
        }
        return out;
    }
    if (mask_broadcastable(a, b)) {
        Tensor out = b;
        const int c = b.dim(0);
        const size_t hw = static_cast<size_t>(b.dim(1)) * static_cast<size_t>(b.dim(2));
        float* po = out.data();
        const float* pa = a.data();
        for (int ch = 0; ch < c; ++ch) {
            for (size_t i = 0; i < hw; ++i) {
                size_t o = static_cast<size_t>(ch) * hw + i;
                po[o] = apply_op(pa[i], po[o], op);
            }
        }
        return out;
    }
    throw DimensionError("elementwise shapes incompatible: " + a.shape_str() + " vs " +
                         b.shape_str());
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

Tensor reshape(const Tensor& a, std::vector<int> new_shape) {
    size_t n = checked_product(new_shape);
    if (n != a.size()) {
        throw DimensionError("reshape " + a.shape_str() + " to incompatible " +
                             shape_to_str(new_shape));
    }
    return Tensor::from_data(std::move(new_shape), a.vec());
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    const int r = a.rank();
    if (static_cast<int>(perm.size()) != r) {
        throw DimensionError("permute rank mismatch for " + a.shape_str());
    }
    std::vector<bool> seen(static_cast<size_t>(r), false);
    std::vector<int> out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        int p = perm[static_cast<size_t>(i)];
        if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) {
            throw DimensionError("invalid permutation axis " + std::to_string(p));
        }
        seen[static_cast<size_t>(p)] = true;
        out_shape[static_cast<size_t>(i)] = a.dim(p);
    }
    // Source strides, then walk the output in row-major order.
    std::vector<size_t> src_stride(static_cast<size_t>(r), 1);
    for (int i = r - 2; i >= 0; --i) {
        src_stride[static_cast<size_t>(i)] =
            src_stride[static_cast<size_t>(i + 1)] * static_cast<size_t>(a.dim(i + 1));
    }
    Tensor out(out_shape);
    std::vector<int> coord(static_cast<size_t>(r), 0);
    for (size_t o = 0; o < out.size(); ++o) {
        size_t s = 0;
        for (int i = 0; i < r; ++i) {
            s += static_cast<size_t>(coord[static_cast<size_t>(i)]) *
                 src_stride[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        }
        out.data()[o] = a.data()[s];
        for (int i = r - 1; i >= 0; --i) {
            if (++coord[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
            coord[static_cast<size_t>(i)] = 0;
        }
    }
    return out;
}

Tensor slice(const Tensor& a, const std::vector<int>& starts, const std::vector<int>& sizes) {
    const int r = a.rank();
    if (static_cast<int>(starts.size()) != r || static_cast<int>(sizes.size()) != r) {
        throw DimensionError("slice rank mismatch for " + a.shape_str());
    }
    for (int i = 0; i < r; ++i) {
        if (starts[static_cast<size_t>(i)] < 0 || sizes[static_cast<size_t>(i)] <= 0 ||
            starts[static_cast<size_t>(i)] + sizes[static_cast<size_t>(i)] > a.dim(i)) {
            throw DimensionError("slice out of bounds on axis " + std::to_string(i) + " of " +
                                 a.shape_str());
        }
    }
    std::vector<size_t> src_stride(static_cast<size_t>(r), 1);
    for (int i = r - 2; i >= 0; --i) {
        src_stride[static_cast<size_t>(i)] =
            src_stride[static_cast<size_t>(i + 1)] * static_cast<size_t>(a.dim(i + 1));
    }
    Tensor out(sizes);
    std::vector<int> coord(static_cast<size_t>(r), 0);
    for (size_t o = 0; o < out.size(); ++o) {
        size_t s = 0;
        for (int i = 0; i < r; ++i) {
            s += static_cast<size_t>(starts[static_cast<size_t>(i)] + coord[static_cast<size_t>(i)]) *
                 src_stride[static_cast<size_t>(i)];
        }
        out.data()[o] = a.data()[s];
        for (int i = r - 1; i >= 0; --i) {
            if (++coord[static_cast<size_t>(i)] < sizes[static_cast<size_t>(i)]) break;
            coord[static_cast<size_t>(i)] = 0;
        }
    }
    return out;
}

void paste_region(Tensor& dst, const Tensor& src, const std::vector<int>& offsets) {
    const int r = dst.rank();
    if (src.rank() != r || static_cast<int>(offsets.size()) != r) {
        throw DimensionError("paste_region rank mismatch: " + dst.shape_str() + " vs " +
                             src.shape_str());
    }
    std::vector<size_t> dst_stride(static_cast<size_t>(r), 1), src_stride(static_cast<size_t>(r), 1);
    for (int i = r - 2; i >= 0; --i) {
        dst_stride[static_cast<size_t>(i)] =
            dst_stride[static_cast<size_t>(i + 1)] * static_cast<size_t>(dst.dim(i + 1));
        src_stride[static_cast<size_t>(i)] =
            src_stride[static_cast<size_t>(i + 1)] * static_cast<size_t>(src.dim(i + 1));
    }
    // Overlap window in src coordinates.
    std::vector<int> lo(static_cast<size_t>(r)), hi(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        lo[static_cast<size_t>(i)] = std::max(0, -offsets[static_cast<size_t>(i)]);
        hi[static_cast<size_t>(i)] =
            std::min(src.dim(i), dst.dim(i) - offsets[static_cast<size_t>(i)]);
        if (lo[static_cast<size_t>(i)] >= hi[static_cast<size_t>(i)]) return;  // no overlap
    }
    std::vector<int> coord = lo;
    while (true) {
        size_t si = 0, di = 0;
        for (int i = 0; i < r; ++i) {
            si += static_cast<size_t>(coord[static_cast<size_t>(i)]) * src_stride[static_cast<size_t>(i)];
            di += static_cast<size_t>(coord[static_cast<size_t>(i)] + offsets[static_cast<size_t>(i)]) *
                  dst_stride[static_cast<size_t>(i)];
        }
        dst.data()[di] = src.data()[si];
        int axis = r - 1;
        for (; axis >= 0; --axis) {
            if (++coord[static_cast<size_t>(axis)] < hi[static_cast<size_t>(axis)]) break;
            coord[static_cast<size_t>(axis)] = lo[static_cast<size_t>(axis)];
        }
        if (axis < 0) break;
    }
}

Tensor nearest_resize(const Tensor& x, int new_h, int new_w) {
    if (x.rank() != 3) throw DimensionError("nearest_resize expects c x h x w, got " + x.shape_str());
    if (new_h <= 0 || new_w <= 0) {
        throw DimensionError("nearest_resize target dims must be positive");
    }
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, new_h, new_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < new_h; ++i) {
            int si = static_cast<int>(static_cast<long long>(i) * h / new_h);
            for (int j = 0; j < new_w; ++j) {
                int sj = static_cast<int>(static_cast<long long>(j) * w / new_w);
                out.at(ch, i, j) = x.at(ch, si, sj);
            }
        }
    }
    return out;
}

Tensor maxpool_downsample(const Tensor& mask, int new_h, int new_w) {
    if (mask.rank() != 2) {
        throw DimensionError("maxpool_downsample expects h x w, got " + mask.shape_str());
    }
    if (new_h <= 0 || new_w <= 0) {
        throw DimensionError("maxpool_downsample target dims must be positive");
    }
    const int h = mask.dim(0), w = mask.dim(1);
    Tensor out({new_h, new_w});
    // Output cell (i,j) covers exactly the source cells that nearest-resize
    // back to it, so a nearest upsample of the result covers the input 1-set.
    for (int r = 0; r < h; ++r) {
        int i = static_cast<int>(static_cast<long long>(r) * new_h / h);
        for (int c = 0; c < w; ++c) {
            if (mask.at(r, c) == 0.0f) continue;
            int j = static_cast<int>(static_cast<long long>(c) * new_w / w);
            out.at(i, j) = 1.0f;
        }
    }
    return out;
}

bool all_finite(const Tensor& a) {
    for (size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a.data()[i])) return false;
    }
    return true;
}

}  // namespace layerlat
