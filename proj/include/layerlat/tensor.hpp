#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "layerlat/errors.hpp"

namespace layerlat {

// Dense row-major float32 tensor. The only numeric container in the project;
// every latent, mask and attention matrix lives in one of these.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, float fill = 0.0f);

    static Tensor from_data(std::vector<int> shape, std::vector<float> data);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    float& at(int i) { return data_[idx(i)]; }
    float at(int i) const { return data_[idx(i)]; }
    float& at(int i, int j) { return data_[idx(i, j)]; }
    float at(int i, int j) const { return data_[idx(i, j)]; }
    float& at(int i, int j, int k) { return data_[idx(i, j, k)]; }
    float at(int i, int j, int k) const { return data_[idx(i, j, k)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const;

private:
    size_t idx(int i) const;
    size_t idx(int i, int j) const;
    size_t idx(int i, int j, int k) const;

    std::vector<int> shape_;
    std::vector<float> data_;
};

enum class ElemOp { Mul, Add, Sub };

// a: m x k, b: k x n. Fixed left-to-right summation over k.
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax over the last dimension with max-subtraction.
Tensor softmax_lastdim(const Tensor& x);

// Elementwise op. Shapes must match exactly, or one operand may be a
// (1 x h x w) or (h x w) mask broadcast over a (c x h x w) tensor.
Tensor elementwise(const Tensor& a, const Tensor& b, ElemOp op);

inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElemOp::Mul); }
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElemOp::Add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElemOp::Sub); }

Tensor scale(const Tensor& a, float s);

Tensor reshape(const Tensor& a, std::vector<int> new_shape);

// Permute axes; perm[i] names the source axis of output axis i.
Tensor permute(const Tensor& a, const std::vector<int>& perm);

// Extract a sub-block. starts/sizes must be fully in bounds.
Tensor slice(const Tensor& a, const std::vector<int>& starts, const std::vector<int>& sizes);

// Write src into dst at the given per-axis offsets, cropping any part of src
// that falls outside dst (offsets may be negative).
void paste_region(Tensor& dst, const Tensor& src, const std::vector<int>& offsets);

// Nearest-neighbour spatial resize of a (c x h x w) tensor,
// sampling src index floor(i * src / dst).
Tensor nearest_resize(const Tensor& x, int new_h, int new_w);

// Downsample an (h x w) binary mask; an output cell is 1 iff any covered
// input cell is 1. Coverage windows come from the nearest-resize index map,
// so nearest-upsampling the result always covers the original 1-set.
Tensor maxpool_downsample(const Tensor& mask, int new_h, int new_w);

bool all_finite(const Tensor& a);

}  // namespace layerlat
