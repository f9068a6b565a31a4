#pragma once

// Independent scalar-loop oracles used by the unit and acceptance tests.
// These must stay decoupled from the library's vectorized code paths.

#include <cmath>
#include <cstdint>
#include <vector>

#include "layerlat/tensor.hpp"

namespace oracle {

// Deterministic uniform/gauss source for test data.
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

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    float uniform(float lo, float hi) { return lo + static_cast<float>(uniform()) * (hi - lo); }
    int range(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1)); }
};

inline layerlat::Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f,
                                      float hi = 1.0f) {
    layerlat::Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Naive triple-loop matrix product.
inline layerlat::Tensor matmul(const layerlat::Tensor& a, const layerlat::Tensor& b) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    layerlat::Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < k; ++p) out.at(i, j) += a.at(i, p) * b.at(p, j);
    return out;
}

// Scalar-loop masked attention: Softmax(Q ((1-m-r) clamped ⊙ K)^T / sqrt(d)) V,
// computed in double precision per row.
inline layerlat::Tensor masked_attention(const layerlat::Tensor& q, const layerlat::Tensor& k,
                                         const layerlat::Tensor& v, const std::vector<float>& m,
                                         const std::vector<float>& r = {}) {
    const int n = q.dim(0), d = q.dim(1);
    layerlat::Tensor out({n, d});
    for (int i = 0; i < n; ++i) {
        std::vector<double> logits(static_cast<size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
            double masked = m.empty() ? 0.0 : m[static_cast<size_t>(j)];
            if (!r.empty()) masked = std::min(1.0, masked + r[static_cast<size_t>(j)]);
            double keep = 1.0 - masked;
            double dot = 0.0;
            for (int p = 0; p < d; ++p) {
                dot += static_cast<double>(q.at(i, p)) * (keep * k.at(j, p));
            }
            logits[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
        }
        double mx = logits[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, logits[static_cast<size_t>(j)]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(logits[static_cast<size_t>(j)] - mx);
        for (int p = 0; p < d; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += std::exp(logits[static_cast<size_t>(j)] - mx) / z * v.at(j, p);
            }
            out.at(i, p) = static_cast<float>(acc);
        }
    }
    return out;
}

inline float max_abs_diff(const layerlat::Tensor& a, const layerlat::Tensor& b) {
    float mx = 0.0f;
    for (size_t i = 0; i < a.size(); ++i) {
        mx = std::max(mx, std::fabs(a.data()[i] - b.data()[i]));
    }
    return mx;
}

inline bool bitwise_equal(const layerlat::Tensor& a, const layerlat::Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != b.data()[i]) return false;
    }
    return true;
}

}  // namespace oracle
