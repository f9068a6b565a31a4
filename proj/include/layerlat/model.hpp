#pragma once

#include "layerlat/attention.hpp"
#include "layerlat/tensor.hpp"

namespace layerlat {

// Epsilon-prediction interface consumed by the DDIM engine. `ctx` may be
// null (plain attention everywhere).
class EpsilonModel {
public:
    virtual ~EpsilonModel() = default;
    virtual Tensor epsilon(const Tensor& z, int t, const AttentionContext* ctx) const = 0;
};

}  // namespace layerlat
