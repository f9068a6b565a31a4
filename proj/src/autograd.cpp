#include "layerlat/autograd.hpp"

#include <cmath>

#include "layerlat/errors.hpp"

namespace layerlat::ag {

void Node::accumulate(const Tensor& g) {
    if (!requires_grad) return;
    if (grad.empty()) grad = Tensor(value.shape());
    for (size_t i = 0; i < grad.size(); ++i) grad.data()[i] += g.data()[i];
}

NodePtr Tape::record(Tensor value, std::vector<NodePtr> inputs, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(fn);
    for (const auto& in : n->inputs) {
        if (in->requires_grad) n->requires_grad = true;
    }
    order_.push_back(n);
    return n;
}

NodePtr Tape::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    order_.push_back(n);
    return n;
}

NodePtr Tape::conv2d(NodePtr x, NodePtr w, NodePtr b, int stride, int pad) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.rank() != 3 || wv.rank() != 4 || wv.dim(1) != xv.dim(0)) {
        throw DimensionError("conv2d shapes: x " + xv.shape_str() + " w " + wv.shape_str());
    }
    const int ci = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
    const int co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (ww + 2 * pad - kw) / stride + 1;
    // Valid output range for a kernel offset: 0 <= o*stride + k - pad < in.
    auto lo = [&](int k, int) { return std::max(0, (pad - k + stride - 1) / stride); };
    auto hi = [&](int k, int in, int on) { return std::min(on - 1, (in - 1 + pad - k) / stride); };
    Tensor out({co, oh, ow});
    {
        const float* xp = xv.data();
        const float* wp = wv.data();
        float* op = out.data();
        for (int oc = 0; oc < co; ++oc) {
            float* oc_base = op + static_cast<size_t>(oc) * oh * ow;
            const float bias = b->value[static_cast<size_t>(oc)];
            for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) oc_base[i] = bias;
            for (int ic = 0; ic < ci; ++ic) {
                const float* ic_base = xp + static_cast<size_t>(ic) * h * ww;
                const float* w_base = wp + (static_cast<size_t>(oc) * ci + ic) * kh * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy0 = lo(ky, h), oy1 = hi(ky, h, oh);
                    for (int kx = 0; kx < kw; ++kx) {
                        const float wgt = w_base[ky * kw + kx];
                        const int ox0 = lo(kx, ww), ox1 = hi(kx, ww, ow);
                        for (int oy = oy0; oy <= oy1; ++oy) {
                            const float* xrow = ic_base +
                                                static_cast<size_t>(oy * stride + ky - pad) * ww +
                                                (ox0 * stride + kx - pad);
                            float* orow = oc_base + static_cast<size_t>(oy) * ow + ox0;
                            if (stride == 1) {
                                for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                    orow[ox] += wgt * xrow[ox];
                                }
                            } else {
                                for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                    orow[ox] += wgt * xrow[ox * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return record(std::move(out), {x, w, b}, [stride, pad](Node& n) {
        NodePtr x = n.inputs[0], w = n.inputs[1], b = n.inputs[2];
        const Tensor& xv = x->value;
        const Tensor& wv = w->value;
        const Tensor& g = n.grad;
        const int ci = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
        const int co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
        const int oh = n.value.dim(1), ow = n.value.dim(2);
        if (b->requires_grad) {
            Tensor db(b->value.shape());
            for (int oc = 0; oc < co; ++oc) {
                float acc = 0.0f;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) acc += g.at(oc, oy, ox);
                db[static_cast<size_t>(oc)] = acc;
            }
            b->accumulate(db);
        }
        auto lo = [&](int k) { return std::max(0, (pad - k + stride - 1) / stride); };
        auto hi = [&](int k, int in, int on) {
            return std::min(on - 1, (in - 1 + pad - k) / stride);
        };
        if (w->requires_grad) {
            Tensor dw(wv.shape());
            const float* xp = xv.data();
            const float* gp = g.data();
            float* dwp = dw.data();
            for (int oc = 0; oc < co; ++oc) {
                const float* g_base = gp + static_cast<size_t>(oc) * oh * ow;
                for (int ic = 0; ic < ci; ++ic) {
                    const float* x_base = xp + static_cast<size_t>(ic) * h * ww;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy0 = lo(ky), oy1 = hi(ky, h, oh);
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ox0 = lo(kx), ox1 = hi(kx, ww, ow);
                            float acc = 0.0f;
                            for (int oy = oy0; oy <= oy1; ++oy) {
                                const float* xrow =
                                    x_base + static_cast<size_t>(oy * stride + ky - pad) * ww +
                                    (ox0 * stride + kx - pad);
                                const float* grow = g_base + static_cast<size_t>(oy) * ow + ox0;
                                if (stride == 1) {
                                    for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                        acc += xrow[ox] * grow[ox];
                                    }
                                } else {
                                    for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                        acc += xrow[ox * stride] * grow[ox];
                                    }
                                }
                            }
                            dwp[((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw + kx] = acc;
                        }
                    }
                }
            }
            w->accumulate(dw);
        }
        if (x->requires_grad) {
            Tensor dx(xv.shape());
            const float* gp = g.data();
            const float* wp = wv.data();
            float* dxp = dx.data();
            for (int oc = 0; oc < co; ++oc) {
                const float* g_base = gp + static_cast<size_t>(oc) * oh * ow;
                for (int ic = 0; ic < ci; ++ic) {
                    float* dx_base = dxp + static_cast<size_t>(ic) * h * ww;
                    const float* w_base = wp + (static_cast<size_t>(oc) * ci + ic) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy0 = lo(ky), oy1 = hi(ky, h, oh);
                        for (int kx = 0; kx < kw; ++kx) {
                            const float wgt = w_base[ky * kw + kx];
                            const int ox0 = lo(kx), ox1 = hi(kx, ww, ow);
                            for (int oy = oy0; oy <= oy1; ++oy) {
                                float* dxrow =
                                    dx_base + static_cast<size_t>(oy * stride + ky - pad) * ww +
                                    (ox0 * stride + kx - pad);
                                const float* grow = g_base + static_cast<size_t>(oy) * ow + ox0;
                                if (stride == 1) {
                                    for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                        dxrow[ox] += wgt * grow[ox];
                                    }
                                } else {
                                    for (int ox = 0; ox <= ox1 - ox0; ++ox) {
                                        dxrow[ox * stride] += wgt * grow[ox];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            x->accumulate(dx);
        }
    });
}

NodePtr Tape::group_norm(NodePtr x, NodePtr gamma, NodePtr beta, int groups) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3 || xv.dim(0) % groups != 0) {
        throw DimensionError("group_norm: channels " + xv.shape_str() + " vs groups " +
                             std::to_string(groups));
    }
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const int cpg = c / groups;
    const size_t gsize = static_cast<size_t>(cpg) * h * w;
    const float eps = 1e-5f;
    auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(groups));
    auto istd = std::make_shared<std::vector<float>>(static_cast<size_t>(groups));
    Tensor out(xv.shape());
    for (int g = 0; g < groups; ++g) {
        const float* base = xv.data() + static_cast<size_t>(g) * gsize;
        double mu = 0.0;
        for (size_t i = 0; i < gsize; ++i) mu += base[i];
        mu /= static_cast<double>(gsize);
        double var = 0.0;
        for (size_t i = 0; i < gsize; ++i) {
            double d = base[i] - mu;
            var += d * d;
        }
        var /= static_cast<double>(gsize);
        float is = 1.0f / std::sqrt(static_cast<float>(var) + eps);
        (*mean)[static_cast<size_t>(g)] = static_cast<float>(mu);
        (*istd)[static_cast<size_t>(g)] = is;
        for (int ch = 0; ch < cpg; ++ch) {
            int cc = g * cpg + ch;
            float ga = gamma->value[static_cast<size_t>(cc)];
            float be = beta->value[static_cast<size_t>(cc)];
            for (int i = 0; i < h * w; ++i) {
                size_t off = (static_cast<size_t>(cc) * h * w) + static_cast<size_t>(i);
                out.data()[off] = ga * (xv.data()[off] - static_cast<float>(mu)) * is + be;
            }
        }
    }
    return record(std::move(out), {x, gamma, beta}, [groups, mean, istd](Node& n) {
        NodePtr x = n.inputs[0], gamma = n.inputs[1], beta = n.inputs[2];
        const Tensor& xv = x->value;
        const Tensor& g = n.grad;
        const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
        const int cpg = c / groups;
        const size_t hw = static_cast<size_t>(h) * w;
        const size_t gsize = static_cast<size_t>(cpg) * hw;
        Tensor dgamma({c}), dbeta({c});
        Tensor dx(xv.shape());
        for (int gi = 0; gi < groups; ++gi) {
            float mu = (*mean)[static_cast<size_t>(gi)];
            float is = (*istd)[static_cast<size_t>(gi)];
            // s1 = mean over group of (gamma*dy), s2 = mean of (gamma*dy * xhat)
            double s1 = 0.0, s2 = 0.0;
            for (int ch = 0; ch < cpg; ++ch) {
                int cc = gi * cpg + ch;
                float ga = gamma->value[static_cast<size_t>(cc)];
                for (size_t i = 0; i < hw; ++i) {
                    size_t off = static_cast<size_t>(cc) * hw + i;
                    float xhat = (xv.data()[off] - mu) * is;
                    float dy = g.data()[off];
                    dbeta[static_cast<size_t>(cc)] += dy;
                    dgamma[static_cast<size_t>(cc)] += dy * xhat;
                    s1 += static_cast<double>(ga) * dy;
                    s2 += static_cast<double>(ga) * dy * xhat;
                }
            }
            s1 /= static_cast<double>(gsize);
            s2 /= static_cast<double>(gsize);
            for (int ch = 0; ch < cpg; ++ch) {
                int cc = gi * cpg + ch;
                float ga = gamma->value[static_cast<size_t>(cc)];
                for (size_t i = 0; i < hw; ++i) {
                    size_t off = static_cast<size_t>(cc) * hw + i;
                    float xhat = (xv.data()[off] - mu) * is;
                    float dy = g.data()[off];
                    dx.data()[off] = is * (ga * dy - static_cast<float>(s1) -
                                           xhat * static_cast<float>(s2));
                }
            }
        }
        gamma->accumulate(dgamma);
        beta->accumulate(dbeta);
        x->accumulate(dx);
    });
}

NodePtr Tape::silu(NodePtr x) {
    Tensor out = x->value;
    for (size_t i = 0; i < out.size(); ++i) {
        float v = out.data()[i];
        out.data()[i] = v / (1.0f + std::exp(-v));
    }
    return record(std::move(out), {x}, [](Node& n) {
        NodePtr x = n.inputs[0];
        if (!x->requires_grad) return;
        Tensor dx(x->value.shape());
        for (size_t i = 0; i < dx.size(); ++i) {
            float v = x->value.data()[i];
            float s = 1.0f / (1.0f + std::exp(-v));
            dx.data()[i] = n.grad.data()[i] * s * (1.0f + v * (1.0f - s));
        }
        x->accumulate(dx);
    });
}

NodePtr Tape::linear(NodePtr x, NodePtr w, NodePtr b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0)) {
        throw DimensionError("linear shapes: x " + xv.shape_str() + " w " + wv.shape_str());
    }
    Tensor out = layerlat::matmul(xv, wv);
    const int n = out.dim(0), o = out.dim(1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) out.at(i, j) += b->value[static_cast<size_t>(j)];
    return record(std::move(out), {x, w, b}, [](Node& n2) {
        NodePtr x = n2.inputs[0], w = n2.inputs[1], b = n2.inputs[2];
        const Tensor& g = n2.grad;
        if (b->requires_grad) {
            Tensor db(b->value.shape());
            for (int i = 0; i < g.dim(0); ++i)
                for (int j = 0; j < g.dim(1); ++j) db[static_cast<size_t>(j)] += g.at(i, j);
            b->accumulate(db);
        }
        if (w->requires_grad) {
            w->accumulate(layerlat::matmul(layerlat::permute(x->value, {1, 0}), g));
        }
        if (x->requires_grad) {
            x->accumulate(layerlat::matmul(g, layerlat::permute(w->value, {1, 0})));
        }
    });
}

NodePtr Tape::add(NodePtr a, NodePtr b) {
    if (!a->value.same_shape(b->value)) {
        throw DimensionError("add shapes differ: " + a->value.shape_str() + " vs " +
                             b->value.shape_str());
    }
    Tensor out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] += b->value.data()[i];
    return record(std::move(out), {a, b}, [](Node& n) {
        n.inputs[0]->accumulate(n.grad);
        n.inputs[1]->accumulate(n.grad);
    });
}

NodePtr Tape::add_channel_bias(NodePtr x, NodePtr bias) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3 || bias->value.rank() != 1 || bias->value.dim(0) != xv.dim(0)) {
        throw DimensionError("add_channel_bias shapes: " + xv.shape_str() + " vs " +
                             bias->value.shape_str());
    }
    Tensor out = xv;
    const size_t hw = static_cast<size_t>(xv.dim(1)) * xv.dim(2);
    for (int c = 0; c < xv.dim(0); ++c) {
        float bv = bias->value[static_cast<size_t>(c)];
        for (size_t i = 0; i < hw; ++i) out.data()[static_cast<size_t>(c) * hw + i] += bv;
    }
    return record(std::move(out), {x, bias}, [](Node& n) {
        NodePtr x = n.inputs[0], bias = n.inputs[1];
        x->accumulate(n.grad);
        if (!bias->requires_grad) return;
        const size_t hw = static_cast<size_t>(x->value.dim(1)) * x->value.dim(2);
        Tensor db(bias->value.shape());
        for (int c = 0; c < x->value.dim(0); ++c) {
            float acc = 0.0f;
            for (size_t i = 0; i < hw; ++i) acc += n.grad.data()[static_cast<size_t>(c) * hw + i];
            db[static_cast<size_t>(c)] = acc;
        }
        bias->accumulate(db);
    });
}

NodePtr Tape::matmul(NodePtr a, NodePtr b) {
    Tensor out = layerlat::matmul(a->value, b->value);
    return record(std::move(out), {a, b}, [](Node& n) {
        NodePtr a = n.inputs[0], b = n.inputs[1];
        if (a->requires_grad) {
            a->accumulate(layerlat::matmul(n.grad, layerlat::permute(b->value, {1, 0})));
        }
        if (b->requires_grad) {
            b->accumulate(layerlat::matmul(layerlat::permute(a->value, {1, 0}), n.grad));
        }
    });
}

NodePtr Tape::transpose2d(NodePtr a) {
    Tensor out = layerlat::permute(a->value, {1, 0});
    return record(std::move(out), {a}, [](Node& n) {
        n.inputs[0]->accumulate(layerlat::permute(n.grad, {1, 0}));
    });
}

NodePtr Tape::reshape(NodePtr a, std::vector<int> shape) {
    Tensor out = layerlat::reshape(a->value, shape);
    return record(std::move(out), {a}, [](Node& n) {
        n.inputs[0]->accumulate(layerlat::reshape(n.grad, n.inputs[0]->value.shape()));
    });
}

NodePtr Tape::scale(NodePtr a, float s) {
    Tensor out = layerlat::scale(a->value, s);
    return record(std::move(out), {a}, [s](Node& n) {
        n.inputs[0]->accumulate(layerlat::scale(n.grad, s));
    });
}

NodePtr Tape::softmax_lastdim(NodePtr a) {
    Tensor out = layerlat::softmax_lastdim(a->value);
    return record(std::move(out), {a}, [](Node& n) {
        NodePtr a = n.inputs[0];
        if (!a->requires_grad) return;
        const int last = n.value.dim(n.value.rank() - 1);
        const size_t rows = n.value.size() / static_cast<size_t>(last);
        Tensor dx(a->value.shape());
        for (size_t r = 0; r < rows; ++r) {
            const float* y = n.value.data() + r * static_cast<size_t>(last);
            const float* dy = n.grad.data() + r * static_cast<size_t>(last);
            float dot = 0.0f;
            for (int j = 0; j < last; ++j) dot += y[j] * dy[j];
            float* out = dx.data() + r * static_cast<size_t>(last);
            for (int j = 0; j < last; ++j) out[j] = y[j] * (dy[j] - dot);
        }
        a->accumulate(dx);
    });
}

NodePtr Tape::nearest_upsample2x(NodePtr x) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw DimensionError("nearest_upsample2x expects c x h x w");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out({c, h * 2, w * 2});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h * 2; ++y)
            for (int xx = 0; xx < w * 2; ++xx) out.at(ch, y, xx) = xv.at(ch, y / 2, xx / 2);
    return record(std::move(out), {x}, [](Node& n) {
        NodePtr x = n.inputs[0];
        if (!x->requires_grad) return;
        const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
        Tensor dx(x->value.shape());
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h * 2; ++y)
                for (int xx = 0; xx < w * 2; ++xx) dx.at(ch, y / 2, xx / 2) += n.grad.at(ch, y, xx);
        x->accumulate(dx);
    });
}

NodePtr Tape::mse_loss(NodePtr pred, NodePtr target) {
    if (!pred->value.same_shape(target->value)) {
        throw DimensionError("mse_loss shapes differ");
    }
    double acc = 0.0;
    for (size_t i = 0; i < pred->value.size(); ++i) {
        double d = pred->value.data()[i] - target->value.data()[i];
        acc += d * d;
    }
    Tensor out({1});
    out[0] = static_cast<float>(acc / static_cast<double>(pred->value.size()));
    return record(std::move(out), {pred, target}, [](Node& n) {
        NodePtr pred = n.inputs[0], target = n.inputs[1];
        if (!pred->requires_grad) return;
        const float s = 2.0f / static_cast<float>(pred->value.size()) * n.grad[0];
        Tensor dp(pred->value.shape());
        for (size_t i = 0; i < dp.size(); ++i) {
            dp.data()[i] = s * (pred->value.data()[i] - target->value.data()[i]);
        }
        pred->accumulate(dp);
    });
}

void Tape::backward(NodePtr loss) {
    loss->grad = Tensor(loss->value.shape(), 1.0f);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node& n = **it;
        if (!n.requires_grad || n.grad.empty() || !n.backward_fn) continue;
        n.backward_fn(n);
    }
}

}  // namespace layerlat::ag
