// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flank/errors.hpp"
#include "flank/rng.hpp"

namespace flank {

/// Dense row-major tensor.
template <typename T>
struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::uint32_t> s) : shape(std::move(s)) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        data.assign(n, T(0));
    }
    std::size_t size() const { return data.size(); }
};

/// conv 3x3 (pad 1, stride 1) + rectifier + 2x2 max-pool, one freeze unit.
template <typename T>
struct ConvBlock {
    int in_ch = 0, out_ch = 0;
    Tensor<T> weight;  // [out_ch, in_ch, 3, 3]
    Tensor<T> bias;    // [out_ch]
};

/// Fully connected layer; `rectified` selects the hidden-layer variant. The
/// final block is the 2-way head, whose logits go through softmax.
template <typename T>
struct DenseBlock {
    int in_dim = 0, out_dim = 0;
    bool rectified = true;
    Tensor<T> weight;  // [out_dim, in_dim]
    Tensor<T> bias;    // [out_dim]
};

/// Ordered conv blocks followed by dense blocks; the last dense block is
/// always the binary classification head. layer_count() is the freeze
/// granularity used by the two-phase schedule.
template <typename T>
struct LayeredModelT {
    int input_size = 0;  // square side; channels fixed at 3
    std::vector<ConvBlock<T>> conv_blocks;
    std::vector<DenseBlock<T>> dense_blocks;

    int layer_count() const {
        return static_cast<int>(conv_blocks.size() + dense_blocks.size());
    }

    /// Parameter tensors of freeze layer i, weight first.
    std::vector<Tensor<T>*> layer_params(int i) {
        const int nc = static_cast<int>(conv_blocks.size());
        if (i < nc) return {&conv_blocks[i].weight, &conv_blocks[i].bias};
        auto& d = dense_blocks[i - nc];
        return {&d.weight, &d.bias};
    }
    std::vector<const Tensor<T>*> layer_params(int i) const {
        const int nc = static_cast<int>(conv_blocks.size());
        if (i < nc) return {&conv_blocks[i].weight, &conv_blocks[i].bias};
        const auto& d = dense_blocks[i - nc];
        return {&d.weight, &d.bias};
    }

    std::vector<Tensor<T>*> all_params() {
        std::vector<Tensor<T>*> out;
        for (int i = 0; i < layer_count(); ++i)
            for (auto* t : layer_params(i)) out.push_back(t);
        return out;
    }

    template <typename U>
    LayeredModelT<U> cast() const {
        LayeredModelT<U> out;
        out.input_size = input_size;
        for (const auto& c : conv_blocks) {
            ConvBlock<U> b;
            b.in_ch = c.in_ch;
            b.out_ch = c.out_ch;
            b.weight.shape = c.weight.shape;
            b.weight.data.assign(c.weight.data.begin(), c.weight.data.end());
            b.bias.shape = c.bias.shape;
            b.bias.data.assign(c.bias.data.begin(), c.bias.data.end());
            out.conv_blocks.push_back(std::move(b));
        }
        for (const auto& d : dense_blocks) {
            DenseBlock<U> b;
            b.in_dim = d.in_dim;
            b.out_dim = d.out_dim;
            b.rectified = d.rectified;
            b.weight.shape = d.weight.shape;
            b.weight.data.assign(d.weight.data.begin(), d.weight.data.end());
            b.bias.shape = d.bias.shape;
            b.bias.data.assign(d.bias.data.begin(), d.bias.data.end());
            out.dense_blocks.push_back(std::move(b));
        }
        return out;
    }
};

using LayeredModel = LayeredModelT<float>;

/// Gradients with the same tensor layout as the model parameters, indexed as
/// grads[layer][tensor].
template <typename T>
using GradSet = std::vector<std::vector<Tensor<T>>>;

template <typename T>
GradSet<T> zero_grads(const LayeredModelT<T>& model) {
    GradSet<T> g(model.layer_count());
    for (int i = 0; i < model.layer_count(); ++i)
        for (const Tensor<T>* p : model.layer_params(i)) g[i].push_back(Tensor<T>(p->shape));
    return g;
}

namespace detail {

// Glorot-style uniform bound for one weight tensor.
template <typename T>
void init_uniform(Tensor<T>& t, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
ConvBlock<T> make_conv(int in_ch, int out_ch) {
    ConvBlock<T> b;
    b.in_ch = in_ch;
    b.out_ch = out_ch;
    b.weight = Tensor<T>({static_cast<std::uint32_t>(out_ch),
                          static_cast<std::uint32_t>(in_ch), 3, 3});
    b.bias = Tensor<T>({static_cast<std::uint32_t>(out_ch)});
    return b;
}

template <typename T>
DenseBlock<T> make_dense(int in_dim, int out_dim, bool rectified) {
    DenseBlock<T> b;
    b.in_dim = in_dim;
    b.out_dim = out_dim;
    b.rectified = rectified;
    b.weight = Tensor<T>({static_cast<std::uint32_t>(out_dim),
                          static_cast<std::uint32_t>(in_dim)});
    b.bias = Tensor<T>({static_cast<std::uint32_t>(out_dim)});
    return b;
}

}  // namespace detail

/// Builds a model with the given conv channel progression and hidden dense
/// width for 3-channel square inputs. Weight tensors drawn uniform in
/// +-sqrt(6/(fan_in+fan_out)), biases zero, all draws seeded.
template <typename T>
LayeredModelT<T> make_model(int input_size, const std::vector<int>& conv_channels,
                            int hidden_dim, std::uint64_t seed) {
    LayeredModelT<T> model;
    model.input_size = input_size;
    int ch = 3;
    int spatial = input_size;
    std::uint64_t stream = 0;
    for (int out_ch : conv_channels) {
        auto b = detail::make_conv<T>(ch, out_ch);
        Rng rng(mix_seed(seed, stream++));
        detail::init_uniform(b.weight, ch * 9, out_ch * 9, rng);
        model.conv_blocks.push_back(std::move(b));
        ch = out_ch;
        if (spatial % 2 != 0)
            throw Error("input size not divisible by the pooling pyramid");
        spatial /= 2;
    }
    const int flat = spatial * spatial * ch;
    {
        auto b = detail::make_dense<T>(flat, hidden_dim, true);
        Rng rng(mix_seed(seed, stream++));
        detail::init_uniform(b.weight, flat, hidden_dim, rng);
        model.dense_blocks.push_back(std::move(b));
    }
    {
        auto b = detail::make_dense<T>(hidden_dim, 2, false);
        Rng rng(mix_seed(seed, stream++));
        detail::init_uniform(b.weight, hidden_dim, 2, rng);
        model.dense_blocks.push_back(std::move(b));
    }
    return model;
}

/// The documented 5-layer reference architecture: three conv blocks
/// (3->8->16->32), a 64-wide rectified dense layer, and the 2-way head.
inline LayeredModel reference_model(int input_size, std::uint64_t seed) {
    if (input_size != 32 && input_size != 64 && input_size != 128)
        throw Error("reference_model supports input sizes 32, 64, 128");
    return make_model<float>(input_size, {8, 16, 32}, 64, seed);
}

// ---------------------------------------------------------------------------
// forward / backward

template <typename T>
struct SampleCache {
    // per conv block: input, pre-rectifier output, pooled output, argmax idx
    std::vector<std::vector<T>> conv_in;
    std::vector<std::vector<T>> conv_pre;
    std::vector<std::vector<T>> pooled;
    std::vector<std::vector<std::uint8_t>> pool_arg;  // 0..3 within 2x2 window
    std::vector<std::vector<T>> dense_in;
    std::vector<std::vector<T>> dense_pre;  // pre-rectifier / logits
    T probs[2] = {T(0), T(0)};
};

namespace detail {

template <typename T>
void conv3x3_forward(const ConvBlock<T>& blk, const T* in, int hw, T* out) {
    // hw: spatial side of the input; same-size output (pad 1)
    const int plane = hw * hw;
    for (int o = 0; o < blk.out_ch; ++o) {
        T* dst = out + o * plane;
        std::fill(dst, dst + plane, blk.bias.data[o]);
        for (int i = 0; i < blk.in_ch; ++i) {
            const T* src = in + i * plane;
            const T* w = &blk.weight.data[((o * blk.in_ch) + i) * 9];
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = w[ky * 3 + kx];
                    const int dy = ky - 1, dx = kx - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(hw, hw - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(hw, hw - dx);
                    for (int y = y0; y < y1; ++y) {
                        const T* s = src + (y + dy) * hw + dx;
                        T* d = dst + y * hw;
                        for (int x = x0; x < x1; ++x) d[x] += wv * s[x];
                    }
                }
            }
        }
    }
}

template <typename T>
void relu_pool_forward(const T* pre, int ch, int hw, T* pooled,
                       std::uint8_t* arg) {
    const int ohw = hw / 2;
    for (int c = 0; c < ch; ++c) {
        const T* src = pre + c * hw * hw;
        T* dst = pooled + c * ohw * ohw;
        std::uint8_t* am = arg + c * ohw * ohw;
        for (int y = 0; y < ohw; ++y) {
            for (int x = 0; x < ohw; ++x) {
                const int base = (2 * y) * hw + 2 * x;
                const T v[4] = {src[base], src[base + 1], src[base + hw],
                                src[base + hw + 1]};
                int best = 0;
                for (int k = 1; k < 4; ++k)
                    if (v[k] > v[best]) best = k;
                const T r = v[best] > T(0) ? v[best] : T(0);
                dst[y * ohw + x] = r;
                am[y * ohw + x] = static_cast<std::uint8_t>(best);
            }
        }
    }
}

template <typename T>
void dense_forward(const DenseBlock<T>& blk, const T* in, T* out) {
    for (int o = 0; o < blk.out_dim; ++o) {
        const T* w = &blk.weight.data[static_cast<std::size_t>(o) * blk.in_dim];
        T acc = blk.bias.data[o];
        for (int i = 0; i < blk.in_dim; ++i) acc += w[i] * in[i];
        out[o] = blk.rectified ? (acc > T(0) ? acc : T(0)) : acc;
    }
}

template <typename T>
void check_finite(const T* v, std::size_t n, int layer) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(v[i])))
            throw NumericalError(layer, "non-finite activation at layer " +
                                            std::to_string(layer));
}

}  // namespace detail

/// Forward for one sample (3 x S x S, values in [0,1]); fills the cache when
/// `cache` is non-null and returns the class probabilities in `probs`.
template <typename T>
void forward_sample(const LayeredModelT<T>& model, const T* input, T probs[2],
                    SampleCache<T>* cache) {
    const int nc = static_cast<int>(model.conv_blocks.size());
    int hw = model.input_size;
    std::vector<T> cur(input, input + static_cast<std::size_t>(3) * hw * hw);
    if (cache) {
        cache->conv_in.assign(nc, {});
        cache->conv_pre.assign(nc, {});
        cache->pooled.assign(nc, {});
        cache->pool_arg.assign(nc, {});
        cache->dense_in.clear();
        cache->dense_pre.clear();
    }
    for (int b = 0; b < nc; ++b) {
        const auto& blk = model.conv_blocks[b];
        std::vector<T> pre(static_cast<std::size_t>(blk.out_ch) * hw * hw);
        detail::conv3x3_forward(blk, cur.data(), hw, pre.data());
        detail::check_finite(pre.data(), pre.size(), b);
        const int ohw = hw / 2;
        std::vector<T> pooled(static_cast<std::size_t>(blk.out_ch) * ohw * ohw);
        std::vector<std::uint8_t> arg(pooled.size());
        detail::relu_pool_forward(pre.data(), blk.out_ch, hw, pooled.data(),
                                  arg.data());
        if (cache) {
            cache->conv_in[b] = std::move(cur);
            cache->conv_pre[b] = std::move(pre);
            cache->pool_arg[b] = std::move(arg);
            cache->pooled[b] = pooled;
        }
        cur = std::move(pooled);
        hw = ohw;
    }
    for (std::size_t d = 0; d < model.dense_blocks.size(); ++d) {
        const auto& blk = model.dense_blocks[d];
        if (static_cast<int>(cur.size()) != blk.in_dim)
            throw Error("shape mismatch entering dense layer");
        std::vector<T> out(blk.out_dim);
        detail::dense_forward(blk, cur.data(), out.data());
        detail::check_finite(out.data(), out.size(), nc + static_cast<int>(d));
        if (cache) {
            cache->dense_in.push_back(std::move(cur));
            cache->dense_pre.push_back(out);
        }
        cur = std::move(out);
    }
    // softmax over the 2 logits, max-subtracted
    const T m = std::max(cur[0], cur[1]);
    const T e0 = std::exp(cur[0] - m), e1 = std::exp(cur[1] - m);
    probs[0] = e0 / (e0 + e1);
    probs[1] = e1 / (e0 + e1);
    if (cache) {
        cache->probs[0] = probs[0];
        cache->probs[1] = probs[1];
    }
}

/// Per-sample backward from dlogits; accumulates parameter gradients into
/// `grads` and stops descending below `stop_layer` (frozen prefix).
template <typename T>
void backward_sample(const LayeredModelT<T>& model, const SampleCache<T>& cache,
                     const T dlogits[2], GradSet<T>& grads, int stop_layer) {
    const int nc = static_cast<int>(model.conv_blocks.size());
    const int nd = static_cast<int>(model.dense_blocks.size());
    std::vector<T> delta(dlogits, dlogits + 2);

    for (int d = nd - 1; d >= 0; --d) {
        const auto& blk = model.dense_blocks[d];
        const int layer = nc + d;
        // rectifier mask on this block's own pre-activation (head is linear)
        if (blk.rectified)
            for (int o = 0; o < blk.out_dim; ++o)
                if (cache.dense_pre[d][o] <= T(0)) delta[o] = T(0);
        if (layer < stop_layer) return;
        const std::vector<T>& in = cache.dense_in[d];
        Tensor<T>& dw = grads[layer][0];
        Tensor<T>& db = grads[layer][1];
        for (int o = 0; o < blk.out_dim; ++o) {
            const T g = delta[o];
            db.data[o] += g;
            T* dst = &dw.data[static_cast<std::size_t>(o) * blk.in_dim];
            for (int i = 0; i < blk.in_dim; ++i) dst[i] += g * in[i];
        }
        if (layer == stop_layer) return;
        std::vector<T> din(blk.in_dim, T(0));
        for (int o = 0; o < blk.out_dim; ++o) {
            const T g = delta[o];
            const T* w = &blk.weight.data[static_cast<std::size_t>(o) * blk.in_dim];
            for (int i = 0; i < blk.in_dim; ++i) din[i] += g * w[i];
        }
        delta = std::move(din);
    }

    int hw = model.input_size >> nc;  // spatial side at the deepest pooled map
    for (int b = nc - 1; b >= 0; --b) {
        const auto& blk = model.conv_blocks[b];
        const int ihw = hw * 2;
        const int plane = ihw * ihw, oplane = hw * hw;
        // un-pool + rectifier mask: route each pooled gradient to its argmax
        std::vector<T> dpre(static_cast<std::size_t>(blk.out_ch) * plane, T(0));
        for (int c = 0; c < blk.out_ch; ++c) {
            const T* dsrc = delta.data() + c * oplane;
            const std::uint8_t* am = cache.pool_arg[b].data() + c * oplane;
            const T* pre = cache.conv_pre[b].data() + c * plane;
            T* dst = dpre.data() + c * plane;
            for (int y = 0; y < hw; ++y) {
                for (int x = 0; x < hw; ++x) {
                    const int k = am[y * hw + x];
                    const int base = (2 * y + k / 2) * ihw + 2 * x + k % 2;
                    if (pre[base] > T(0)) dst[base] += dsrc[y * hw + x];
                }
            }
        }
        if (b >= stop_layer) {
            const std::vector<T>& in = cache.conv_in[b];
            Tensor<T>& dw = grads[b][0];
            Tensor<T>& db = grads[b][1];
            for (int o = 0; o < blk.out_ch; ++o) {
                const T* dsrc = dpre.data() + o * plane;
                T acc = T(0);
                for (int p = 0; p < plane; ++p) acc += dsrc[p];
                db.data[o] += acc;
                for (int i = 0; i < blk.in_ch; ++i) {
                    const T* src = in.data() + i * plane;
                    T* wdst = &dw.data[((o * blk.in_ch) + i) * 9];
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const int dy = ky - 1, dx = kx - 1;
                            const int y0 = std::max(0, -dy),
                                      y1 = std::min(ihw, ihw - dy);
                            const int x0 = std::max(0, -dx),
                                      x1 = std::min(ihw, ihw - dx);
                            T acc2 = T(0);
                            for (int y = y0; y < y1; ++y) {
                                const T* s = src + (y + dy) * ihw + dx;
                                const T* dd = dsrc + y * ihw;
                                for (int x = x0; x < x1; ++x) acc2 += dd[x] * s[x];
                            }
                            wdst[ky * 3 + kx] += acc2;
                        }
                    }
                }
            }
        }
        if (b <= stop_layer) return;
        // input gradient for the next block down
        std::vector<T> din(static_cast<std::size_t>(blk.in_ch) * plane, T(0));
        for (int o = 0; o < blk.out_ch; ++o) {
            const T* dsrc = dpre.data() + o * plane;
            for (int i = 0; i < blk.in_ch; ++i) {
                T* dst = din.data() + i * plane;
                const T* w = &blk.weight.data[((o * blk.in_ch) + i) * 9];
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const T wv = w[ky * 3 + kx];
                        const int dy = ky - 1, dx = kx - 1;
                        const int y0 = std::max(0, -dy), y1 = std::min(ihw, ihw - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(ihw, ihw - dx);
                        for (int y = y0; y < y1; ++y) {
                            T* d = dst + (y + dy) * ihw + dx;
                            const T* dd = dsrc + y * ihw;
                            for (int x = x0; x < x1; ++x) d[x] += wv * dd[x];
                        }
                    }
                }
            }
        }
        delta = std::move(din);
        hw = ihw;
    }
}

/// Batch forward: rows of the result sum to 1 within 1e-6 and lie in (0, 1).
/// `batch` is N samples of 3*S*S floats in [0,1], concatenated.
template <typename T>
std::vector<std::array<T, 2>> forward(const LayeredModelT<T>& model,
                                      const std::vector<T>& batch) {
    const std::size_t stride =
        static_cast<std::size_t>(3) * model.input_size * model.input_size;
    if (stride == 0 || batch.size() % stride != 0)
        throw Error("batch size not a multiple of the model input shape");
    const std::size_t n = batch.size() / stride;
    std::vector<std::array<T, 2>> probs(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        T p[2];
        forward_sample(model, batch.data() + i * stride, p, (SampleCache<T>*)nullptr);
        probs[i] = {p[0], p[1]};
    }
    return probs;
}

/// Mean cross-entropy loss and full-model gradients (freeze masks apply at
/// the update step, not here). labels: 0 = left, 1 = right.
/// Deterministic for any thread count: per-sample gradients are reduced in
/// sample order.
template <typename T>
std::pair<double, GradSet<T>> loss_and_grads(const LayeredModelT<T>& model,
                                             const std::vector<T>& batch,
                                             const std::vector<int>& labels,
                                             int stop_layer = 0) {
    const std::size_t stride =
        static_cast<std::size_t>(3) * model.input_size * model.input_size;
    if (stride == 0 || batch.size() % stride != 0)
        throw Error("batch size not a multiple of the model input shape");
    const std::size_t n = batch.size() / stride;
    if (labels.size() != n) throw Error("labels/batch length mismatch");

    std::vector<GradSet<T>> per_sample(n);
    std::vector<double> losses(n);
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            SampleCache<T> cache;
            T p[2];
            forward_sample(model, batch.data() + i * stride, p, &cache);
            const int y = labels[i];
            losses[i] = -std::log(std::max(static_cast<double>(p[y]), 1e-300));
            T dlogits[2] = {p[0], p[1]};
            dlogits[y] -= T(1);
            per_sample[i] = zero_grads(model);
            backward_sample(model, cache, dlogits, per_sample[i], stop_layer);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    GradSet<T> total = zero_grads(model);
    double loss = 0.0;
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
        loss += losses[i];
        for (std::size_t l = 0; l < total.size(); ++l)
            for (std::size_t t = 0; t < total[l].size(); ++t) {
                const auto& src = per_sample[i][l][t].data;
                auto& dst = total[l][t].data;
                for (std::size_t k = 0; k < dst.size(); ++k)
                    dst[k] += src[k] * inv_n;
            }
    }
    return {loss / static_cast<double>(n), std::move(total)};
}

}  // namespace flank
