#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "frn/ops.hpp"
#include "frn/rng.hpp"
#include "frn/tensor.hpp"

namespace frn {

// ---------------------------------------------------------------------------
// Channel weighting: F[b,i,j,k] = w[i] * f[b,i,j,k]. One learnable scalar per
// channel performs soft feature selection.
// ---------------------------------------------------------------------------

template <typename T>
struct ChannelWeights {
    std::vector<T> weights;
    std::vector<T> grad;

    ChannelWeights() = default;
    explicit ChannelWeights(std::size_t channels, T init = T(1))
        : weights(channels, init), grad(channels, T(0)) {}

    std::size_t size() const { return weights.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
Tensor4<T> channel_weight_forward(const Tensor4<T>& f, const ChannelWeights<T>& w) {
    if (w.size() != f.channels)
        throw std::invalid_argument("channel_weight: weight length (" +
                                    std::to_string(w.size()) + ") != channels (" +
                                    std::to_string(f.channels) + ")");
    Tensor4<T> out(f.batch, f.channels, f.height, f.width);
    const std::size_t plane = f.height * f.width;
    for (std::size_t b = 0; b < f.batch; ++b)
        for (std::size_t c = 0; c < f.channels; ++c) {
            const T wv = w.weights[c];
            const T* src = f.plane(b, c);
            T* dst = out.plane(b, c);
            for (std::size_t i = 0; i < plane; ++i) dst[i] = wv * src[i];
        }
    return out;
}

template <typename T>
struct ChannelWeightGrads {
    Tensor4<T> input;       // dLoss/df
    std::vector<T> weights; // dLoss/dw, summed over batch and space
};

// dLoss/df[b,i,j,k] = w[i] * upstream[b,i,j,k]
// dLoss/dw[i]       = sum_{b,j,k} upstream[b,i,j,k] * f[b,i,j,k]
// With upstream == 1 this reduces to dLoss/dw[i] = sum f[i,j,k] and
// dLoss/df = w[i].
template <typename T>
ChannelWeightGrads<T> channel_weight_backward(const Tensor4<T>& upstream, const Tensor4<T>& f,
                                              const ChannelWeights<T>& w) {
    if (!upstream.same_shape(f))
        throw std::invalid_argument("channel_weight_backward: upstream shape mismatch");
    if (w.size() != f.channels)
        throw std::invalid_argument("channel_weight_backward: weight length mismatch");
    ChannelWeightGrads<T> g;
    g.input = Tensor4<T>(f.batch, f.channels, f.height, f.width);
    g.weights.assign(f.channels, T(0));
    const std::size_t plane = f.height * f.width;
    for (std::size_t b = 0; b < f.batch; ++b)
        for (std::size_t c = 0; c < f.channels; ++c) {
            const T wv = w.weights[c];
            const T* up = upstream.plane(b, c);
            const T* src = f.plane(b, c);
            T* gi = g.input.plane(b, c);
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                gi[i] = wv * up[i];
                acc += up[i] * src[i];
            }
            g.weights[c] += acc;
        }
    return g;
}

// ---------------------------------------------------------------------------
// Feature decomposition upsampling: every input pixel expands into an NxN
// block scaled by a learned per-channel mapping matrix:
//   F[b,i,j,k] = M[i, j mod N, k mod N] * f[b,i, floor(j/N), floor(k/N)]
// ---------------------------------------------------------------------------

template <typename T>
struct DecompMatrices {
    std::size_t channels = 0;
    std::size_t factor = 0;       // N
    std::vector<T> m;             // channels x N x N, row-major
    std::vector<T> grad;

    DecompMatrices() = default;
    DecompMatrices(std::size_t ch, std::size_t n, T init = T(1))
        : channels(ch), factor(n), m(ch * n * n, init), grad(ch * n * n, T(0)) {
        if (n < 1) throw std::invalid_argument("DecompMatrices: factor must be >= 1");
    }

    T& at(std::size_t c, std::size_t r, std::size_t col) {
        return m[(c * factor + r) * factor + col];
    }
    const T& at(std::size_t c, std::size_t r, std::size_t col) const {
        return m[(c * factor + r) * factor + col];
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
Tensor4<T> decomp_upsample_forward(const Tensor4<T>& f, const DecompMatrices<T>& M) {
    if (M.channels != f.channels)
        throw std::invalid_argument("decomp_upsample: matrix count (" +
                                    std::to_string(M.channels) + ") != channels (" +
                                    std::to_string(f.channels) + ")");
    if (M.factor < 1) throw std::invalid_argument("decomp_upsample: factor must be >= 1");
    const std::size_t n = M.factor;
    Tensor4<T> out(f.batch, f.channels, f.height * n, f.width * n);
    for (std::size_t b = 0; b < f.batch; ++b)
        for (std::size_t c = 0; c < f.channels; ++c) {
            const T* src = f.plane(b, c);
            T* dst = out.plane(b, c);
            for (std::size_t y = 0; y < f.height; ++y)
                for (std::size_t m_row = 0; m_row < n; ++m_row) {
                    T* drow = dst + (y * n + m_row) * out.width;
                    const T* srow = src + y * f.width;
                    for (std::size_t x = 0; x < f.width; ++x)
                        for (std::size_t m_col = 0; m_col < n; ++m_col)
                            drow[x * n + m_col] = M.at(c, m_row, m_col) * srow[x];
                }
        }
    return out;
}

template <typename T>
struct DecompGrads {
    Tensor4<T> input;      // dLoss/df
    std::vector<T> m;      // dLoss/dM, same layout as DecompMatrices::m
};

// dLoss/df[b,i,x,y]  = sum_{m,n} M[i,m,n] * upstream[b,i, xN+m, yN+n]
// dLoss/dM[i,m,n]    = sum_{b,x,y} f[b,i,x,y] * upstream[b,i, xN+m, yN+n]
// With upstream == 1: dLoss/dM[i,m,n] = sum f[i,x,y].
template <typename T>
DecompGrads<T> decomp_upsample_backward(const Tensor4<T>& upstream, const Tensor4<T>& f,
                                        const DecompMatrices<T>& M) {
    const std::size_t n = M.factor;
    if (upstream.batch != f.batch || upstream.channels != f.channels ||
        upstream.height != f.height * n || upstream.width != f.width * n)
        throw std::invalid_argument("decomp_upsample_backward: upstream shape " +
                                    upstream.shape_str() + " does not match forward output");
    DecompGrads<T> g;
    g.input = Tensor4<T>(f.batch, f.channels, f.height, f.width);
    g.m.assign(M.m.size(), T(0));
    for (std::size_t b = 0; b < f.batch; ++b)
        for (std::size_t c = 0; c < f.channels; ++c) {
            const T* up = upstream.plane(b, c);
            const T* src = f.plane(b, c);
            T* gi = g.input.plane(b, c);
            for (std::size_t y = 0; y < f.height; ++y)
                for (std::size_t m_row = 0; m_row < n; ++m_row) {
                    const T* urow = up + (y * n + m_row) * upstream.width;
                    const T* srow = src + y * f.width;
                    T* girow = gi + y * f.width;
                    for (std::size_t x = 0; x < f.width; ++x)
                        for (std::size_t m_col = 0; m_col < n; ++m_col) {
                            const T u = urow[x * n + m_col];
                            girow[x] += M.at(c, m_row, m_col) * u;
                            g.m[(c * n + m_row) * n + m_col] += srow[x] * u;
                        }
                }
        }
    return g;
}

// ---------------------------------------------------------------------------
// Convolution layer with owned parameters and accumulated gradients.
// ---------------------------------------------------------------------------

template <typename T>
struct ConvLayer {
    Tensor4<T> kernels;          // outC x inC x kH x kW
    std::vector<T> bias;
    Tensor4<T> kernels_grad;
    std::vector<T> bias_grad;
    std::size_t stride = 1;
    std::size_t padding = 0;

    ConvLayer() = default;
    ConvLayer(std::size_t out_c, std::size_t in_c, std::size_t k, std::size_t stride_,
              std::size_t padding_)
        : kernels(out_c, in_c, k, k),
          bias(out_c, T(0)),
          kernels_grad(out_c, in_c, k, k),
          bias_grad(out_c, T(0)),
          stride(stride_),
          padding(padding_) {}

    // Kaiming-style initialization for ReLU networks.
    void init_random(Rng& rng) {
        const double fan_in = static_cast<double>(kernels.channels * kernels.height * kernels.width);
        const double s = std::sqrt(2.0 / fan_in);
        for (auto& v : kernels.data) v = static_cast<T>(rng.normal() * s);
        std::fill(bias.begin(), bias.end(), T(0));
    }

    Tensor4<T> forward(const Tensor4<T>& x) const { return conv2d(x, kernels, bias, stride, padding); }

    // Accumulates parameter gradients, returns the input gradient.
    Tensor4<T> backward(const Tensor4<T>& upstream, const Tensor4<T>& x) {
        Conv2dGrads<T> g = conv2d_backward(upstream, x, kernels, stride, padding);
        for (std::size_t i = 0; i < kernels_grad.data.size(); ++i)
            kernels_grad.data[i] += g.kernels.data[i];
        for (std::size_t i = 0; i < bias_grad.size(); ++i) bias_grad[i] += g.bias[i];
        return std::move(g.input);
    }

    void zero_grad() {
        kernels_grad.fill(T(0));
        std::fill(bias_grad.begin(), bias_grad.end(), T(0));
    }
};

// Uniform parameter enumeration callback: name, logical rank-4 shape, value
// pointer, gradient pointer. Element count is the product of the shape.
template <typename T>
using ParamVisitor =
    std::function<void(const std::string&, std::array<std::size_t, 4>, T*, T*)>;

template <typename T>
void visit_conv(const std::string& name, ConvLayer<T>& conv, const ParamVisitor<T>& fn) {
    fn(name + ".kernels",
       {conv.kernels.batch, conv.kernels.channels, conv.kernels.height, conv.kernels.width},
       conv.kernels.data.data(), conv.kernels_grad.data.data());
    fn(name + ".bias", {1, conv.bias.size(), 1, 1}, conv.bias.data(), conv.bias_grad.data());
}

// ---------------------------------------------------------------------------
// Inception-style synthesis: three parallel paths over the concatenated
// feature maps, each ending at half resolution, concatenated back together.
//   (a) conv 1x1 s1 -> maxpool 2x2 s2
//   (b) conv 1x1 s1 -> conv 3x3 s2 p1
//   (c) conv 1x1 s1 -> conv 3x3 s1 p1 -> conv 3x3 s2 p1
// ReLU follows every convolution. Odd inputs floor: paths are cropped to the
// common floor(H/2) x floor(W/2) before concatenation.
// ---------------------------------------------------------------------------

struct SynthesisConfig {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t out_a = 0, out_b = 0, out_c = 0;  // per-path output widths
    std::size_t mid_b = 0, mid_c = 0;             // 1x1 bottleneck widths

    // Default split: 25% / 37.5% / 37.5%, bottlenecks at half the path width.
    static SynthesisConfig make(std::size_t in_ch, std::size_t out_ch) {
        SynthesisConfig cfg;
        cfg.in_channels = in_ch;
        cfg.out_channels = out_ch;
        cfg.out_a = std::max<std::size_t>(1, out_ch / 4);
        const std::size_t rest = out_ch - cfg.out_a;
        cfg.out_b = std::max<std::size_t>(1, rest / 2);
        cfg.out_c = rest - cfg.out_b;
        if (cfg.out_c < 1 || cfg.out_a + cfg.out_b + cfg.out_c != out_ch)
            throw std::invalid_argument("SynthesisConfig: output channels too small to split");
        cfg.mid_b = std::max<std::size_t>(1, cfg.out_b / 2);
        cfg.mid_c = std::max<std::size_t>(1, cfg.out_c / 2);
        return cfg;
    }
};

template <typename T>
struct SynthesisCache {
    Tensor4<T> input;
    Tensor4<T> a1_pre, a1;           // pre-ReLU / post-ReLU
    MaxPoolResult<T> a_pool;
    Tensor4<T> b1_pre, b1, b2_pre;
    Tensor4<T> c1_pre, c1, c2_pre, c2, c3_pre;
    std::array<std::size_t, 2> path_dims_a{}, path_dims_b{}, path_dims_c{};
    std::array<std::size_t, 2> out_dims{};
};

namespace detail {

// Crops the top-left H x W corner. Used to reconcile odd-size paths.
template <typename T>
Tensor4<T> crop_spatial(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    if (t.height == h && t.width == w) return t;
    Tensor4<T> out(t.batch, t.channels, h, w);
    for (std::size_t b = 0; b < t.batch; ++b)
        for (std::size_t c = 0; c < t.channels; ++c)
            for (std::size_t y = 0; y < h; ++y) {
                const T* src = t.plane(b, c) + y * t.width;
                std::copy(src, src + w, out.plane(b, c) + y * w);
            }
    return out;
}

// Zero-pads a cropped gradient back to the pre-crop size.
template <typename T>
Tensor4<T> uncrop_spatial(const Tensor4<T>& g, std::size_t h, std::size_t w) {
    if (g.height == h && g.width == w) return g;
    Tensor4<T> out(g.batch, g.channels, h, w);
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t c = 0; c < g.channels; ++c)
            for (std::size_t y = 0; y < g.height; ++y) {
                const T* src = g.plane(b, c) + y * g.width;
                std::copy(src, src + g.width, out.plane(b, c) + y * w);
            }
    return out;
}

}  // namespace detail

template <typename T>
struct InceptionSynthesis {
    SynthesisConfig cfg;
    ConvLayer<T> a1;          // 1x1 s1
    ConvLayer<T> b1, b2;      // 1x1 s1; 3x3 s2 p1
    ConvLayer<T> c1, c2, c3;  // 1x1 s1; 3x3 s1 p1; 3x3 s2 p1

    InceptionSynthesis() = default;
    explicit InceptionSynthesis(const SynthesisConfig& config)
        : cfg(config),
          a1(config.out_a, config.in_channels, 1, 1, 0),
          b1(config.mid_b, config.in_channels, 1, 1, 0),
          b2(config.out_b, config.mid_b, 3, 2, 1),
          c1(config.mid_c, config.in_channels, 1, 1, 0),
          c2(config.mid_c, config.mid_c, 3, 1, 1),
          c3(config.out_c, config.mid_c, 3, 2, 1) {}

    void init_random(Rng& rng) {
        a1.init_random(rng);
        b1.init_random(rng);
        b2.init_random(rng);
        c1.init_random(rng);
        c2.init_random(rng);
        c3.init_random(rng);
    }

    Tensor4<T> forward(const Tensor4<T>& x, SynthesisCache<T>& cache) {
        if (x.channels != cfg.in_channels)
            throw std::invalid_argument("inception_synthesis: expected " +
                                        std::to_string(cfg.in_channels) + " channels, got " +
                                        std::to_string(x.channels));
        if (x.height < 2 || x.width < 2)
            throw std::invalid_argument("inception_synthesis: spatial size < 2");
        cache.input = x;
        const std::size_t oh = x.height / 2, ow = x.width / 2;
        cache.out_dims = {oh, ow};

        cache.a1_pre = a1.forward(x);
        cache.a1 = relu(cache.a1_pre);
        cache.a_pool = maxpool2d(cache.a1, 2, 2, 0);
        cache.path_dims_a = {cache.a_pool.output.height, cache.a_pool.output.width};

        cache.b1_pre = b1.forward(x);
        cache.b1 = relu(cache.b1_pre);
        cache.b2_pre = b2.forward(cache.b1);
        cache.path_dims_b = {cache.b2_pre.height, cache.b2_pre.width};

        cache.c1_pre = c1.forward(x);
        cache.c1 = relu(cache.c1_pre);
        cache.c2_pre = c2.forward(cache.c1);
        cache.c2 = relu(cache.c2_pre);
        cache.c3_pre = c3.forward(cache.c2);
        cache.path_dims_c = {cache.c3_pre.height, cache.c3_pre.width};

        Tensor4<T> pa = detail::crop_spatial(cache.a_pool.output, oh, ow);
        Tensor4<T> pb = detail::crop_spatial(relu(cache.b2_pre), oh, ow);
        Tensor4<T> pc = detail::crop_spatial(relu(cache.c3_pre), oh, ow);
        return concat_channels<T>({&pa, &pb, &pc});
    }

    // Accumulates parameter gradients and returns the gradient on x.
    Tensor4<T> backward(const Tensor4<T>& upstream, SynthesisCache<T>& cache) {
        auto pieces =
            concat_channels_backward(upstream, {cfg.out_a, cfg.out_b, cfg.out_c});

        // Path (a): concat <- crop <- maxpool <- relu <- conv1x1.
        Tensor4<T> ga = detail::uncrop_spatial(pieces[0], cache.path_dims_a[0], cache.path_dims_a[1]);
        ga = maxpool2d_backward(ga, cache.a_pool, cache.a1);
        ga = relu_backward(ga, cache.a1_pre);
        Tensor4<T> gx = a1.backward(ga, cache.input);

        // Path (b).
        Tensor4<T> gb = detail::uncrop_spatial(pieces[1], cache.path_dims_b[0], cache.path_dims_b[1]);
        gb = relu_backward(gb, cache.b2_pre);
        gb = b2.backward(gb, cache.b1);
        gb = relu_backward(gb, cache.b1_pre);
        gb = b1.backward(gb, cache.input);
        for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gb.data[i];

        // Path (c).
        Tensor4<T> gc = detail::uncrop_spatial(pieces[2], cache.path_dims_c[0], cache.path_dims_c[1]);
        gc = relu_backward(gc, cache.c3_pre);
        gc = c3.backward(gc, cache.c2);
        gc = relu_backward(gc, cache.c2_pre);
        gc = c2.backward(gc, cache.c1);
        gc = relu_backward(gc, cache.c1_pre);
        gc = c1.backward(gc, cache.input);
        for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gc.data[i];

        return gx;
    }

    void zero_grad() {
        a1.zero_grad();
        b1.zero_grad();
        b2.zero_grad();
        c1.zero_grad();
        c2.zero_grad();
        c3.zero_grad();
    }

    void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
        visit_conv(prefix + ".a1", a1, fn);
        visit_conv(prefix + ".b1", b1, fn);
        visit_conv(prefix + ".b2", b2, fn);
        visit_conv(prefix + ".c1", c1, fn);
        visit_conv(prefix + ".c2", c2, fn);
        visit_conv(prefix + ".c3", c3, fn);
    }
};

// ---------------------------------------------------------------------------
// The full refine block over three feature-map groups at strides s, 2s, 4s:
//   (1) channel weighting per group, (2) decomposition upsampling to the fine
//   scale (x2 for mid, two chained x2 stages for coarse), (3) channel
//   concatenation, (4) Inception-style synthesis at half the fine scale.
// ---------------------------------------------------------------------------

struct FrnConfig {
    std::size_t fine_channels = 16;
    std::size_t mid_channels = 16;
    std::size_t coarse_channels = 24;
    std::size_t out_channels = 16;
    std::size_t upsample_factor = 2;  // per stage

    std::size_t concat_channels() const {
        return fine_channels + mid_channels + coarse_channels;
    }
};

template <typename T>
struct FrnCache {
    Tensor4<T> fine, mid, coarse;             // raw inputs
    Tensor4<T> wf, wm, wc;                    // after weighting
    Tensor4<T> um, uc1, uc2;                  // after upsampling stages
    Tensor4<T> concat;
    SynthesisCache<T> synth;
};

template <typename T>
struct FrnBlock {
    FrnConfig cfg;
    ChannelWeights<T> w_fine, w_mid, w_coarse;
    DecompMatrices<T> up_mid;                  // x2
    DecompMatrices<T> up_coarse1, up_coarse2;  // chained x2, x2
    InceptionSynthesis<T> synthesis;

    FrnBlock() = default;
    explicit FrnBlock(const FrnConfig& config)
        : cfg(config),
          w_fine(config.fine_channels),
          w_mid(config.mid_channels),
          w_coarse(config.coarse_channels),
          up_mid(config.mid_channels, config.upsample_factor),
          up_coarse1(config.coarse_channels, config.upsample_factor),
          up_coarse2(config.coarse_channels, config.upsample_factor),
          synthesis(SynthesisConfig::make(config.concat_channels(), config.out_channels)) {}

    // Channel weights start at 1 and decomposition matrices at all-ones, so a
    // fresh block is a benign resampler; only the synthesis convs are random.
    void init_random(Rng& rng) { synthesis.init_random(rng); }

    Tensor4<T> forward(const Tensor4<T>& fine, const Tensor4<T>& mid, const Tensor4<T>& coarse,
                       FrnCache<T>& cache) {
        const std::size_t n = cfg.upsample_factor;
        if (mid.height * n != fine.height || mid.width * n != fine.width)
            throw std::invalid_argument("frn_forward: mid dims " + mid.shape_str() +
                                        " are not fine/" + std::to_string(n));
        if (coarse.height * n * n != fine.height || coarse.width * n * n != fine.width)
            throw std::invalid_argument("frn_forward: coarse dims " + coarse.shape_str() +
                                        " are not fine/" + std::to_string(n * n));
        cache.fine = fine;
        cache.mid = mid;
        cache.coarse = coarse;
        cache.wf = channel_weight_forward(fine, w_fine);
        cache.wm = channel_weight_forward(mid, w_mid);
        cache.wc = channel_weight_forward(coarse, w_coarse);
        cache.um = decomp_upsample_forward(cache.wm, up_mid);
        cache.uc1 = decomp_upsample_forward(cache.wc, up_coarse1);
        cache.uc2 = decomp_upsample_forward(cache.uc1, up_coarse2);
        cache.concat = concat_channels<T>({&cache.wf, &cache.um, &cache.uc2});
        return synthesis.forward(cache.concat, cache.synth);
    }

    struct InputGrads {
        Tensor4<T> fine, mid, coarse;
    };

    InputGrads backward(const Tensor4<T>& upstream, FrnCache<T>& cache) {
        Tensor4<T> gcat = synthesis.backward(upstream, cache.synth);
        auto parts = concat_channels_backward(
            gcat, {cfg.fine_channels, cfg.mid_channels, cfg.coarse_channels});

        InputGrads g;
        {
            auto cw = channel_weight_backward(parts[0], cache.fine, w_fine);
            g.fine = std::move(cw.input);
            for (std::size_t i = 0; i < cw.weights.size(); ++i) w_fine.grad[i] += cw.weights[i];
        }
        {
            auto du = decomp_upsample_backward(parts[1], cache.wm, up_mid);
            for (std::size_t i = 0; i < du.m.size(); ++i) up_mid.grad[i] += du.m[i];
            auto cw = channel_weight_backward(du.input, cache.mid, w_mid);
            g.mid = std::move(cw.input);
            for (std::size_t i = 0; i < cw.weights.size(); ++i) w_mid.grad[i] += cw.weights[i];
        }
        {
            auto du2 = decomp_upsample_backward(parts[2], cache.uc1, up_coarse2);
            for (std::size_t i = 0; i < du2.m.size(); ++i) up_coarse2.grad[i] += du2.m[i];
            auto du1 = decomp_upsample_backward(du2.input, cache.wc, up_coarse1);
            for (std::size_t i = 0; i < du1.m.size(); ++i) up_coarse1.grad[i] += du1.m[i];
            auto cw = channel_weight_backward(du1.input, cache.coarse, w_coarse);
            g.coarse = std::move(cw.input);
            for (std::size_t i = 0; i < cw.weights.size(); ++i) w_coarse.grad[i] += cw.weights[i];
        }
        return g;
    }

    void zero_grad() {
        w_fine.zero_grad();
        w_mid.zero_grad();
        w_coarse.zero_grad();
        up_mid.zero_grad();
        up_coarse1.zero_grad();
        up_coarse2.zero_grad();
        synthesis.zero_grad();
    }

    void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(prefix + ".w_fine", {1, w_fine.size(), 1, 1}, w_fine.weights.data(), w_fine.grad.data());
        fn(prefix + ".w_mid", {1, w_mid.size(), 1, 1}, w_mid.weights.data(), w_mid.grad.data());
        fn(prefix + ".w_coarse", {1, w_coarse.size(), 1, 1}, w_coarse.weights.data(),
           w_coarse.grad.data());
        fn(prefix + ".up_mid", {up_mid.channels, 1, up_mid.factor, up_mid.factor},
           up_mid.m.data(), up_mid.grad.data());
        fn(prefix + ".up_coarse1", {up_coarse1.channels, 1, up_coarse1.factor, up_coarse1.factor},
           up_coarse1.m.data(), up_coarse1.grad.data());
        fn(prefix + ".up_coarse2", {up_coarse2.channels, 1, up_coarse2.factor, up_coarse2.factor},
           up_coarse2.m.data(), up_coarse2.grad.data());
        synthesis.visit_params(prefix + ".synthesis", fn);
    }
};

// ---------------------------------------------------------------------------
// Channel-weight ablation: zero every weight with |w| < threshold.
// ---------------------------------------------------------------------------

template <typename T>
struct AblationResult {
    FrnBlock<T> block;
    std::array<std::size_t, 3> zeroed{};  // per group: fine, mid, coarse
};

template <typename T>
AblationResult<T> ablate_channels(const FrnBlock<T>& block, T threshold) {
    if (threshold < T(0)) throw std::invalid_argument("ablate_channels: threshold must be >= 0");
    AblationResult<T> r;
    r.block = block;
    ChannelWeights<T>* groups[3] = {&r.block.w_fine, &r.block.w_mid, &r.block.w_coarse};
    for (int g = 0; g < 3; ++g)
        for (auto& w : groups[g]->weights)
            if (std::abs(w) < threshold) {
                w = T(0);
                ++r.zeroed[g];
            }
    return r;
}

}  // namespace frn
