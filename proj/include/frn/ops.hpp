#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "frn/tensor.hpp"

namespace frn {

// Differentiable primitives. Every forward here has a matching backward that
// maps the upstream gradient dLoss/dOutput to gradients for each input; the
// pairs are certified by finite_diff_check (see gradcheck.hpp).

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                                std::size_t pad, const char* axis) {
    if (in + 2 * pad < k)
        throw std::invalid_argument(std::string("conv2d: padded ") + axis + " (" +
                                    std::to_string(in + 2 * pad) + ") smaller than kernel (" +
                                    std::to_string(k) + ")");
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// Cross-correlation (no kernel flip). kernels shape: outC x inC x kH x kW.
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const Tensor4<T>& kernels,
                  const std::vector<T>& bias, std::size_t stride, std::size_t padding) {
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (input.channels != kernels.channels)
        throw std::invalid_argument("conv2d: input channels (" + std::to_string(input.channels) +
                                    ") != kernel inC (" + std::to_string(kernels.channels) + ")");
    if (bias.size() != kernels.batch)
        throw std::invalid_argument("conv2d: bias length (" + std::to_string(bias.size()) +
                                    ") != kernel outC (" + std::to_string(kernels.batch) + ")");
    const std::size_t out_h = detail::conv_out_dim(input.height, kernels.height, stride, padding, "height");
    const std::size_t out_w = detail::conv_out_dim(input.width, kernels.width, stride, padding, "width");
    const std::size_t out_c = kernels.batch;

    Tensor4<T> out(input.batch, out_c, out_h, out_w);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t b = 0; b < input.batch; ++b) {
        for (std::size_t oc = 0; oc < out_c; ++oc) {
            T* op = out.plane(b, oc);
            const T bv = bias[oc];
            for (std::size_t i = 0; i < out_h * out_w; ++i) op[i] = bv;
            for (std::size_t ic = 0; ic < input.channels; ++ic) {
                const T* ip = input.plane(b, ic);
                const T* kp = kernels.plane(oc, ic);
                for (std::size_t ky = 0; ky < kernels.height; ++ky) {
                    for (std::size_t kx = 0; kx < kernels.width; ++kx) {
                        const T kv = kp[ky * kernels.width + kx];
                        for (std::size_t oy = 0; oy < out_h; ++oy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(input.height)) continue;
                            T* orow = op + oy * out_w;
                            const T* irow = ip + static_cast<std::size_t>(iy) * input.width;
                            for (std::size_t ox = 0; ox < out_w; ++ox) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(input.width)) continue;
                                orow[ox] += kv * irow[static_cast<std::size_t>(ix)];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
struct Conv2dGrads {
    Tensor4<T> input;
    Tensor4<T> kernels;
    std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& upstream, const Tensor4<T>& input,
                               const Tensor4<T>& kernels, std::size_t stride,
                               std::size_t padding) {
    const std::size_t out_h = detail::conv_out_dim(input.height, kernels.height, stride, padding, "height");
    const std::size_t out_w = detail::conv_out_dim(input.width, kernels.width, stride, padding, "width");
    if (upstream.batch != input.batch || upstream.channels != kernels.batch ||
        upstream.height != out_h || upstream.width != out_w)
        throw std::invalid_argument("conv2d_backward: upstream shape " + upstream.shape_str() +
                                    " does not match forward output");

    Conv2dGrads<T> g;
    g.input = Tensor4<T>(input.batch, input.channels, input.height, input.width);
    g.kernels = Tensor4<T>(kernels.batch, kernels.channels, kernels.height, kernels.width);
    g.bias.assign(kernels.batch, T(0));

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t b = 0; b < input.batch; ++b) {
        for (std::size_t oc = 0; oc < kernels.batch; ++oc) {
            const T* up = upstream.plane(b, oc);
            for (std::size_t i = 0; i < out_h * out_w; ++i) g.bias[oc] += up[i];
            for (std::size_t ic = 0; ic < input.channels; ++ic) {
                const T* ip = input.plane(b, ic);
                T* gip = g.input.plane(b, ic);
                const T* kp = kernels.plane(oc, ic);
                T* gkp = g.kernels.plane(oc, ic);
                for (std::size_t ky = 0; ky < kernels.height; ++ky) {
                    for (std::size_t kx = 0; kx < kernels.width; ++kx) {
                        const T kv = kp[ky * kernels.width + kx];
                        T kacc = T(0);
                        for (std::size_t oy = 0; oy < out_h; ++oy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(input.height)) continue;
                            const T* urow = up + oy * out_w;
                            const T* irow = ip + static_cast<std::size_t>(iy) * input.width;
                            T* girow = gip + static_cast<std::size_t>(iy) * input.width;
                            for (std::size_t ox = 0; ox < out_w; ++ox) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(input.width)) continue;
                                const T u = urow[ox];
                                girow[static_cast<std::size_t>(ix)] += kv * u;
                                kacc += u * irow[static_cast<std::size_t>(ix)];
                            }
                        }
                        gkp[ky * kernels.width + kx] += kacc;
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
struct MaxPoolResult {
    Tensor4<T> output;
    // Flat index into the input per output element; -1 when the window saw
    // only padding.
    std::vector<std::int64_t> argmax;
};

// Padding cells are treated as -infinity, so they are never selected while a
// real value exists; ties break to the first candidate in row-major window
// scan order.
template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor4<T>& input, std::size_t kernel, std::size_t stride,
                           std::size_t padding) {
    if (kernel < 1 || stride < 1) throw std::invalid_argument("maxpool2d: kernel and stride must be >= 1");
    if (input.height + 2 * padding < kernel || input.width + 2 * padding < kernel)
        throw std::invalid_argument("maxpool2d: window larger than padded input");
    const std::size_t out_h = (input.height + 2 * padding - kernel) / stride + 1;
    const std::size_t out_w = (input.width + 2 * padding - kernel) / stride + 1;

    MaxPoolResult<T> r;
    r.output = Tensor4<T>(input.batch, input.channels, out_h, out_w);
    r.argmax.assign(r.output.size(), -1);

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);
    std::size_t oi = 0;
    for (std::size_t b = 0; b < input.batch; ++b) {
        for (std::size_t c = 0; c < input.channels; ++c) {
            const T* ip = input.plane(b, c);
            const std::size_t base = (b * input.channels + c) * input.height * input.width;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                for (std::size_t ox = 0; ox < out_w; ++ox, ++oi) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::int64_t best_idx = -1;
                    for (std::size_t ky = 0; ky < kernel; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(input.height)) continue;
                        for (std::size_t kx = 0; kx < kernel; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(input.width)) continue;
                            const T v = ip[static_cast<std::size_t>(iy) * input.width +
                                           static_cast<std::size_t>(ix)];
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<std::int64_t>(
                                    base + static_cast<std::size_t>(iy) * input.width +
                                    static_cast<std::size_t>(ix));
                            }
                        }
                    }
                    r.output.data[oi] = best;
                    r.argmax[oi] = best_idx;
                }
            }
        }
    }
    return r;
}

// Routes the upstream gradient to each window's argmax location only.
template <typename T>
Tensor4<T> maxpool2d_backward(const Tensor4<T>& upstream, const MaxPoolResult<T>& fwd,
                              const Tensor4<T>& input) {
    if (!upstream.same_shape(fwd.output))
        throw std::invalid_argument("maxpool2d_backward: upstream shape mismatch");
    Tensor4<T> g(input.batch, input.channels, input.height, input.width);
    for (std::size_t i = 0; i < upstream.data.size(); ++i) {
        const std::int64_t a = fwd.argmax[i];
        if (a >= 0) g.data[static_cast<std::size_t>(a)] += upstream.data[i];
    }
    return g;
}

template <typename T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Tensor4<T>& first = *inputs[0];
    std::size_t total_c = 0;
    for (const auto* t : inputs) {
        if (t->batch != first.batch)
            throw std::invalid_argument("concat_channels: batch mismatch");
        if (t->height != first.height || t->width != first.width)
            throw std::invalid_argument("concat_channels: spatial mismatch (" + t->shape_str() +
                                        " vs " + first.shape_str() + ")");
        total_c += t->channels;
    }
    Tensor4<T> out(first.batch, total_c, first.height, first.width);
    for (std::size_t b = 0; b < first.batch; ++b) {
        std::size_t co = 0;
        for (const auto* t : inputs) {
            for (std::size_t c = 0; c < t->channels; ++c, ++co) {
                const T* src = t->plane(b, c);
                T* dst = out.plane(b, co);
                std::copy(src, src + first.height * first.width, dst);
            }
        }
    }
    return out;
}

template <typename T>
Tensor4<T> concat_channels(const std::vector<Tensor4<T>>& inputs) {
    std::vector<const Tensor4<T>*> ptrs;
    ptrs.reserve(inputs.size());
    for (const auto& t : inputs) ptrs.push_back(&t);
    return concat_channels(ptrs);
}

// Extracts channels [c0, c0+count) as a new tensor; inverse of concatenation.
template <typename T>
Tensor4<T> slice_channels(const Tensor4<T>& input, std::size_t c0, std::size_t count) {
    if (c0 + count > input.channels)
        throw std::invalid_argument("slice_channels: range out of bounds");
    Tensor4<T> out(input.batch, count, input.height, input.width);
    for (std::size_t b = 0; b < input.batch; ++b)
        for (std::size_t c = 0; c < count; ++c) {
            const T* src = input.plane(b, c0 + c);
            std::copy(src, src + input.height * input.width, out.plane(b, c));
        }
    return out;
}

template <typename T>
std::vector<Tensor4<T>> concat_channels_backward(const Tensor4<T>& upstream,
                                                 const std::vector<std::size_t>& channel_counts) {
    std::vector<Tensor4<T>> grads;
    std::size_t c0 = 0;
    for (std::size_t n : channel_counts) {
        grads.push_back(slice_channels(upstream, c0, n));
        c0 += n;
    }
    if (c0 != upstream.channels)
        throw std::invalid_argument("concat_channels_backward: channel counts do not sum up");
    return grads;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& input) {
    Tensor4<T> out(input.batch, input.channels, input.height, input.width);
    for (std::size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    return out;
}

// Gradient is defined as 0 at x == 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& upstream, const Tensor4<T>& input) {
    if (!upstream.same_shape(input))
        throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor4<T> g(input.batch, input.channels, input.height, input.width);
    for (std::size_t i = 0; i < input.data.size(); ++i)
        g.data[i] = input.data[i] > T(0) ? upstream.data[i] : T(0);
    return g;
}

}  // namespace frn
