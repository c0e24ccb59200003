#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frn/rng.hpp"

namespace frn {

// Dense rank-4 array, laid out batch-major, then channel, then row, then
// column. This layout is fixed so serialized tensors are comparable across
// implementations.
template <typename T>
struct Tensor4 {
    std::size_t batch = 0, channels = 0, height = 0, width = 0;
    std::vector<T> data;

    Tensor4() = default;

    Tensor4(std::size_t b, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
        : batch(b), channels(c), height(h), width(w) {
        if (b < 1 || c < 1 || h < 1 || w < 1)
            throw std::invalid_argument("Tensor4: all dimensions must be >= 1");
        data.assign(b * c * h * w, fill);
    }

    std::size_t size() const { return batch * channels * height * width; }
    bool empty() const { return data.empty(); }

    bool same_shape(const Tensor4& o) const {
        return batch == o.batch && channels == o.channels && height == o.height &&
               width == o.width;
    }

    std::size_t index(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return ((b * channels + c) * height + y) * width + x;
    }

    T& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
        return data[index(b, c, y, x)];
    }
    const T& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return data[index(b, c, y, x)];
    }

    // Pointer to the start of one channel plane.
    T* plane(std::size_t b, std::size_t c) { return data.data() + (b * channels + c) * height * width; }
    const T* plane(std::size_t b, std::size_t c) const {
        return data.data() + (b * channels + c) * height * width;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        return std::to_string(batch) + "x" + std::to_string(channels) + "x" +
               std::to_string(height) + "x" + std::to_string(width);
    }

    static Tensor4 random_uniform(std::size_t b, std::size_t c, std::size_t h, std::size_t w,
                                  Rng& rng, T lo = T(-1), T hi = T(1)) {
        Tensor4 t(b, c, h, w);
        for (auto& v : t.data) v = static_cast<T>(rng.uniform(double(lo), double(hi)));
        return t;
    }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(batch, channels, height, width);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool all_finite() const {
        for (const auto& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

// Parameter paired with its gradient; the gradient buffer is materialized on
// first use and always matches the value's shape afterwards.
template <typename T>
struct GradPair {
    Tensor4<T> value;
    Tensor4<T> grad;

    GradPair() = default;
    explicit GradPair(Tensor4<T> v) : value(std::move(v)) {}

    void ensure_grad() {
        if (grad.empty())
            grad = Tensor4<T>(value.batch, value.channels, value.height, value.width);
    }
    void zero_grad() {
        ensure_grad();
        grad.fill(T(0));
    }
};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline void put_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64_le(out, bits);
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = get_u64_le(p);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

// Flat binary tensor format: magic "T4v1", four 64-bit little-endian dims,
// then the values as 64-bit little-endian IEEE doubles in canonical layout.
template <typename T>
std::string serialize_t4(const Tensor4<T>& t) {
    std::string out;
    out.reserve(4 + 32 + 8 * t.size());
    out += "T4v1";
    detail::put_u64_le(out, t.batch);
    detail::put_u64_le(out, t.channels);
    detail::put_u64_le(out, t.height);
    detail::put_u64_le(out, t.width);
    for (const auto& v : t.data) detail::put_f64_le(out, static_cast<double>(v));
    return out;
}

template <typename T = double>
Tensor4<T> deserialize_t4(const std::string& bytes) {
    if (bytes.size() < 36 || bytes.compare(0, 4, "T4v1") != 0)
        throw std::runtime_error("T4v1: bad magic or truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::uint64_t dims[4];
    for (int i = 0; i < 4; ++i) dims[i] = detail::get_u64_le(p + 4 + 8 * i);
    const std::uint64_t n = dims[0] * dims[1] * dims[2] * dims[3];
    if (bytes.size() != 36 + 8 * n)
        throw std::runtime_error("T4v1: payload size mismatch");
    Tensor4<T> t(dims[0], dims[1], dims[2], dims[3]);
    for (std::uint64_t i = 0; i < n; ++i)
        t.data[i] = static_cast<T>(detail::get_f64_le(p + 36 + 8 * i));
    return t;
}

template <typename T>
void save_t4(const Tensor4<T>& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    const std::string bytes = serialize_t4(t);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

template <typename T = double>
Tensor4<T> load_t4(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_t4<T>(bytes);
}

}  // namespace frn
