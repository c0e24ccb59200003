#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "frn/rng.hpp"
#include "frn/tensor.hpp"

namespace frn {

// A differentiable operation packaged for checking: a forward map over a list
// of tensor arguments and a backward map that turns the upstream gradient
// into one gradient per argument.
template <typename T>
struct DiffOp {
    std::string name;
    std::function<Tensor4<T>(const std::vector<Tensor4<T>>&)> forward;
    std::function<std::vector<Tensor4<T>>(const Tensor4<T>& upstream,
                                          const std::vector<Tensor4<T>>& args)>
        backward;
};

template <typename T>
struct GradCheckReport {
    std::string op_name;
    std::vector<T> max_rel_err;  // one entry per argument

    T worst() const {
        T m = T(0);
        for (T e : max_rel_err) m = std::max(m, e);
        return m;
    }
    bool pass(T tolerance) const { return worst() < tolerance; }
};

// Certifies a backward implementation against central finite differences.
// A random scalar projection L = sum(R * forward(args)) is formed; for every
// element x of every argument the analytic dL/dx (from backward with upstream
// R) is compared against (L(x+eps) - L(x-eps)) / (2 eps). The relative error
// denominator is max(|analytic|, |numeric|, 1e-8).
template <typename T>
GradCheckReport<T> finite_diff_check(const DiffOp<T>& op, std::vector<Tensor4<T>> args,
                                     T epsilon, Rng& rng) {
    if (!(epsilon > T(0))) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");

    const Tensor4<T> out0 = op.forward(args);
    Tensor4<T> projection(out0.batch, out0.channels, out0.height, out0.width);
    for (auto& v : projection.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));

    const auto project = [&](const Tensor4<T>& out) {
        if (!out.same_shape(projection))
            throw std::runtime_error("finite_diff_check: forward output shape changed");
        T s = T(0);
        for (std::size_t i = 0; i < out.data.size(); ++i) s += projection.data[i] * out.data[i];
        if (!std::isfinite(static_cast<double>(s)))
            throw std::runtime_error("finite_diff_check: non-finite forward value");
        return s;
    };

    const std::vector<Tensor4<T>> analytic = op.backward(projection, args);
    if (analytic.size() != args.size())
        throw std::runtime_error("finite_diff_check: backward returned wrong argument count");

    GradCheckReport<T> report;
    report.op_name = op.name;
    report.max_rel_err.assign(args.size(), T(0));

    for (std::size_t a = 0; a < args.size(); ++a) {
        if (!analytic[a].same_shape(args[a]))
            throw std::runtime_error("finite_diff_check: gradient shape mismatch for argument " +
                                     std::to_string(a));
        for (std::size_t i = 0; i < args[a].data.size(); ++i) {
            const T saved = args[a].data[i];
            args[a].data[i] = saved + epsilon;
            const T lp = project(op.forward(args));
            args[a].data[i] = saved - epsilon;
            const T lm = project(op.forward(args));
            args[a].data[i] = saved;

            const T numeric = (lp - lm) / (T(2) * epsilon);
            const T ana = analytic[a].data[i];
            if (!std::isfinite(static_cast<double>(numeric)) ||
                !std::isfinite(static_cast<double>(ana)))
                throw std::runtime_error("finite_diff_check: non-finite gradient value");
            const T denom = std::max({std::abs(ana), std::abs(numeric), T(1e-8)});
            report.max_rel_err[a] =
                std::max(report.max_rel_err[a], std::abs(ana - numeric) / denom);
        }
    }
    return report;
}

}  // namespace frn
