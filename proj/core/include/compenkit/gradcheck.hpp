#pragma once

// Central finite-difference verification of analytic gradients.
//
// Two modes:
//  - gradcheck<T>: FD and analytic gradient both computed at precision T.
//  - gradcheck_mixed: analytic gradient at low precision (float) checked
//    against an FD oracle evaluated at high precision (double), which keeps
//    the FD quotient out of single-precision roundoff.
//
// Probed elements are sampled from entries whose analytic gradient is not
// negligible relative to the tensor's largest gradient: FD cannot resolve
// near-zero derivatives against the function's own rounding noise.

#include <functional>
#include <random>
#include <vector>

#include "compenkit/ops.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

template <typename T>
struct GradcheckOptions {
    T eps = std::is_same_v<T, double> ? T(1e-5) : T(1e-2);
    // Elements checked per input tensor; large tensors are subsampled.
    int max_elems_per_tensor = 24;
    unsigned seed = 0;
};

/// A differentiable scalar function of named inputs, ready to check.
template <typename T>
struct GradcheckProblem {
    std::function<TensorT<T>(const std::vector<TensorT<T>>&)> f;
    std::vector<TensorT<T>> inputs;
};

namespace detail {

// Deterministic probe set: a random subset of the elements carrying at least
// 1% of the tensor's peak gradient magnitude (all elements if the gradient is
// uniformly tiny).
template <typename T>
std::vector<std::int64_t> probe_indices(std::span<const T> analytic, int max_elems,
                                        std::mt19937& rng) {
    const std::int64_t n = static_cast<std::int64_t>(analytic.size());
    double gmax = 0;
    for (T v : analytic) gmax = std::max(gmax, std::abs(static_cast<double>(v)));
    std::vector<std::int64_t> idx;
    for (std::int64_t i = 0; i < n; ++i)
        if (std::abs(static_cast<double>(analytic[i])) >= 0.01 * gmax) idx.push_back(i);
    if (idx.empty())
        for (std::int64_t i = 0; i < n; ++i) idx.push_back(i);
    if (static_cast<int>(idx.size()) > max_elems) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(max_elems));
    }
    return idx;
}

// Central differences at steps eps and eps/2. If the two estimates disagree,
// the probe straddles a kink (relu, abs, bilinear cell boundary) where a
// central difference is meaningless; such points are skipped.
struct FdEstimate {
    double value = 0;
    bool smooth = true;
};

template <class Eval>
FdEstimate fd_two_scale(Eval&& eval_at, double eps, double scale_hint) {
    const double f1p = eval_at(eps), f1m = eval_at(-eps);
    const double f2p = eval_at(eps / 2), f2m = eval_at(-eps / 2);
    FdEstimate e;
    e.value = (f1p - f1m) / (2.0 * eps);
    const double fd_half = (f2p - f2m) / eps;
    const double denom = std::max({std::abs(e.value), std::abs(fd_half), scale_hint});
    e.smooth = std::abs(e.value - fd_half) <= 0.05 * std::max(denom, 1e-8);
    return e;
}

} // namespace detail

/// Same-precision check. Returns max over probed elements of
/// |analytic - fd| / max(|analytic|, |fd|, 1e-8).
template <typename T>
double gradcheck(const std::function<TensorT<T>(const std::vector<TensorT<T>>&)>& f,
                 std::vector<TensorT<T>> inputs, GradcheckOptions<T> opt = {}) {
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    TensorT<T> loss = f(inputs);
    if (loss.numel() != 1) throw ArgumentError("gradcheck: f must be scalar-valued");
    backward(loss);

    std::mt19937 rng(opt.seed);
    // Peak gradient magnitude over the whole problem. Entries far below it
    // cannot be resolved by the FD quotient against the function's rounding
    // noise, so the relative-error denominator is floored at 1e-3 of it.
    double gscale = 0;
    for (auto& in : inputs)
        for (T v : in.grad()) gscale = std::max(gscale, std::abs(static_cast<double>(v)));
    double max_rel = 0.0;
    for (auto& in : inputs) {
        auto analytic = in.grad();
        double gmax = 0;
        for (T v : analytic) gmax = std::max(gmax, std::abs(static_cast<double>(v)));
        for (std::int64_t i :
             detail::probe_indices<T>(analytic, opt.max_elems_per_tensor, rng)) {
            const T orig = in.data()[i];
            NoGradGuard ng;
            auto eval_at = [&](double d) {
                in.data()[i] = orig + static_cast<T>(d);
                const double v = static_cast<double>(f(inputs).item());
                in.data()[i] = orig;
                return v;
            };
            const auto fd =
                detail::fd_two_scale(eval_at, static_cast<double>(opt.eps), 0.01 * gmax);
            if (!fd.smooth) continue;
            const double an = static_cast<double>(analytic[i]);
            const double denom =
                std::max({std::abs(an), std::abs(fd.value), 1e-3 * gscale, 1e-8});
            max_rel = std::max(max_rel, std::abs(an - fd.value) / denom);
        }
    }
    return max_rel;
}

/// Low-precision analytic gradient vs a high-precision FD oracle. `lo` and
/// `hi` must be the same problem built at the two precisions (same seeds, so
/// inputs agree up to float rounding). `eps` applies to the double oracle.
inline double gradcheck_mixed(const GradcheckProblem<float>& lo,
                              const GradcheckProblem<double>& hi, double eps = 1e-5,
                              int max_elems_per_tensor = 24, unsigned seed = 0) {
    if (lo.inputs.size() != hi.inputs.size())
        throw ArgumentError("gradcheck_mixed: input count mismatch");
    auto inputs = lo.inputs;
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    TensorT<float> loss = lo.f(inputs);
    if (loss.numel() != 1) throw ArgumentError("gradcheck_mixed: f must be scalar-valued");
    backward(loss);

    std::mt19937 rng(seed);
    double gscale = 0;
    for (auto& in : inputs)
        for (float v : in.grad()) gscale = std::max(gscale, std::abs(static_cast<double>(v)));
    double max_rel = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto analytic = inputs[t].grad();
        double gmax = 0;
        for (float v : analytic) gmax = std::max(gmax, std::abs(static_cast<double>(v)));
        auto oracle_in = hi.inputs;
        if (oracle_in[t].numel() != inputs[t].numel())
            throw ArgumentError("gradcheck_mixed: input shape mismatch");
        for (std::int64_t i :
             detail::probe_indices<float>(analytic, max_elems_per_tensor, rng)) {
            const double orig = oracle_in[t].data()[i];
            NoGradGuard ng;
            auto eval_at = [&](double d) {
                oracle_in[t].data()[i] = orig + d;
                const double v = hi.f(oracle_in).item();
                oracle_in[t].data()[i] = orig;
                return v;
            };
            const auto fd = detail::fd_two_scale(eval_at, eps, 0.01 * gmax);
            if (!fd.smooth) continue;
            const double an = static_cast<double>(analytic[i]);
            const double denom =
                std::max({std::abs(an), std::abs(fd.value), 1e-3 * gscale, 1e-8});
            max_rel = std::max(max_rel, std::abs(an - fd.value) / denom);
        }
    }
    return max_rel;
}

/// Random-weighted sum; keeps gradcheck losses O(1) regardless of tensor size.
template <typename T>
TensorT<T> probe_loss(const TensorT<T>& out, unsigned seed) {
    std::mt19937 rng(seed);
    auto w = TensorT<T>::rand_uniform(out.shape(), rng, T(0.5), T(1.5));
    std::bernoulli_distribution flip(0.5);
    for (auto& v : w.data())
        if (flip(rng)) v = -v;
    return sum(mul(out, w));
}

} // namespace compenkit
