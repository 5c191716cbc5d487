#pragma once

// Training objective: unweighted sum of pixel-wise l1, l2 and an SSIM term
// (1 - SSIM), each selectable. All terms are differentiable.

#include <cmath>
#include <string>

#include "compenkit/ops.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

struct LossTerms {
    bool l1 = true;
    bool l2 = true;
    bool ssim = true;

    bool any() const { return l1 || l2 || ssim; }
    std::string str() const {
        std::string s;
        if (l1) s += "l1";
        if (l2) s += (s.empty() ? "" : "+") + std::string("l2");
        if (ssim) s += (s.empty() ? "" : "+") + std::string("ssim");
        return s.empty() ? "none" : s;
    }
};

namespace detail {

template <typename T>
TensorT<T> gaussian_window_11() {
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    std::vector<T> k(win * win);
    double sum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - (win - 1) / 2.0;
            const double dx = j - (win - 1) / 2.0;
            const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            k[i * win + j] = static_cast<T>(v);
            sum += v;
        }
    for (auto& v : k) v = static_cast<T>(static_cast<double>(v) / sum);
    return TensorT<T>::from_data({1, 1, win, win}, std::move(k));
}

// Per-channel Gaussian blur with valid windows: channels are folded into the
// batch so a single-channel kernel applies to each independently.
template <typename T>
TensorT<T> blur_valid(const TensorT<T>& x, const TensorT<T>& window, const TensorT<T>& zero_bias) {
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto folded = reshape(x, {N * C, 1, H, W});
    auto blurred = conv2d(folded, window, zero_bias, 1, 0);
    return reshape(blurred, {N, C, blurred.dim(2), blurred.dim(3)});
}

} // namespace detail

/// Differentiable mean SSIM between [0,1] images (N,C,H,W).
template <typename T>
TensorT<T> ssim_differentiable(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "ssim");
    if (a.dim(2) < 11 || a.dim(3) < 11)
        throw ArgumentError("ssim: image smaller than the 11x11 window");
    const T c1 = T(0.01 * 0.01);
    const T c2 = T(0.03 * 0.03);
    auto window = detail::gaussian_window_11<T>();
    auto zero_bias = TensorT<T>::zeros({1});

    auto mu_a = detail::blur_valid(a, window, zero_bias);
    auto mu_b = detail::blur_valid(b, window, zero_bias);
    auto e_aa = detail::blur_valid(mul(a, a), window, zero_bias);
    auto e_bb = detail::blur_valid(mul(b, b), window, zero_bias);
    auto e_ab = detail::blur_valid(mul(a, b), window, zero_bias);

    auto mu_aa = mul(mu_a, mu_a);
    auto mu_bb = mul(mu_b, mu_b);
    auto mu_ab = mul(mu_a, mu_b);
    auto var_a = sub(e_aa, mu_aa);
    auto var_b = sub(e_bb, mu_bb);
    auto cov = sub(e_ab, mu_ab);

    auto num = mul(add_scalar(mul_scalar(mu_ab, T(2)), c1), add_scalar(mul_scalar(cov, T(2)), c2));
    auto den = mul(add_scalar(add(mu_aa, mu_bb), c1), add_scalar(add(var_a, var_b), c2));
    return mean(div(num, den));
}

template <typename T>
struct LossResult {
    TensorT<T> total;
    double l1 = 0, l2 = 0, ssim_term = 0;
};

/// L = [L_l1] + [L_l2] + [1 - SSIM], unweighted sum of the selected terms.
template <typename T>
LossResult<T> loss(const TensorT<T>& x_hat, const TensorT<T>& x, const LossTerms& terms) {
    detail::check_same_shape(x_hat, x, "loss");
    if (!terms.any()) throw ArgumentError("loss: no terms selected");
    LossResult<T> r;
    auto diff = sub(x_hat, x);
    if (terms.l1) {
        auto t = mean(abs_val(diff));
        r.l1 = static_cast<double>(t.item());
        r.total = r.total.defined() ? add(r.total, t) : t;
    }
    if (terms.l2) {
        auto t = mean(mul(diff, diff));
        r.l2 = static_cast<double>(t.item());
        r.total = r.total.defined() ? add(r.total, t) : t;
    }
    if (terms.ssim) {
        auto t = sub(TensorT<T>::scalar(T(1)), ssim_differentiable(x_hat, x));
        r.ssim_term = static_cast<double>(t.item());
        r.total = r.total.defined() ? add(r.total, t) : t;
    }
    return r;
}

} // namespace compenkit
