#pragma once

// Differentiable tensor operations. Image tensors are NCHW. All backward
// passes accumulate (+=) into parent grads so multi-term losses compose.

#include <cmath>
#include <cstdint>

#include "compenkit/tensor.hpp"
#include "compenkit/threading.hpp"

namespace compenkit {

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <typename T>
void check_4d(const TensorT<T>& t, const char* op) {
    if (t.ndim() != 4)
        throw ShapeError(std::string(op) + ": expected 4-d NCHW tensor, got " + shape_str(t.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T, class Fwd, class BwdA, class BwdB>
TensorT<T> binary_elementwise(const TensorT<T>& a, const TensorT<T>& b, const char* name,
                              Fwd fwd, BwdA dfda, BwdB dfdb) {
    detail::check_same_shape(a, b, name);
    auto an = a.node();
    auto bn = b.node();
    TensorT<T> out = detail::make_result<T>(
        a.shape(), {a, b}, [an, bn, dfda, dfdb](TensorNode<T>& y) {
            const std::int64_t n = y.numel();
            if (an->requires_grad) {
                auto ga = an->grad_buf();
                for (std::int64_t i = 0; i < n; ++i)
                    ga[i] += y.grad[i] * dfda(an->data[i], bn->data[i]);
            }
            if (bn->requires_grad) {
                auto gb = bn->grad_buf();
                for (std::int64_t i = 0; i < n; ++i)
                    gb[i] += y.grad[i] * dfdb(an->data[i], bn->data[i]);
            }
        });
    auto yd = out.data();
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) yd[i] = fwd(ad[i], bd[i]);
    return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_elementwise<T>(
        a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_elementwise<T>(
        a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_elementwise<T>(
        a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; });
}

template <typename T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
    return binary_elementwise<T>(
        a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); });
}

template <typename T, class Fwd, class Bwd>
TensorT<T> unary_elementwise(const TensorT<T>& a, Fwd fwd, Bwd dfdx) {
    auto an = a.node();
    TensorT<T> out = detail::make_result<T>(a.shape(), {a}, [an, dfdx](TensorNode<T>& y) {
        if (!an->requires_grad) return;
        auto ga = an->grad_buf();
        for (std::int64_t i = 0; i < y.numel(); ++i)
            ga[i] += y.grad[i] * dfdx(an->data[i], y.data[i]);
    });
    auto yd = out.data();
    const auto ad = a.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) yd[i] = fwd(ad[i]);
    return out;
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T c) {
    return unary_elementwise<T>(a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& a, T c) {
    return unary_elementwise<T>(a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

/// Clamp to [0,1]; gradient is zero outside the open interval.
template <typename T>
TensorT<T> clamp01(const TensorT<T>& a) {
    return unary_elementwise<T>(
        a, [](T x) { return x < T(0) ? T(0) : (x > T(1) ? T(1) : x); },
        [](T x, T) { return (x > T(0) && x < T(1)) ? T(1) : T(0); });
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
    return unary_elementwise<T>(
        a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
    return unary_elementwise<T>(
        a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
TensorT<T> abs_val(const TensorT<T>& a) {
    return unary_elementwise<T>(
        a, [](T x) { return std::abs(x); },
        [](T x, T) { return x >= T(0) ? T(1) : T(-1); });
}

enum class EwKind { Add, Sub, Mul, Clamp01 };

/// Dispatch wrapper matching the flat op contract; clamp01 ignores b.
template <typename T>
TensorT<T> elementwise(EwKind kind, const TensorT<T>& a, const TensorT<T>* b = nullptr) {
    switch (kind) {
    case EwKind::Add: return add(a, *b);
    case EwKind::Sub: return sub(a, *b);
    case EwKind::Mul: return mul(a, *b);
    case EwKind::Clamp01: return clamp01(a);
    }
    throw ArgumentError("elementwise: unknown kind");
}

// ---------------------------------------------------------------------------
// Reductions and shape

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
    auto an = a.node();
    TensorT<T> out = detail::make_result<T>({1}, {a}, [an](TensorNode<T>& y) {
        if (!an->requires_grad) return;
        auto ga = an->grad_buf();
        for (std::int64_t i = 0; i < an->numel(); ++i) ga[i] += y.grad[0];
    });
    // Accumulate in double so large reductions stay accurate in float mode.
    double acc = 0;
    for (T v : a.data()) acc += static_cast<double>(v);
    out.data()[0] = static_cast<T>(acc);
    return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
    const T inv = T(1) / static_cast<T>(a.numel());
    return mul_scalar(sum(a), inv);
}

/// Metadata-only reinterpretation; data is copied, gradient flows through.
template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    auto an = a.node();
    TensorT<T> out = detail::make_result<T>(std::move(shape), {a}, [an](TensorNode<T>& y) {
        if (!an->requires_grad) return;
        auto ga = an->grad_buf();
        for (std::int64_t i = 0; i < y.numel(); ++i) ga[i] += y.grad[i];
    });
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    return out;
}

/// Stack same-shape 3-d slices (C,H,W) into a batch (N,C,H,W). Not differentiable.
template <typename T>
TensorT<T> stack_batch(const std::vector<TensorT<T>>& slices) {
    if (slices.empty()) throw ArgumentError("stack_batch: empty list");
    Shape s = slices[0].shape();
    Shape out_shape = s;
    if (out_shape.size() == 4 && out_shape[0] == 1) out_shape.erase(out_shape.begin());
    Shape full = out_shape;
    full.insert(full.begin(), static_cast<std::int64_t>(slices.size()));
    auto out = TensorT<T>::zeros(full);
    const std::int64_t per = numel_of(out_shape);
    for (std::size_t i = 0; i < slices.size(); ++i) {
        if (slices[i].numel() != per) throw ShapeError("stack_batch: inconsistent slice shapes");
        std::copy(slices[i].data().begin(), slices[i].data().end(),
                  out.data().begin() + static_cast<std::int64_t>(i) * per);
    }
    return out;
}

/// Repeats a batch-1 tensor n times along the batch axis (differentiable).
template <typename T>
TensorT<T> tile_batch(const TensorT<T>& x, std::int64_t n) {
    detail::check_4d(x, "tile_batch");
    if (x.dim(0) != 1) throw ShapeError("tile_batch: input batch must be 1");
    auto xn = x.node();
    Shape s = x.shape();
    s[0] = n;
    auto out = detail::make_result<T>(s, {x}, [=](TensorNode<T>& y) {
        if (!xn->requires_grad) return;
        auto gx = xn->grad_buf();
        const std::int64_t per = xn->numel();
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t i = 0; i < per; ++i) gx[i] += y.grad[b * per + i];
    });
    const std::int64_t per = x.numel();
    for (std::int64_t b = 0; b < n; ++b)
        std::copy(x.data().begin(), x.data().end(), out.data().begin() + b * per);
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions: im2col + small GEMM kernels. The axpy-style loops keep the
// innermost dimension contiguous so the compiler can vectorize them.

namespace detail {

// C(M x N) += A(M x K) * B(K x N), row-major. The 4-way k block keeps the
// inner loop a bare fma-and-store stream that vectorizes without fast-math.
template <typename T>
void gemm_nn(const T* A, const T* B, T* __restrict C, std::int64_t M, std::int64_t K,
             std::int64_t N) {
    for (std::int64_t i = 0; i < M; ++i) {
        T* __restrict c = C + i * N;
        const T* arow = A + i * K;
        std::int64_t k = 0;
        for (; k + 4 <= K; k += 4) {
            const T a0 = arow[k], a1 = arow[k + 1], a2 = arow[k + 2], a3 = arow[k + 3];
            // Post-relu activations are mostly zero in clustered runs; skipping
            // all-zero groups buys more than the branch costs.
            if (a0 == T(0) && a1 == T(0) && a2 == T(0) && a3 == T(0)) continue;
            const T* b0 = B + k * N;
            for (std::int64_t j = 0; j < N; ++j)
                c[j] += a0 * b0[j] + a1 * b0[N + j] + a2 * b0[2 * N + j] + a3 * b0[3 * N + j];
        }
        for (; k < K; ++k) {
            const T a = arow[k];
            if (a == T(0)) continue;
            const T* b = B + k * N;
            for (std::int64_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

// dst(N x M) = src(M x N)^T, row-major. Keeps weight-gradient GEMMs in the
// axpy form above instead of a scalar dot-product reduction.
template <typename T>
void transpose(const T* src, T* dst, std::int64_t M, std::int64_t N) {
    for (std::int64_t i = 0; i < M; ++i)
        for (std::int64_t j = 0; j < N; ++j) dst[j * M + i] = src[i * N + j];
}

// col(c*KH*KW + kh*KW + kw, oh*WO + ow) = src[c, oh*stride - pad + kh, ow*stride - pad + kw]
// for one sample; out-of-image taps are zero.
template <typename T>
void im2col(const T* src, T* col, std::int64_t C, std::int64_t H, std::int64_t W,
            std::int64_t KH, std::int64_t KW, int stride, int pad, std::int64_t HO,
            std::int64_t WO) {
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t kh = 0; kh < KH; ++kh)
            for (std::int64_t kw = 0; kw < KW; ++kw) {
                T* dst = col + ((c * KH + kh) * KW + kw) * HO * WO;
                for (std::int64_t oh = 0; oh < HO; ++oh) {
                    const std::int64_t ih = oh * stride - pad + kh;
                    T* d = dst + oh * WO;
                    if (ih < 0 || ih >= H) {
                        for (std::int64_t ow = 0; ow < WO; ++ow) d[ow] = T(0);
                        continue;
                    }
                    const T* s = src + (c * H + ih) * W;
                    const std::int64_t iw0 = -pad + kw;
                    if (stride == 1) {
                        for (std::int64_t ow = 0; ow < WO; ++ow) {
                            const std::int64_t iw = iw0 + ow;
                            d[ow] = (iw >= 0 && iw < W) ? s[iw] : T(0);
                        }
                    } else {
                        for (std::int64_t ow = 0; ow < WO; ++ow) {
                            const std::int64_t iw = iw0 + ow * stride;
                            d[ow] = (iw >= 0 && iw < W) ? s[iw] : T(0);
                        }
                    }
                }
            }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im_add(const T* col, T* dst, std::int64_t C, std::int64_t H, std::int64_t W,
                std::int64_t KH, std::int64_t KW, int stride, int pad, std::int64_t HO,
                std::int64_t WO) {
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t kh = 0; kh < KH; ++kh)
            for (std::int64_t kw = 0; kw < KW; ++kw) {
                const T* s = col + ((c * KH + kh) * KW + kw) * HO * WO;
                for (std::int64_t oh = 0; oh < HO; ++oh) {
                    const std::int64_t ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    T* d = dst + (c * H + ih) * W;
                    const T* sr = s + oh * WO;
                    const std::int64_t iw0 = -pad + kw;
                    for (std::int64_t ow = 0; ow < WO; ++ow) {
                        const std::int64_t iw = iw0 + ow * stride;
                        if (iw >= 0 && iw < W) d[iw] += sr[ow];
                    }
                }
            }
}

} // namespace detail

/// conv2d, weight (OC, IC, KH, KW), zero padding.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int padding) {
    detail::check_4d(x, "conv2d input");
    detail::check_4d(w, "conv2d weight");
    if (stride <= 0 || padding < 0) throw ArgumentError("conv2d: stride must be >0, padding >=0");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t OC = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    if (w.dim(1) != C)
        throw ShapeError("conv2d: input channels " + std::to_string(C) + " != weight in_ch " +
                         std::to_string(w.dim(1)));
    if (b.numel() != OC) throw ShapeError("conv2d: bias size != out channels");
    const std::int64_t HO = (H + 2 * padding - KH) / stride + 1;
    const std::int64_t WO = (W + 2 * padding - KW) / stride + 1;
    if (HO <= 0 || WO <= 0) throw ShapeError("conv2d: kernel larger than padded input");

    const std::int64_t CKK = C * KH * KW;
    const std::int64_t S = HO * WO;

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    auto out = detail::make_result<T>(
        {N, OC, HO, WO}, {x, w, b},
        [=](TensorNode<T>& y) {
            const T* gy = y.grad.data();
            if (xn->requires_grad) {
                auto gx = xn->grad_buf();
                std::vector<T> wT(static_cast<std::size_t>(CKK * OC));
                detail::transpose(wn->data.data(), wT.data(), OC, CKK);
                parallel_for(N, [&](std::int64_t n) {
                    std::vector<T> dcol(static_cast<std::size_t>(CKK * S), T(0));
                    detail::gemm_nn(wT.data(), gy + n * OC * S, dcol.data(), CKK, OC, S);
                    detail::col2im_add(dcol.data(), gx.data() + n * C * H * W, C, H, W, KH, KW,
                                       stride, padding, HO, WO);
                });
            }
            if (wn->requires_grad) {
                auto gw = wn->grad_buf();
                std::vector<T> col(static_cast<std::size_t>(CKK * S));
                std::vector<T> colT(static_cast<std::size_t>(CKK * S));
                for (std::int64_t n = 0; n < N; ++n) {
                    detail::im2col(xn->data.data() + n * C * H * W, col.data(), C, H, W, KH, KW,
                                   stride, padding, HO, WO);
                    detail::transpose(col.data(), colT.data(), CKK, S);
                    detail::gemm_nn(gy + n * OC * S, colT.data(), gw.data(), OC, S, CKK);
                }
            }
            if (bn->requires_grad) {
                auto gb = bn->grad_buf();
                for (std::int64_t oc = 0; oc < OC; ++oc) {
                    T acc = T(0);
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t i = 0; i < S; ++i) acc += gy[(n * OC + oc) * S + i];
                    gb[oc] += acc;
                }
            }
        });

    const T* xd = x.data().data();
    const T* wd = w.data().data();
    const T* bd = b.data().data();
    T* yd = out.data().data();
    parallel_for(N, [&](std::int64_t n) {
        std::vector<T> col(static_cast<std::size_t>(CKK * S));
        detail::im2col(xd + n * C * H * W, col.data(), C, H, W, KH, KW, stride, padding, HO, WO);
        T* y = yd + n * OC * S;
        for (std::int64_t oc = 0; oc < OC; ++oc)
            for (std::int64_t i = 0; i < S; ++i) y[oc * S + i] = bd[oc];
        detail::gemm_nn(wd, col.data(), y, OC, CKK, S);
    });
    return out;
}

/// Transposed convolution, weight (IC, OC, KH, KW). Adjoint of conv2d with the
/// same stride/padding when the weight tensor is shared.
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride, int padding) {
    detail::check_4d(x, "conv_transpose2d input");
    detail::check_4d(w, "conv_transpose2d weight");
    if (stride <= 0 || padding < 0)
        throw ArgumentError("conv_transpose2d: stride must be >0, padding >=0");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t OC = w.dim(1), KH = w.dim(2), KW = w.dim(3);
    if (w.dim(0) != C)
        throw ShapeError("conv_transpose2d: input channels " + std::to_string(C) +
                         " != weight in_ch " + std::to_string(w.dim(0)));
    if (b.numel() != OC) throw ShapeError("conv_transpose2d: bias size != out channels");
    const std::int64_t HO = (H - 1) * stride - 2 * padding + KH;
    const std::int64_t WO = (W - 1) * stride - 2 * padding + KW;
    if (HO <= 0 || WO <= 0) throw ShapeError("conv_transpose2d: empty output");

    // Column geometry mirrors conv2d run backwards: the output (OC, HO, WO)
    // plays the image role, the input (C, H, W) the patch-grid role.
    const std::int64_t OKK = OC * KH * KW;
    const std::int64_t S = H * W;

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    auto out = detail::make_result<T>(
        {N, OC, HO, WO}, {x, w, b},
        [=](TensorNode<T>& y) {
            const T* gy = y.grad.data();
            if (xn->requires_grad) {
                // Adjoint of the adjoint: a plain convolution of gy with w.
                auto gx = xn->grad_buf();
                parallel_for(N, [&](std::int64_t n) {
                    std::vector<T> col(static_cast<std::size_t>(OKK * S));
                    detail::im2col(gy + n * OC * HO * WO, col.data(), OC, HO, WO, KH, KW,
                                   stride, padding, H, W);
                    detail::gemm_nn(wn->data.data(), col.data(), gx.data() + n * C * S, C, OKK,
                                    S);
                });
            }
            if (wn->requires_grad) {
                auto gw = wn->grad_buf();
                std::vector<T> col(static_cast<std::size_t>(OKK * S));
                std::vector<T> colT(static_cast<std::size_t>(OKK * S));
                for (std::int64_t n = 0; n < N; ++n) {
                    detail::im2col(gy + n * OC * HO * WO, col.data(), OC, HO, WO, KH, KW,
                                   stride, padding, H, W);
                    detail::transpose(col.data(), colT.data(), OKK, S);
                    detail::gemm_nn(xn->data.data() + n * C * S, colT.data(), gw.data(), C, S,
                                    OKK);
                }
            }
            if (bn->requires_grad) {
                auto gb = bn->grad_buf();
                for (std::int64_t oc = 0; oc < OC; ++oc) {
                    T acc = T(0);
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t i = 0; i < HO * WO; ++i)
                            acc += gy[(n * OC + oc) * HO * WO + i];
                    gb[oc] += acc;
                }
            }
        });

    const T* xd = x.data().data();
    const T* wd = w.data().data();
    const T* bd = b.data().data();
    T* yd = out.data().data();
    std::vector<T> wT(static_cast<std::size_t>(OKK * C));
    detail::transpose(wd, wT.data(), C, OKK);
    parallel_for(N, [&](std::int64_t n) {
        std::vector<T> col(static_cast<std::size_t>(OKK * S), T(0));
        detail::gemm_nn(wT.data(), xd + n * C * S, col.data(), OKK, C, S);
        T* y = yd + n * OC * HO * WO;
        for (std::int64_t oc = 0; oc < OC; ++oc)
            for (std::int64_t i = 0; i < HO * WO; ++i) y[oc * HO * WO + i] = bd[oc];
        detail::col2im_add(col.data(), y, OC, HO, WO, KH, KW, stride, padding, H, W);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Pixel shuffle / unshuffle

// Channel convention: source channel c with in-block offset (dy, dx) maps to
// unshuffled channel c*k*k + dy*k + dx. shuffle() is the exact inverse.

template <typename T>
TensorT<T> pixel_unshuffle(const TensorT<T>& x, int k) {
    detail::check_4d(x, "pixel_unshuffle");
    if (k < 1) throw ArgumentError("pixel_unshuffle: k must be >= 1");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % k != 0 || W % k != 0)
        throw ShapeError("pixel_unshuffle: spatial dims " + shape_str(x.shape()) +
                         " not divisible by k=" + std::to_string(k));
    const std::int64_t HO = H / k, WO = W / k, CO = C * k * k;

    auto map_index = [=](std::int64_t out_idx) {
        // out index -> input index
        const std::int64_t ow = out_idx % WO;
        std::int64_t rest = out_idx / WO;
        const std::int64_t oh = rest % HO;
        rest /= HO;
        const std::int64_t oc = rest % CO;
        const std::int64_t n = rest / CO;
        const std::int64_t c = oc / (k * k);
        const std::int64_t dy = (oc / k) % k;
        const std::int64_t dx = oc % k;
        return ((n * C + c) * H + oh * k + dy) * W + ow * k + dx;
    };

    auto xn = x.node();
    auto out = detail::make_result<T>({N, CO, HO, WO}, {x}, [=](TensorNode<T>& y) {
        if (!xn->requires_grad) return;
        auto gx = xn->grad_buf();
        for (std::int64_t i = 0; i < y.numel(); ++i) gx[map_index(i)] += y.grad[i];
    });
    auto yd = out.data();
    const auto xd = x.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) yd[i] = xd[map_index(i)];
    return out;
}

template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int k) {
    detail::check_4d(x, "pixel_shuffle");
    if (k < 1) throw ArgumentError("pixel_shuffle: k must be >= 1");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C % (static_cast<std::int64_t>(k) * k) != 0)
        throw ShapeError("pixel_shuffle: channels " + std::to_string(C) +
                         " not divisible by k^2=" + std::to_string(k * k));
    const std::int64_t CO = C / (k * k), HO = H * k, WO = W * k;

    auto map_index = [=](std::int64_t out_idx) {
        const std::int64_t ow = out_idx % WO;
        std::int64_t rest = out_idx / WO;
        const std::int64_t oh = rest % HO;
        rest /= HO;
        const std::int64_t oc = rest % CO;
        const std::int64_t n = rest / CO;
        const std::int64_t dy = oh % k, dx = ow % k;
        const std::int64_t c = oc * k * k + dy * k + dx;
        return ((n * C + c) * H + oh / k) * W + ow / k;
    };

    auto xn = x.node();
    auto out = detail::make_result<T>({N, CO, HO, WO}, {x}, [=](TensorNode<T>& y) {
        if (!xn->requires_grad) return;
        auto gx = xn->grad_buf();
        for (std::int64_t i = 0; i < y.numel(); ++i) gx[map_index(i)] += y.grad[i];
    });
    auto yd = out.data();
    const auto xd = x.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) yd[i] = xd[map_index(i)];
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear grid sampling

// grid is (N, 2, HG, WG): channel 0 = x, channel 1 = y, normalized so that
// (-1,-1) is the center of the top-left pixel and (1,1) the bottom-right.
// Out-of-range coordinates sample the border-clamped value.
template <typename T>
TensorT<T> grid_sample_bilinear(const TensorT<T>& image, const TensorT<T>& grid) {
    detail::check_4d(image, "grid_sample image");
    detail::check_4d(grid, "grid_sample grid");
    if (grid.dim(1) != 2)
        throw ShapeError("grid_sample: grid must have 2 channels (x,y), got " +
                         shape_str(grid.shape()));
    if (grid.dim(0) != image.dim(0)) throw ShapeError("grid_sample: batch mismatch");
    const std::int64_t N = image.dim(0), C = image.dim(1), H = image.dim(2), W = image.dim(3);
    const std::int64_t HG = grid.dim(2), WG = grid.dim(3);

    // Unnormalize and clamp; also report whether the coordinate was interior
    // (clamped coordinates get zero gradient w.r.t. the grid).
    auto unnorm = [](T g, std::int64_t size, T& u, T& dscale) {
        u = (g + T(1)) * T(0.5) * static_cast<T>(size - 1);
        dscale = T(0.5) * static_cast<T>(size - 1);
        if (u < T(0)) {
            u = T(0);
            dscale = T(0);
        } else if (u > static_cast<T>(size - 1)) {
            u = static_cast<T>(size - 1);
            dscale = T(0);
        }
    };

    auto in = image.node();
    auto gn = grid.node();
    auto out = detail::make_result<T>(
        {N, C, HG, WG}, {image, grid},
        [=](TensorNode<T>& y) {
            const T* gy = y.grad.data();
            // Batch-parallel: each thread owns one n slice of both grads.
            parallel_for(N, [&](std::int64_t n) {
                for (std::int64_t p = 0; p < HG * WG; ++p) {
                    T u, v, dux, dvy;
                    unnorm(gn->data[(n * 2 + 0) * HG * WG + p], W, u, dux);
                    unnorm(gn->data[(n * 2 + 1) * HG * WG + p], H, v, dvy);
                    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(u));
                    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(v));
                    const std::int64_t x1 = std::min(x0 + 1, W - 1);
                    const std::int64_t y1 = std::min(y0 + 1, H - 1);
                    const T fx = u - static_cast<T>(x0);
                    const T fy = v - static_cast<T>(y0);
                    T gu = T(0), gv = T(0);
                    for (std::int64_t c = 0; c < C; ++c) {
                        const T g = gy[(n * C + c) * HG * WG + p];
                        if (g == T(0)) continue;
                        const T* img = in->data.data() + (n * C + c) * H * W;
                        const T v00 = img[y0 * W + x0], v01 = img[y0 * W + x1];
                        const T v10 = img[y1 * W + x0], v11 = img[y1 * W + x1];
                        if (in->requires_grad) {
                            T* gi = in->grad.data() + (n * C + c) * H * W;
                            gi[y0 * W + x0] += g * (T(1) - fx) * (T(1) - fy);
                            gi[y0 * W + x1] += g * fx * (T(1) - fy);
                            gi[y1 * W + x0] += g * (T(1) - fx) * fy;
                            gi[y1 * W + x1] += g * fx * fy;
                        }
                        gu += g * ((v01 - v00) * (T(1) - fy) + (v11 - v10) * fy);
                        gv += g * ((v10 - v00) * (T(1) - fx) + (v11 - v01) * fx);
                    }
                    if (gn->requires_grad) {
                        gn->grad[(n * 2 + 0) * HG * WG + p] += gu * dux;
                        gn->grad[(n * 2 + 1) * HG * WG + p] += gv * dvy;
                    }
                }
            });
        });

    // Pre-size the image grad so batch-parallel scatter writes are safe.
    if (out.node()->requires_grad && in->requires_grad) (void)in->grad_buf();
    if (out.node()->requires_grad && gn->requires_grad) (void)gn->grad_buf();

    const T* img_all = image.data().data();
    const T* grd = grid.data().data();
    T* yd = out.data().data();
    parallel_for(N * C, [&](std::int64_t idx) {
        const std::int64_t n = idx / C, c = idx % C;
        const T* img = img_all + (n * C + c) * H * W;
        for (std::int64_t p = 0; p < HG * WG; ++p) {
            T u, v, dux, dvy;
            unnorm(grd[(n * 2 + 0) * HG * WG + p], W, u, dux);
            unnorm(grd[(n * 2 + 1) * HG * WG + p], H, v, dvy);
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(u));
            const std::int64_t y0 = static_cast<std::int64_t>(std::floor(v));
            const std::int64_t x1 = std::min(x0 + 1, W - 1);
            const std::int64_t y1 = std::min(y0 + 1, H - 1);
            const T fx = u - static_cast<T>(x0);
            const T fy = v - static_cast<T>(y0);
            const T top = img[y0 * W + x0] * (T(1) - fx) + img[y0 * W + x1] * fx;
            const T bot = img[y1 * W + x0] * (T(1) - fx) + img[y1 * W + x1] * fx;
            yd[(n * C + c) * HG * WG + p] = top * (T(1) - fy) + bot * fy;
        }
    });
    return out;
}

/// Identity sampling grid (1, 2, H, W) over the regular normalized mesh.
template <typename T>
TensorT<T> identity_grid(std::int64_t H, std::int64_t W) {
    auto g = TensorT<T>::zeros({1, 2, H, W});
    auto d = g.data();
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            d[i * W + j] = W > 1 ? T(-1) + T(2) * static_cast<T>(j) / static_cast<T>(W - 1) : T(0);
            d[H * W + i * W + j] =
                H > 1 ? T(-1) + T(2) * static_cast<T>(i) / static_cast<T>(H - 1) : T(0);
        }
    return g;
}

} // namespace compenkit
