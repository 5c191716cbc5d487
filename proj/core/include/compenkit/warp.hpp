#pragma once

// GANet: coarse-to-fine geometric correction. An affine grid and a TPS grid
// are composed by bilinear grid sampling into a coarse grid, which a small
// residual conv net refines before the final image warp.
//
// Sampling grids are (1, 2, H, W) tensors: channel 0 = x, channel 1 = y, in
// the normalized [-1,1] convention of grid_sample_bilinear.

#include <array>
#include <random>
#include <vector>

#include "compenkit/layers.hpp"
#include "compenkit/linalg.hpp"
#include "compenkit/ops.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

// ---------------------------------------------------------------------------
// Affine grid

/// grid(i,j) = theta * (x_j, y_i, 1)^T over the regular normalized mesh.
/// theta is a (2,3) tensor; differentiable w.r.t. theta.
template <typename T>
TensorT<T> affine_grid(const TensorT<T>& theta, std::int64_t H, std::int64_t W) {
    if (theta.shape() != Shape{2, 3})
        throw ShapeError("affine_grid: theta must be (2,3), got " + shape_str(theta.shape()));
    if (H < 1 || W < 1) throw ArgumentError("affine_grid: H, W must be >= 1");

    auto tn = theta.node();
    auto out = detail::make_result<T>({1, 2, H, W}, {theta}, [=](TensorNode<T>& y) {
        if (!tn->requires_grad) return;
        auto gt = tn->grad_buf();
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                const T x = W > 1 ? T(-1) + T(2) * static_cast<T>(j) / static_cast<T>(W - 1) : T(0);
                const T yy = H > 1 ? T(-1) + T(2) * static_cast<T>(i) / static_cast<T>(H - 1) : T(0);
                const T gx = y.grad[i * W + j];
                const T gy = y.grad[H * W + i * W + j];
                gt[0] += gx * x;
                gt[1] += gx * yy;
                gt[2] += gx;
                gt[3] += gy * x;
                gt[4] += gy * yy;
                gt[5] += gy;
            }
    });
    auto d = out.data();
    const auto t = theta.data();
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const T x = W > 1 ? T(-1) + T(2) * static_cast<T>(j) / static_cast<T>(W - 1) : T(0);
            const T y = H > 1 ? T(-1) + T(2) * static_cast<T>(i) / static_cast<T>(H - 1) : T(0);
            d[i * W + j] = t[0] * x + t[1] * y + t[2];
            d[H * W + i * W + j] = t[3] * x + t[4] * y + t[5];
        }
    return out;
}

/// Learnable affine warp parameters; identity = [[1,0,0],[0,1,0]].
template <typename T>
struct AffineParamsT {
    TensorT<T> theta; // (2,3)

    static AffineParamsT identity() {
        AffineParamsT p;
        p.theta = TensorT<T>::from_data({2, 3}, {T(1), T(0), T(0), T(0), T(1), T(0)});
        p.theta.set_requires_grad(true);
        return p;
    }
};

using AffineParams = AffineParamsT<float>;

// ---------------------------------------------------------------------------
// Thin plate spline

inline double tps_kernel(double r2) {
    // U(r) = r^2 log(r^2), U(0) = 0
    return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

/// Four corners of [-1,1]^2 plus the center.
inline std::vector<std::array<double, 2>> default_tps_ctrl_points() {
    return {{-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}, {0.0, 0.0}};
}

/// Regular grid layout as an alternative control-point arrangement.
inline std::vector<std::array<double, 2>> grid_tps_ctrl_points(int nx, int ny) {
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i < ny; ++i)
        for (int j = 0; j < nx; ++j)
            pts.push_back({nx > 1 ? -1.0 + 2.0 * j / (nx - 1) : 0.0,
                           ny > 1 ? -1.0 + 2.0 * i / (ny - 1) : 0.0});
    return pts;
}

/// Fitted TPS coefficients for one output dimension: n radial weights followed
/// by the affine part (a0, ax, ay).
struct TpsCoeffs {
    std::vector<double> wx, wy; // size n+3 each
};

namespace detail {

inline std::vector<double> tps_system_matrix(const std::vector<std::array<double, 2>>& ctrl) {
    const std::size_t n = ctrl.size();
    const std::size_t m = n + 3;
    std::vector<double> L(m * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = ctrl[i][0] - ctrl[j][0];
            const double dy = ctrl[i][1] - ctrl[j][1];
            L[i * m + j] = tps_kernel(dx * dx + dy * dy);
        }
        L[i * m + n] = 1.0;
        L[i * m + n + 1] = ctrl[i][0];
        L[i * m + n + 2] = ctrl[i][1];
        L[(n + 0) * m + i] = 1.0;
        L[(n + 1) * m + i] = ctrl[i][0];
        L[(n + 2) * m + i] = ctrl[i][1];
    }
    return L;
}

} // namespace detail

/// Solves the TPS interpolation system sending each control point to
/// point + offset. offsets is row-major n x 2 (dx, dy).
inline TpsCoeffs tps_fit(const std::vector<std::array<double, 2>>& ctrl,
                         const std::vector<double>& offsets) {
    const std::size_t n = ctrl.size();
    if (n < 3) throw DegenerateError("tps_fit: need at least 3 control points");
    if (offsets.size() != 2 * n) throw ShapeError("tps_fit: offsets must be n x 2");
    const std::size_t m = n + 3;
    auto L = detail::tps_system_matrix(ctrl);
    std::vector<double> bx(m, 0.0), by(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        bx[i] = ctrl[i][0] + offsets[2 * i];
        by[i] = ctrl[i][1] + offsets[2 * i + 1];
    }
    TpsCoeffs c;
    c.wx = solve_dense(L, bx, m);
    c.wy = solve_dense(L, by, m);
    return c;
}

/// Learnable TPS warp: fixed control points, learnable offsets, precomputed
/// inverse of the TPS system matrix.
template <typename T>
struct TpsParamsT {
    std::vector<std::array<double, 2>> ctrl_points;
    TensorT<T> offsets;                        // (n, 2)
    std::vector<double> system_matrix_inverse; // (n+3)^2 row-major

    static TpsParamsT make(std::vector<std::array<double, 2>> ctrl) {
        if (ctrl.size() < 3) throw DegenerateError("TpsParams: need at least 3 control points");
        TpsParamsT p;
        p.system_matrix_inverse =
            invert_dense(detail::tps_system_matrix(ctrl), ctrl.size() + 3); // throws if degenerate
        p.ctrl_points = std::move(ctrl);
        p.offsets = TensorT<T>::zeros({static_cast<std::int64_t>(p.ctrl_points.size()), 2});
        p.offsets.set_requires_grad(true);
        return p;
    }
};

using TpsParams = TpsParamsT<float>;

/// Evaluates the fitted TPS on the regular mesh. Because base control targets
/// equal the control points, the grid is the identity mesh plus a displacement
/// linear in the offsets; differentiable w.r.t. offsets.
template <typename T>
TensorT<T> tps_grid(const TpsParamsT<T>& tps, std::int64_t H, std::int64_t W) {
    const std::size_t n = tps.ctrl_points.size();
    const std::size_t m = n + 3;
    if (tps.offsets.shape() != Shape{static_cast<std::int64_t>(n), 2})
        throw ShapeError("tps_grid: offsets shape mismatch");

    // s[p*n + i]: sensitivity of the displacement at mesh point p to offset i.
    // s = Linv^T basis(p), truncated to the first n rows.
    auto sens = std::make_shared<std::vector<double>>(static_cast<std::size_t>(H * W) * n);
    std::vector<double> basis(m);
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double x = W > 1 ? -1.0 + 2.0 * j / (W - 1) : 0.0;
            const double y = H > 1 ? -1.0 + 2.0 * i / (H - 1) : 0.0;
            for (std::size_t cix = 0; cix < n; ++cix) {
                const double dx = x - tps.ctrl_points[cix][0];
                const double dy = y - tps.ctrl_points[cix][1];
                basis[cix] = tps_kernel(dx * dx + dy * dy);
            }
            basis[n] = 1.0;
            basis[n + 1] = x;
            basis[n + 2] = y;
            const std::size_t p = static_cast<std::size_t>(i * W + j);
            for (std::size_t cix = 0; cix < n; ++cix) {
                double acc = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                    acc += tps.system_matrix_inverse[r * m + cix] * basis[r];
                (*sens)[p * n + cix] = acc;
            }
        }

    auto on = tps.offsets.node();
    auto out = detail::make_result<T>({1, 2, H, W}, {tps.offsets}, [=](TensorNode<T>& y) {
        if (!on->requires_grad) return;
        auto go = on->grad_buf();
        const std::int64_t hw = H * W;
        for (std::int64_t p = 0; p < hw; ++p)
            for (std::size_t cix = 0; cix < n; ++cix) {
                const T s = static_cast<T>((*sens)[static_cast<std::size_t>(p) * n + cix]);
                go[2 * cix] += y.grad[p] * s;
                go[2 * cix + 1] += y.grad[hw + p] * s;
            }
    });

    auto d = out.data();
    const auto off = tps.offsets.data();
    const std::int64_t hw = H * W;
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const std::int64_t p = i * W + j;
            const T x = W > 1 ? T(-1) + T(2) * static_cast<T>(j) / static_cast<T>(W - 1) : T(0);
            const T y = H > 1 ? T(-1) + T(2) * static_cast<T>(i) / static_cast<T>(H - 1) : T(0);
            T dxv = T(0), dyv = T(0);
            for (std::size_t cix = 0; cix < n; ++cix) {
                const T s = static_cast<T>((*sens)[static_cast<std::size_t>(p) * n + cix]);
                dxv += s * off[2 * cix];
                dyv += s * off[2 * cix + 1];
            }
            d[p] = x + dxv;
            d[hw + p] = y + dyv;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Grid composition and refinement

/// g_coarse(i,j) = bilinear(g_aff treated as a 2-channel image, g_tps(i,j)).
/// Reduces to g_aff when g_tps is the identity grid.
template <typename T>
TensorT<T> compose_coarse_grid(const TensorT<T>& g_aff, const TensorT<T>& g_tps) {
    if (g_aff.shape() != g_tps.shape())
        throw ShapeError("compose_coarse_grid: size mismatch " + shape_str(g_aff.shape()) +
                         " vs " + shape_str(g_tps.shape()));
    return grid_sample_bilinear(g_aff, g_tps);
}

struct RefineNetConfig {
    std::array<std::int64_t, 6> conv_widths{32, 32, 64, 64, 64, 64};
    std::int64_t deconv_mid = 32;
    bool use_r1 = true;
    bool use_r2 = true;
    // "paper": N(0,1) everywhere. "scaled": He init with a 0.01-std last layer
    // so the residual starts near zero.
    bool scaled_init = true;
};

/// Residual grid refinement: six 3x3 convs with ReLU (layers 1 and 3 stride 2),
/// sigmoid attention gates after convs 2 and 4, two stride-2 transposed convs
/// back to full resolution. Output = input + predicted residual.
template <typename T>
struct RefineNetT {
    RefineNetConfig cfg;
    std::array<Conv2dLayer<T>, 6> conv;
    Conv2dLayer<T> r1, r2;
    ConvTranspose2dLayer<T> up1, up2;

    static RefineNetT make(const RefineNetConfig& cfg) {
        RefineNetT n;
        n.cfg = cfg;
        const auto& w = cfg.conv_widths;
        std::int64_t in_ch = 2;
        for (int i = 0; i < 6; ++i) {
            const int stride = (i == 0 || i == 2) ? 2 : 1;
            n.conv[i] = Conv2dLayer<T>::make(in_ch, w[i], 3, stride, 1);
            in_ch = w[i];
        }
        n.r1 = Conv2dLayer<T>::make(w[1], w[1], 1, 1, 0);
        n.r2 = Conv2dLayer<T>::make(w[3], w[3], 1, 1, 0);
        n.up1 = ConvTranspose2dLayer<T>::make(w[5], cfg.deconv_mid, 4, 2, 1);
        n.up2 = ConvTranspose2dLayer<T>::make(cfg.deconv_mid, 2, 4, 2, 1);
        return n;
    }

    void init(std::mt19937& rng) {
        if (cfg.scaled_init) {
            for (auto& c : conv) c.init_he(rng);
            r1.init_he(rng);
            r2.init_he(rng);
            up1.init_he(rng);
            up2.init_normal(rng, T(0.01));
        } else {
            for (auto& c : conv) c.init_normal(rng, T(1));
            r1.init_normal(rng, T(1));
            r2.init_normal(rng, T(1));
            up1.init_normal(rng, T(1));
            up2.init_normal(rng, T(1));
        }
    }

    TensorT<T> forward(const TensorT<T>& g_coarse) const {
        if (g_coarse.dim(2) % 4 != 0 || g_coarse.dim(3) % 4 != 0)
            throw ShapeError("RefineNet: grid dims must be divisible by 4, got " +
                             shape_str(g_coarse.shape()));
        TensorT<T> h = relu(conv[0].forward(g_coarse));
        h = relu(conv[1].forward(h));
        if (cfg.use_r1) h = pixel_attention(r1, h);
        h = relu(conv[2].forward(h));
        h = relu(conv[3].forward(h));
        if (cfg.use_r2) h = pixel_attention(r2, h);
        h = relu(conv[4].forward(h));
        h = relu(conv[5].forward(h));
        h = relu(up1.forward(h));
        h = up2.forward(h);
        return add(g_coarse, h);
    }

    void collect(std::vector<ParamT<T>>& out, const std::string& prefix) {
        for (int i = 0; i < 6; ++i) conv[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
        if (cfg.use_r1) r1.collect(out, prefix + ".r1");
        if (cfg.use_r2) r2.collect(out, prefix + ".r2");
        up1.collect(out, prefix + ".up1");
        up2.collect(out, prefix + ".up2");
    }
};

using RefineNet = RefineNetT<float>;

// ---------------------------------------------------------------------------
// GANet

struct GaNetConfig {
    RefineNetConfig refine;
    bool use_refine = true;
    int tps_points = 5; // 5 = corners + center; n*n >= 9 lays out a regular grid
};

/// Full geometric correction subnet: learnable affine + TPS + refinement.
template <typename T>
struct GaNetT {
    GaNetConfig cfg;
    AffineParamsT<T> affine;
    TpsParamsT<T> tps;
    RefineNetT<T> refine;

    static GaNetT make(const GaNetConfig& cfg) {
        GaNetT g;
        g.cfg = cfg;
        g.affine = AffineParamsT<T>::identity();
        if (cfg.tps_points == 5) {
            g.tps = TpsParamsT<T>::make(default_tps_ctrl_points());
        } else {
            const int side = static_cast<int>(std::round(std::sqrt(double(cfg.tps_points))));
            if (side * side != cfg.tps_points || side < 2)
                throw ArgumentError("GaNet: tps_points must be 5 or a square >= 4");
            g.tps = TpsParamsT<T>::make(grid_tps_ctrl_points(side, side));
        }
        g.refine = RefineNetT<T>::make(cfg.refine);
        return g;
    }

    void init(std::mt19937& rng) { refine.init(rng); }

    /// The refined sampling grid for an H x W output.
    TensorT<T> build_grid(std::int64_t H, std::int64_t W) const {
        auto g_aff = affine_grid(affine.theta, H, W);
        auto g_tps = tps_grid(tps, H, W);
        auto g_coarse = compose_coarse_grid(g_aff, g_tps);
        return cfg.use_refine ? refine.forward(g_coarse) : g_coarse;
    }

    /// T^{-1}: warp an image into the canonical frontal view.
    TensorT<T> warp(const TensorT<T>& image) const {
        auto grid = build_grid(image.dim(2), image.dim(3));
        return warp_with_grid(image, grid);
    }

    /// Same warp with a precomputed grid (shared across a batch).
    static TensorT<T> warp_with_grid(const TensorT<T>& image, const TensorT<T>& grid) {
        if (image.dim(0) == 1) return grid_sample_bilinear(image, grid);
        // Broadcast the (1,2,H,W) grid over the batch, keeping it differentiable.
        return grid_sample_bilinear(image, tile_batch(grid, image.dim(0)));
    }

    void collect(std::vector<ParamT<T>>& out, const std::string& prefix = "ganet") {
        out.push_back({prefix + ".theta_aff", affine.theta});
        out.push_back({prefix + ".theta_tps", tps.offsets});
        if (cfg.use_refine) refine.collect(out, prefix + ".refine");
    }
};

using GaNet = GaNetT<float>;

/// Warp an image by a sampling grid (Eq-style wrapper around the sampler).
template <typename T>
TensorT<T> warp_image(const TensorT<T>& image, const TensorT<T>& grid) {
    return GaNetT<T>::warp_with_grid(image, grid);
}

} // namespace compenkit
