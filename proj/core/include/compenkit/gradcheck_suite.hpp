#pragma once

// Named finite-difference checks covering every differentiable op, reused by
// the CLI gradcheck command and the test suite. Cases are templated on the
// scalar type so the same problem can be instantiated at float and double
// from one seed (gradcheck_mixed relies on this pairing).

#include <string>
#include <vector>

#include "compenkit/gradcheck.hpp"
#include "compenkit/loss.hpp"
#include "compenkit/model.hpp"

namespace compenkit {

template <typename T>
struct GradcheckCase {
    std::string name;
    std::function<GradcheckProblem<T>(unsigned seed)> build;
    double eps = 1e-5; // FD step for the double-precision oracle
};

namespace detail {

// Sampled away from zero so kinked ops (relu, abs, clamp boundaries) are not
// probed inside the finite-difference step.
template <typename T>
TensorT<T> rand_away_from_kinks(Shape shape, std::mt19937& rng) {
    auto t = TensorT<T>::rand_uniform(std::move(shape), rng, T(0.15), T(0.85));
    std::bernoulli_distribution flip(0.5);
    for (auto& v : t.data())
        if (flip(rng)) v = -v;
    return t;
}

// Nonzero jitter on every weight and bias. Zero-initialized biases otherwise
// leave exactly-zero relu preactivations in dead regions, where the analytic
// subgradient and a symmetric finite difference legitimately disagree.
template <typename T>
void jitter_params(std::vector<ParamT<T>>& params, std::mt19937& rng, T scale) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& p : params)
        for (auto& v : p.tensor.data()) v += static_cast<T>(dist(rng)) * scale;
}

} // namespace detail

template <typename T>
std::vector<GradcheckCase<T>> gradcheck_cases() {
    using P = GradcheckProblem<T>;
    using V = std::vector<TensorT<T>>;
    std::vector<GradcheckCase<T>> cases;

    auto binary = [](TensorT<T> (*op)(const TensorT<T>&, const TensorT<T>&),
                     bool positive_b = false) {
        return [=](unsigned seed) {
            std::mt19937 rng(seed);
            auto a = TensorT<T>::randn({2, 3, 5, 4}, rng);
            auto b = positive_b ? TensorT<T>::rand_uniform({2, 3, 5, 4}, rng, T(0.5), T(1.5))
                                : TensorT<T>::randn({2, 3, 5, 4}, rng);
            return P{[=](const V& in) { return probe_loss(op(in[0], in[1]), seed); }, {a, b}};
        };
    };
    cases.push_back({"add", binary(&add<T>)});
    cases.push_back({"sub", binary(&sub<T>)});
    cases.push_back({"mul", binary(&mul<T>)});
    cases.push_back({"div", binary(&div<T>, true)});

    auto unary = [](TensorT<T> (*op)(const TensorT<T>&)) {
        return [=](unsigned seed) {
            std::mt19937 rng(seed);
            auto a = detail::rand_away_from_kinks<T>({2, 3, 6, 5}, rng);
            return P{[=](const V& in) { return probe_loss(op(in[0]), seed + 1); }, {a}};
        };
    };
    cases.push_back({"relu", unary(&relu<T>)});
    cases.push_back({"sigmoid", unary(&sigmoid<T>)});
    cases.push_back({"abs", unary(&abs_val<T>)});
    cases.push_back({"clamp01", unary(&clamp01<T>)});

    cases.push_back({"sum_mean_reshape", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto a = TensorT<T>::randn({2, 3, 4, 4}, rng);
                         return P{[=](const V& in) {
                                      auto r = reshape(in[0], {2, 3, 16});
                                      return add(mean(r), sum(mul_scalar(in[0], T(0.25))));
                                  },
                                  {a}};
                     }});

    cases.push_back({"tile_batch", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto a = TensorT<T>::randn({1, 2, 3, 4}, rng);
                         return P{[=](const V& in) { return probe_loss(tile_batch(in[0], 3), seed); },
                                  {a}};
                     }});

    cases.push_back({"conv2d", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto x = TensorT<T>::randn({2, 3, 7, 6}, rng);
                         auto w = TensorT<T>::randn({4, 3, 3, 3}, rng, T(0.4));
                         auto b = TensorT<T>::randn({4}, rng, T(0.2));
                         return P{[=](const V& in) {
                                      return probe_loss(conv2d(in[0], in[1], in[2], 2, 1), seed);
                                  },
                                  {x, w, b}};
                     }});

    cases.push_back({"conv_transpose2d", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto x = TensorT<T>::randn({2, 4, 4, 3}, rng);
                         auto w = TensorT<T>::randn({4, 3, 4, 4}, rng, T(0.3));
                         auto b = TensorT<T>::randn({3}, rng, T(0.2));
                         return P{[=](const V& in) {
                                      return probe_loss(
                                          conv_transpose2d(in[0], in[1], in[2], 2, 1), seed);
                                  },
                                  {x, w, b}};
                     }});

    cases.push_back({"pixel_unshuffle", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto x = TensorT<T>::randn({2, 3, 6, 4}, rng);
                         return P{[=](const V& in) {
                                      return probe_loss(pixel_unshuffle(in[0], 2), seed);
                                  },
                                  {x}};
                     }});

    cases.push_back({"pixel_shuffle", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto x = TensorT<T>::randn({2, 12, 3, 2}, rng);
                         return P{[=](const V& in) {
                                      return probe_loss(pixel_shuffle(in[0], 2), seed);
                                  },
                                  {x}};
                     }});

    cases.push_back({"grid_sample", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto img = TensorT<T>::randn({2, 3, 6, 6}, rng);
                         // Interior coords, clear of the border-clamp kink and
                         // of integer-crossing floor() kinks.
                         auto grid = TensorT<T>::rand_uniform({2, 2, 4, 4}, rng, T(-0.7), T(0.7));
                         for (auto& g : grid.data()) {
                             T u = (g + T(1)) * T(0.5) * T(5);
                             T frac = u - std::floor(u);
                             if (frac < T(0.15)) g += T(0.06);
                             else if (frac > T(0.85)) g -= T(0.06);
                         }
                         return P{[=](const V& in) {
                                      return probe_loss(grid_sample_bilinear(in[0], in[1]), seed);
                                  },
                                  {img, grid}};
                     }});

    cases.push_back({"pixel_attention", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto m = TensorT<T>::randn({2, 4, 5, 5}, rng);
                         auto w = TensorT<T>::randn({4, 4, 1, 1}, rng, T(0.5));
                         auto b = TensorT<T>::randn({4}, rng, T(0.2));
                         return P{[=](const V& in) {
                                      Conv2dLayer<T> gate;
                                      gate.weight = in[1];
                                      gate.bias = in[2];
                                      gate.stride = 1;
                                      gate.padding = 0;
                                      return probe_loss(pixel_attention(gate, in[0]), seed);
                                  },
                                  {m, w, b}};
                     }});

    cases.push_back({"affine_grid", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto theta = TensorT<T>::from_data(
                             {2, 3}, {T(1), T(0), T(0), T(0), T(1), T(0)});
                         auto noise = TensorT<T>::randn({6}, rng, T(0.05));
                         for (int i = 0; i < 6; ++i) theta.data()[i] += noise.data()[i];
                         return P{[=](const V& in) {
                                      return probe_loss(affine_grid(in[0], 6, 5), seed);
                                  },
                                  {theta}};
                     }});

    cases.push_back({"tps_grid", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto tps = TpsParamsT<T>::make(default_tps_ctrl_points());
                         tps.offsets = TensorT<T>::randn({5, 2}, rng, T(0.05));
                         return P{[=](const V& in) {
                                      auto t = tps;
                                      t.offsets = in[0];
                                      return probe_loss(tps_grid(t, 6, 6), seed);
                                  },
                                  {tps.offsets}};
                     }});

    cases.push_back({"ssim_loss", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         auto a = TensorT<T>::rand_uniform({1, 2, 12, 12}, rng, T(0.2), T(0.8));
                         auto b = TensorT<T>::rand_uniform({1, 2, 12, 12}, rng, T(0.2), T(0.8));
                         return P{[=](const V& in) { return ssim_differentiable(in[0], in[1]); },
                                  {a, b}};
                     },
                     1e-4});

    cases.push_back({"ganet_full", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         GaNetConfig gc;
                         gc.refine.conv_widths = {4, 4, 6, 6, 6, 6};
                         gc.refine.deconv_mid = 4;
                         auto net = GaNetT<T>::make(gc);
                         net.init(rng);
                         // Shrink and jitter the warp so no sample lands exactly
                         // on a pixel center or the image border, where bilinear
                         // sampling has one-sided derivatives.
                         {
                             auto th = net.affine.theta.data();
                             th[0] = th[4] = T(0.9);
                             auto noise = TensorT<T>::randn({6}, rng, T(0.02));
                             for (int i = 0; i < 6; ++i) th[i] += noise.data()[i];
                             net.tps.offsets = TensorT<T>::randn({5, 2}, rng, T(0.02));
                             net.tps.offsets.set_requires_grad(true);
                         }
                         auto img = TensorT<T>::rand_uniform({1, 2, 8, 8}, rng, T(0.1), T(0.9));
                         std::vector<ParamT<T>> params;
                         net.collect(params);
                         {
                             std::vector<ParamT<T>> refine_only(params.begin() + 2, params.end());
                             detail::jitter_params(refine_only, rng, T(0.1));
                         }
                         V inputs;
                         for (auto& p : params) inputs.push_back(p.tensor);
                         auto f = [=](const V& in) {
                             auto n = net;
                             n.affine.theta = in[0];
                             n.tps.offsets = in[1];
                             std::size_t i = 2;
                             for (auto& c : n.refine.conv) {
                                 c.weight = in[i++];
                                 c.bias = in[i++];
                             }
                             n.refine.r1.weight = in[i++];
                             n.refine.r1.bias = in[i++];
                             n.refine.r2.weight = in[i++];
                             n.refine.r2.bias = in[i++];
                             n.refine.up1.weight = in[i++];
                             n.refine.up1.bias = in[i++];
                             n.refine.up2.weight = in[i++];
                             n.refine.up2.bias = in[i++];
                             return probe_loss(n.warp(img), seed);
                         };
                         return P{f, inputs};
                     },
                     1e-6});

    cases.push_back({"panet_full", [](unsigned seed) {
                         std::mt19937 rng(seed);
                         PanetConfig pc;
                         pc.enc_widths = {4, 6, 8};
                         auto net = PaNetT<T>::make(pc);
                         net.init(rng);
                         auto x = TensorT<T>::rand_uniform({1, 3, 8, 8}, rng, T(0.2), T(0.8));
                         auto s = TensorT<T>::rand_uniform({1, 3, 8, 8}, rng, T(0.2), T(0.8));
                         std::vector<ParamT<T>> params;
                         net.collect(params);
                         detail::jitter_params(params, rng, T(0.1));
                         V inputs;
                         for (auto& p : params) inputs.push_back(p.tensor);
                         auto f = [=](const V& in) {
                             auto n = net;
                             std::size_t i = 0;
                             auto bind = [&](Conv2dLayer<T>& c) {
                                 c.weight = in[i++];
                                 c.bias = in[i++];
                             };
                             auto bind_t = [&](ConvTranspose2dLayer<T>& c) {
                                 c.weight = in[i++];
                                 c.bias = in[i++];
                             };
                             bind(n.p1);
                             bind(n.enc1);
                             bind(n.p2);
                             bind(n.enc2);
                             bind(n.enc3);
                             bind(n.dec1);
                             bind_t(n.up1);
                             bind(n.green1);
                             bind(n.green2);
                             bind(n.dec2);
                             bind_t(n.up2);
                             bind(n.yellow1);
                             bind(n.yellow2);
                             bind(n.yellow3);
                             bind(n.dec3);
                             bind(n.dec_out);
                             return probe_loss(n.forward(x, s), seed);
                         };
                         return P{f, inputs};
                     },
                     1e-6});

    return cases;
}

struct GradcheckReport {
    struct Row {
        std::string name;
        double max_rel = 0;
    };
    std::vector<Row> rows;
    double worst = 0;
};

/// Double mode: classic same-precision FD check.
/// Float mode: float analytic gradients against the double FD oracle.
template <typename T>
GradcheckReport run_gradcheck_suite(int n_seeds) {
    GradcheckReport rep;
    if constexpr (std::is_same_v<T, double>) {
        for (auto& c : gradcheck_cases<double>()) {
            GradcheckReport::Row row;
            row.name = c.name;
            for (int s = 0; s < n_seeds; ++s) {
                auto p = c.build(static_cast<unsigned>(s));
                GradcheckOptions<double> opt;
                opt.eps = c.eps;
                opt.seed = static_cast<unsigned>(s);
                row.max_rel = std::max(row.max_rel, gradcheck<double>(p.f, p.inputs, opt));
            }
            rep.worst = std::max(rep.worst, row.max_rel);
            rep.rows.push_back(std::move(row));
        }
    } else {
        auto lo_cases = gradcheck_cases<float>();
        auto hi_cases = gradcheck_cases<double>();
        for (std::size_t i = 0; i < lo_cases.size(); ++i) {
            GradcheckReport::Row row;
            row.name = lo_cases[i].name;
            for (int s = 0; s < n_seeds; ++s) {
                auto lo = lo_cases[i].build(static_cast<unsigned>(s));
                auto hi = hi_cases[i].build(static_cast<unsigned>(s));
                row.max_rel = std::max(
                    row.max_rel,
                    gradcheck_mixed(lo, hi, hi_cases[i].eps, 24, static_cast<unsigned>(s)));
            }
            rep.worst = std::max(rep.worst, row.max_rel);
            rep.rows.push_back(std::move(row));
        }
    }
    return rep;
}

} // namespace compenkit
