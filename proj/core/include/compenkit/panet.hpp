#pragma once

// PANet: photometric compensation in unshuffled space. Pixel-unshuffle both
// the warped captured image and the warped surface image, gate the captured
// branch with pixel attention, run a shared-weight siamese encoder, decode the
// feature difference with two skip connections, pixel-shuffle back and clamp.

#include <array>
#include <random>
#include <string>
#include <vector>

#include "compenkit/layers.hpp"
#include "compenkit/ops.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

struct PanetConfig {
    int k = 2;            // shuffle factor; input H, W must be divisible by k
    std::int64_t channels = 3;
    std::array<std::int64_t, 3> enc_widths{32, 64, 128};
    bool use_p1 = true;
    bool use_p2 = true;

    std::int64_t in_channels() const { return channels * k * k; }
};

template <typename T>
struct PanetPyramid {
    TensorT<T> l0, l1, l2; // full res / half / quarter (relative to unshuffled size)
};

template <typename T>
struct PaNetT {
    PanetConfig cfg;
    // Siamese encoder, shared between the captured and surface branches.
    Conv2dLayer<T> enc1, enc2, enc3;
    // Attention gates on the captured branch.
    Conv2dLayer<T> p1, p2;
    // Decoder trunk.
    Conv2dLayer<T> dec1, dec2, dec3, dec_out;
    ConvTranspose2dLayer<T> up1, up2;
    // Skip connections on the level-0 and level-1 feature differences.
    Conv2dLayer<T> yellow1, yellow2, yellow3; // 1x1 + two 3x3
    Conv2dLayer<T> green1, green2;            // 1x1 + one 3x3

    static PaNetT make(const PanetConfig& cfg) {
        PaNetT n;
        n.cfg = cfg;
        const std::int64_t c0 = cfg.in_channels();
        const auto& w = cfg.enc_widths;
        n.p1 = Conv2dLayer<T>::make(c0, c0, 1, 1, 0);
        n.enc1 = Conv2dLayer<T>::make(c0, w[0], 3, 1, 1);
        n.p2 = Conv2dLayer<T>::make(w[0], w[0], 1, 1, 0);
        n.enc2 = Conv2dLayer<T>::make(w[0], w[1], 3, 2, 1);
        n.enc3 = Conv2dLayer<T>::make(w[1], w[2], 3, 2, 1);
        n.dec1 = Conv2dLayer<T>::make(w[2], w[2], 3, 1, 1);
        n.up1 = ConvTranspose2dLayer<T>::make(w[2], w[1], 4, 2, 1);
        n.green1 = Conv2dLayer<T>::make(w[1], w[1], 1, 1, 0);
        n.green2 = Conv2dLayer<T>::make(w[1], w[1], 3, 1, 1);
        n.dec2 = Conv2dLayer<T>::make(w[1], w[1], 3, 1, 1);
        n.up2 = ConvTranspose2dLayer<T>::make(w[1], w[0], 4, 2, 1);
        n.yellow1 = Conv2dLayer<T>::make(w[0], w[0], 1, 1, 0);
        n.yellow2 = Conv2dLayer<T>::make(w[0], w[0], 3, 1, 1);
        n.yellow3 = Conv2dLayer<T>::make(w[0], w[0], 3, 1, 1);
        n.dec3 = Conv2dLayer<T>::make(w[0], w[0], 3, 1, 1);
        n.dec_out = Conv2dLayer<T>::make(w[0], c0, 3, 1, 1);
        return n;
    }

    void init(std::mt19937& rng) {
        for (Conv2dLayer<T>* c : {&p1, &enc1, &p2, &enc2, &enc3, &dec1, &green1, &green2, &dec2,
                                  &yellow1, &yellow2, &yellow3, &dec3, &dec_out})
            c->init_he(rng);
        up1.init_he(rng);
        up2.init_he(rng);
        // Attention gates start fully open (zero weights, strongly positive
        // bias): an untrained gate is a no-op instead of halving the signal,
        // and gating only develops where the data pushes it.
        for (Conv2dLayer<T>* g : {&p1, &p2}) {
            for (auto& v : g->weight.data()) v = T(0);
            for (auto& v : g->bias.data()) v = T(5);
        }
    }

    /// Shared-weight encoder. ReLU follows the first two convs only.
    PanetPyramid<T> encode(const TensorT<T>& m0) const {
        if (m0.dim(1) != cfg.in_channels())
            throw ShapeError("PaNet encode: expected " + std::to_string(cfg.in_channels()) +
                             " channels, got " + std::to_string(m0.dim(1)));
        PanetPyramid<T> p;
        p.l0 = relu(enc1.forward(m0));
        p.l1 = relu(enc2.forward(p.l0));
        p.l2 = enc3.forward(p.l1);
        return p;
    }

    /// Encoder for the captured branch: p2 attention sits after the first conv.
    PanetPyramid<T> encode_captured(const TensorT<T>& m0) const {
        if (m0.dim(1) != cfg.in_channels())
            throw ShapeError("PaNet encode: expected " + std::to_string(cfg.in_channels()) +
                             " channels, got " + std::to_string(m0.dim(1)));
        PanetPyramid<T> p;
        p.l0 = relu(enc1.forward(m0));
        if (cfg.use_p2) p.l0 = pixel_attention(p2, p.l0);
        p.l1 = relu(enc2.forward(p.l0));
        p.l2 = enc3.forward(p.l1);
        return p;
    }

    /// Decoder over the feature difference with two skip connections.
    TensorT<T> decode(const PanetPyramid<T>& feat_x, const PanetPyramid<T>& feat_s) const {
        if (feat_x.l2.shape() != feat_s.l2.shape())
            throw ShapeError("PaNet decode: pyramid mismatch");
        auto d2 = sub(feat_x.l2, feat_s.l2);
        auto d1 = sub(feat_x.l1, feat_s.l1);
        auto d0 = sub(feat_x.l0, feat_s.l0);

        auto h = relu(dec1.forward(d2));
        h = up1.forward(h);
        h = add(h, green2.forward(green1.forward(d1)));
        h = relu(dec2.forward(h));
        h = up2.forward(h);
        h = add(h, yellow3.forward(yellow2.forward(yellow1.forward(d0))));
        h = relu(dec3.forward(h));
        return dec_out.forward(h);
    }

    /// Full PANet: D_k -> attention/encoders -> decoder -> U_k -> clamp01.
    TensorT<T> forward(const TensorT<T>& x_warped, const TensorT<T>& s_warped) const {
        if (x_warped.shape() != s_warped.shape())
            throw ShapeError("PaNet forward: input shapes differ");
        if (x_warped.dim(2) % cfg.k != 0 || x_warped.dim(3) % cfg.k != 0)
            throw ShapeError("PaNet forward: H, W must be divisible by k=" + std::to_string(cfg.k));
        auto mx = pixel_unshuffle(x_warped, cfg.k);
        auto ms = pixel_unshuffle(s_warped, cfg.k);
        if (cfg.use_p1) mx = pixel_attention(p1, mx);
        auto fx = encode_captured(mx);
        auto fs = encode(ms);
        auto out = decode(fx, fs);
        return clamp01(pixel_shuffle(out, cfg.k));
    }

    void collect(std::vector<ParamT<T>>& out, const std::string& prefix = "panet") {
        if (cfg.use_p1) p1.collect(out, prefix + ".p1");
        enc1.collect(out, prefix + ".enc1");
        if (cfg.use_p2) p2.collect(out, prefix + ".p2");
        enc2.collect(out, prefix + ".enc2");
        enc3.collect(out, prefix + ".enc3");
        dec1.collect(out, prefix + ".dec1");
        up1.collect(out, prefix + ".up1");
        green1.collect(out, prefix + ".green1");
        green2.collect(out, prefix + ".green2");
        dec2.collect(out, prefix + ".dec2");
        up2.collect(out, prefix + ".up2");
        yellow1.collect(out, prefix + ".yellow1");
        yellow2.collect(out, prefix + ".yellow2");
        yellow3.collect(out, prefix + ".yellow3");
        dec3.collect(out, prefix + ".dec3");
        dec_out.collect(out, prefix + ".dec_out");
    }
};

using PaNet = PaNetT<float>;

} // namespace compenkit
