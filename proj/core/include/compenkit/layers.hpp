#pragma once

#include <random>
#include <string>
#include <vector>

#include "compenkit/ops.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

template <typename T>
struct Conv2dLayer {
    TensorT<T> weight; // (OC, IC, KH, KW)
    TensorT<T> bias;   // (OC)
    int stride = 1;
    int padding = 0;

    static Conv2dLayer make(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride,
                            int padding) {
        Conv2dLayer l;
        l.weight = TensorT<T>::zeros({out_ch, in_ch, kernel, kernel});
        l.bias = TensorT<T>::zeros({out_ch});
        l.stride = stride;
        l.padding = padding;
        l.weight.set_requires_grad(true);
        l.bias.set_requires_grad(true);
        return l;
    }

    // Kaiming-normal fan-in init, zero bias.
    void init_he(std::mt19937& rng) {
        const auto& s = weight.shape();
        const double fan_in = static_cast<double>(s[1] * s[2] * s[3]);
        const T std_dev = static_cast<T>(std::sqrt(2.0 / fan_in));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : weight.data()) v = static_cast<T>(dist(rng)) * std_dev;
        for (auto& v : bias.data()) v = T(0);
    }

    void init_normal(std::mt19937& rng, T std_dev) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : weight.data()) v = static_cast<T>(dist(rng)) * std_dev;
        for (auto& v : bias.data()) v = T(0);
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        return conv2d(x, weight, bias, stride, padding);
    }

    void collect(std::vector<ParamT<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

template <typename T>
struct ConvTranspose2dLayer {
    TensorT<T> weight; // (IC, OC, KH, KW)
    TensorT<T> bias;   // (OC)
    int stride = 2;
    int padding = 1;

    static ConvTranspose2dLayer make(std::int64_t in_ch, std::int64_t out_ch, int kernel,
                                     int stride, int padding) {
        ConvTranspose2dLayer l;
        l.weight = TensorT<T>::zeros({in_ch, out_ch, kernel, kernel});
        l.bias = TensorT<T>::zeros({out_ch});
        l.stride = stride;
        l.padding = padding;
        l.weight.set_requires_grad(true);
        l.bias.set_requires_grad(true);
        return l;
    }

    void init_he(std::mt19937& rng) {
        const auto& s = weight.shape();
        const double fan_in = static_cast<double>(s[0] * s[2] * s[3]);
        const T std_dev = static_cast<T>(std::sqrt(2.0 / fan_in));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : weight.data()) v = static_cast<T>(dist(rng)) * std_dev;
        for (auto& v : bias.data()) v = T(0);
    }

    void init_normal(std::mt19937& rng, T std_dev) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : weight.data()) v = static_cast<T>(dist(rng)) * std_dev;
        for (auto& v : bias.data()) v = T(0);
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        return conv_transpose2d(x, weight, bias, stride, padding);
    }

    void collect(std::vector<ParamT<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

/// Per-element sigmoid gate from a 1x1 conv: M' = sigmoid(C(M)) * M.
template <typename T>
TensorT<T> pixel_attention(const Conv2dLayer<T>& gate_conv, const TensorT<T>& m) {
    if (gate_conv.weight.dim(1) != m.dim(1))
        throw ShapeError("pixel_attention: gate channels " + std::to_string(gate_conv.weight.dim(1)) +
                         " != input channels " + std::to_string(m.dim(1)));
    return mul(sigmoid(gate_conv.forward(m)), m);
}

} // namespace compenkit
