#pragma once

// CompensationModel: GANet + PANet bundled behind one forward function.
// Training and inference share the same path: the captured (or desired)
// image and the captured surface image are warped to the frontal view by
// GANet, then photometrically compensated by PANet.

#include <random>
#include <string>
#include <vector>

#include "compenkit/panet.hpp"
#include "compenkit/warp.hpp"

namespace compenkit {

struct ModelConfig {
    int k = 2;
    int tps_points = 5;
    bool use_refine = true;
    bool use_r1 = true;
    bool use_r2 = true;
    bool use_p1 = true;
    bool use_p2 = true;
    bool scaled_init = true; // false = plain N(0,1) refinement init

    GaNetConfig ganet_config() const {
        GaNetConfig g;
        g.use_refine = use_refine;
        g.tps_points = tps_points;
        g.refine.use_r1 = use_r1;
        g.refine.use_r2 = use_r2;
        g.refine.scaled_init = scaled_init;
        return g;
    }
    PanetConfig panet_config() const {
        PanetConfig p;
        p.k = k;
        p.use_p1 = use_p1;
        p.use_p2 = use_p2;
        return p;
    }
};

struct CompensationModel {
    ModelConfig cfg;
    GaNet ganet;
    PaNet panet;

    static CompensationModel make(const ModelConfig& cfg) {
        CompensationModel m;
        m.cfg = cfg;
        m.ganet = GaNet::make(cfg.ganet_config());
        m.panet = PaNet::make(cfg.panet_config());
        return m;
    }

    void init(unsigned seed) {
        std::mt19937 rng(seed);
        ganet.init(rng);
        panet.init(rng);
    }

    /// pi^dagger: maps a camera-frame image (and the captured surface) to a
    /// projector input estimate. Output clamped to [0,1], same size as input.
    Tensor forward(const Tensor& x, const Tensor& surface) const {
        if (x.dim(2) != surface.dim(2) || x.dim(3) != surface.dim(3))
            throw ShapeError("CompensationModel: input/surface size mismatch");
        auto grid = ganet.build_grid(x.dim(2), x.dim(3));
        auto xw = GaNet::warp_with_grid(x, grid);
        auto s1 = surface.dim(0) == x.dim(0) ? surface : tile_batch(surface, x.dim(0));
        auto sw = GaNet::warp_with_grid(s1, grid);
        return panet.forward(xw, sw);
    }

    std::vector<Param> params() {
        std::vector<Param> out;
        ganet.collect(out, "ganet");
        panet.collect(out, "panet");
        return out;
    }

    void zero_grads() {
        for (auto& p : params()) p.tensor.zero_grad();
    }
};

/// Total scalar parameter count.
inline std::int64_t count_params(CompensationModel& model) {
    std::int64_t n = 0;
    for (const auto& p : model.params()) n += p.tensor.numel();
    return n;
}

/// Inference entry point (Eq-7 path): desired image in, compensation image out.
inline Tensor compensate(const CompensationModel& model, const Tensor& desired,
                         const Tensor& surface) {
    NoGradGuard ng;
    return model.forward(desired, surface);
}

} // namespace compenkit
