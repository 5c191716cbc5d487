#include <cmath>
#include <filesystem>
#include <random>

#include "compenkit/dataset.hpp"
#include "compenkit/sim.hpp"
#include "doctest.h"

using namespace compenkit;
namespace fs = std::filesystem;

namespace {

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

// Pass-through scene: identity geometry and photometry, no noise.
SceneSetup neutral_scene(std::int64_t h, std::int64_t w) {
    SceneSetup s;
    s.height = h;
    s.width = w;
    s.surface_texture = Tensor::filled({1, 3, h, w}, 1.0f);
    return s;
}

} // namespace

TEST_SUITE_BEGIN("sim");

TEST_CASE("gen_setup is deterministic and seed-sensitive") {
    auto a = gen_setup(3, 32, 32);
    auto b = gen_setup(3, 32, 32);
    auto c = gen_setup(4, 32, 32);
    CHECK(a.homography == b.homography);
    CHECK(a.color_mix == b.color_mix);
    CHECK(bit_equal(a.surface_texture, b.surface_texture));
    CHECK(a.homography != c.homography);
}

TEST_CASE("gen_setup stays inside its documented ranges") {
    for (int seed : {0, 1, 7, 42}) {
        auto s = gen_setup(seed, 32, 32);
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(s.projector_gamma[ch] >= 1.8);
            CHECK(s.projector_gamma[ch] <= 2.4);
            CHECK(s.camera_gamma[ch] >= 1.0);
            CHECK(s.camera_gamma[ch] <= 1.4);
            CHECK(s.ambient[ch] >= 0.0);
            CHECK(s.ambient[ch] <= 0.03);
        }
        for (double v : s.color_mix) CHECK(v >= 0.0);
        for (int r = 0; r < 3; ++r) {
            const double row =
                s.color_mix[r * 3] + s.color_mix[r * 3 + 1] + s.color_mix[r * 3 + 2];
            CHECK(row <= 1.0);
            CHECK(s.color_mix[r * 3 + r] >
                  row - s.color_mix[r * 3 + r]);
        }
        for (float v : s.surface_texture.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("neutral scene is a pass-through") {
    auto s = neutral_scene(16, 16);
    std::mt19937 rng(31);
    auto x = Tensor::rand_uniform({1, 3, 16, 16}, rng);
    auto cap = render_capture(x, s);
    for (std::int64_t i = 0; i < x.numel(); ++i)
        CHECK(std::abs(cap.data()[i] - x.data()[i]) < 1e-5f);
    auto frontal = warp_to_frontal(cap, s);
    for (std::int64_t i = 0; i < x.numel(); ++i)
        CHECK(std::abs(frontal.data()[i] - x.data()[i]) < 1e-4f);
}

TEST_CASE("render_capture noise streams are deterministic per index") {
    auto s = neutral_scene(16, 16);
    s.noise_sigma = 0.01;
    auto x = Tensor::filled({1, 3, 16, 16}, 0.5f);
    auto a = render_capture(x, s, 5);
    auto b = render_capture(x, s, 5);
    auto c = render_capture(x, s, 6);
    CHECK(bit_equal(a, b));
    CHECK(!bit_equal(a, c));
}

TEST_CASE("photometric response is monotone in the input level") {
    auto s = gen_setup(7, 32, 32);
    double prev = -1.0;
    for (double level : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        auto y = photometric_response(Tensor::filled({1, 3, 32, 32}, static_cast<float>(level)), s);
        double mean = 0;
        for (float v : y.data()) mean += v;
        mean /= static_cast<double>(y.numel());
        CHECK(mean > prev);
        prev = mean;
    }
}

TEST_CASE("geometry inverse undoes the forward map") {
    auto s = gen_setup(11, 32, 32);
    for (double cy : {-0.8, -0.2, 0.3, 0.9})
        for (double cx : {-0.7, 0.0, 0.6}) {
            double px, py, rx, ry;
            s.forward_geom(cx, cy, px, py);
            s.inverse_geom(px, py, rx, ry);
            CHECK(std::abs(rx - cx) < 1e-6);
            CHECK(std::abs(ry - cy) < 1e-6);
        }
}

TEST_CASE("sampling images are deterministic, colorful and in range") {
    auto a = gen_sampling_image(7, 3, 32, 32);
    auto b = gen_sampling_image(7, 3, 32, 32);
    auto c = gen_sampling_image(7, 4, 32, 32);
    CHECK(bit_equal(a, b));
    CHECK(!bit_equal(a, c));
    float lo = 1.0f, hi = 0.0f;
    for (float v : a.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0f);
    CHECK(hi <= 1.0f);
    CHECK(hi - lo > 0.2f); // not a flat image
}

TEST_CASE("dataset roundtrip through PNG files") {
    auto scene = gen_setup(5, 32, 32);
    scene.noise_sigma = 0.0;
    std::vector<Tensor> images;
    for (int i = 0; i < 6; ++i) images.push_back(gen_sampling_image(5, i, 32, 32));
    const fs::path dir = fs::temp_directory_path() / "compenkit_sim_test_ds";
    fs::remove_all(dir);
    auto manifest = gen_dataset(scene, images, 4, 2, dir, 2);
    CHECK(manifest.n_train == 4);
    CHECK(manifest.n_test == 2);

    auto ds = Dataset::load(dir);
    CHECK(ds.train_prj.size() == 4);
    CHECK(ds.train_cam.size() == 4);
    CHECK(ds.test_prj.size() == 2);
    CHECK(ds.surface.shape() == Shape{1, 3, 32, 32});
    // PNG quantization only: projector inputs survive within half a step.
    for (std::int64_t i = 0; i < images[0].numel(); ++i)
        CHECK(std::abs(ds.train_prj[0].data()[i] - images[0].data()[i]) <= 0.5f / 255.0f + 1e-6f);
    // Scene reconstruction from the manifest reproduces the captures.
    auto scene2 = scene_from_manifest(manifest);
    CHECK(scene2.homography == scene.homography);
    fs::remove_all(dir);
}

TEST_SUITE_END();
