#pragma once

// Synthetic projector-camera forward model: photometric response (gamma,
// global color mixing, per-pixel surface reflectance, ambient light) followed
// by a geometric warp (homography plus a smooth sinusoidal displacement) and
// a camera response with optional Gaussian noise. Generates ground-truth
// datasets without hardware.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compenkit/tensor.hpp"

namespace compenkit {

/// Smooth displacement field added on top of the homography, in normalized
/// coordinates: two sinusoids per axis.
struct DisplacementField {
    double amp_x = 0, amp_y = 0;            // normalized amplitude per axis
    std::array<double, 4> freq{2, 3, 2, 3}; // x1, x2, y1, y2 (in half-cycles)
    std::array<double, 4> phase{0, 0, 0, 0};

    void eval(double x, double y, double& dx, double& dy) const;
};

/// Full synthetic projector-camera configuration. Identical seeds produce
/// bit-identical setups.
struct SceneSetup {
    int seed = 0;
    std::int64_t height = 0, width = 0;
    Tensor surface_texture;            // (1,3,H,W) in [0,1]
    std::array<double, 9> homography{1, 0, 0, 0, 1, 0, 0, 0, 1}; // camera -> projector coords
    DisplacementField displacement;
    std::array<double, 9> color_mix{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, nonnegative
    double reflectance_blend = 0.0;    // 0 = unit reflectance, 1 = pure texture
    std::array<double, 3> projector_gamma{1, 1, 1};
    std::array<double, 3> camera_gamma{1, 1, 1};
    std::array<double, 3> ambient{0, 0, 0};
    double noise_sigma = 0.0;
    double probe_level = 0.5;          // uniform gray input used for the surface capture

    /// Camera-frame normalized coords -> projector-frame normalized coords.
    void forward_geom(double cx, double cy, double& px, double& py) const;
    /// Numerical inverse of forward_geom (fixed-point; exact for pure homography).
    void inverse_geom(double px, double py, double& cx, double& cy) const;
};

/// Deterministic pseudo-random setup. Corner perturbation <= 10% of the
/// normalized span, displacement amplitude <= 3%, diagonally dominant
/// nonnegative color mixing with row sums <= 1, projector gammas in
/// [1.8, 2.4], near-linear camera gammas in [1.0, 1.4], ambient <= 0.03.
SceneSetup gen_setup(int seed, std::int64_t height, std::int64_t width);

/// Eq-1 style capture: x -> F(x) -> warp -> camera response (+ noise).
/// noise_index selects a deterministic per-image noise stream.
Tensor render_capture(const Tensor& x, const SceneSetup& scene, std::uint64_t noise_index = 0);

/// Photometric response F only (pre-warp), exposed for property tests.
Tensor photometric_response(const Tensor& x, const SceneSetup& scene);

/// Warps a camera-frame capture back to the projector's frontal frame using
/// the true (simulator-known) geometry.
Tensor warp_to_frontal(const Tensor& captured, const SceneSetup& scene);

/// Inverse of warp_to_frontal: renders a frontal-frame image as the camera
/// would see it. Used to pose frontal-frame targets in the camera frame.
Tensor warp_from_frontal(const Tensor& frontal, const SceneSetup& scene);

/// Procedural colorful sampling image (gradients + patches), deterministic.
Tensor gen_sampling_image(int seed, int index, std::int64_t height, std::int64_t width);

struct DatasetManifest {
    int seed = 0;
    std::int64_t height = 0, width = 0;
    int k = 2;
    int n_train = 0, n_test = 0;
    double noise_sigma = 0.0;
    double probe_level = 0.5;
    std::string surface_file;
    std::vector<std::string> train_prj, train_cam, test_prj, test_cam;
};

/// Writes surface.png, train/ and test/ pairs and manifest.json under out_dir.
/// `images` supplies the projector inputs; train and test draw disjoint slices.
DatasetManifest gen_dataset(const SceneSetup& scene, const std::vector<Tensor>& images,
                            int n_train, int n_test, const std::filesystem::path& out_dir,
                            int k = 2);

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& manifest_path);

/// Rebuilds the SceneSetup a dataset was rendered with.
SceneSetup scene_from_manifest(const DatasetManifest& m);

} // namespace compenkit
