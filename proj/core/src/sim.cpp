#include "compenkit/sim.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "compenkit/errors.hpp"
#include "compenkit/image.hpp"
#include "compenkit/linalg.hpp"

namespace compenkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

double bilinear_at(std::span<const float> plane, std::int64_t H, std::int64_t W, double u,
                   double v) {
    u = std::clamp(u, 0.0, static_cast<double>(W - 1));
    v = std::clamp(v, 0.0, static_cast<double>(H - 1));
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(u));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(v));
    const std::int64_t x1 = std::min(x0 + 1, W - 1);
    const std::int64_t y1 = std::min(y0 + 1, H - 1);
    const double fx = u - x0, fy = v - y0;
    const double top = plane[y0 * W + x0] * (1 - fx) + plane[y0 * W + x1] * fx;
    const double bot = plane[y1 * W + x0] * (1 - fx) + plane[y1 * W + x1] * fx;
    return top * (1 - fy) + bot * fy;
}

// Homography from 4 point correspondences (DLT on the 8x8 system).
std::array<double, 9> fit_homography(const std::array<std::array<double, 2>, 4>& src,
                                     const std::array<std::array<double, 2>, 4>& dst) {
    std::vector<double> A(8 * 8, 0.0), b(8, 0.0);
    for (int i = 0; i < 4; ++i) {
        const double x = src[i][0], y = src[i][1];
        const double u = dst[i][0], v = dst[i][1];
        double* r0 = A.data() + (2 * i) * 8;
        double* r1 = A.data() + (2 * i + 1) * 8;
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y;
        b[2 * i] = u;
        b[2 * i + 1] = v;
    }
    auto h = solve_dense(A, b, 8);
    return {h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0};
}

void apply_homography(const std::array<double, 9>& h, double x, double y, double& u, double& v) {
    const double w = h[6] * x + h[7] * y + h[8];
    u = (h[0] * x + h[1] * y + h[2]) / w;
    v = (h[3] * x + h[4] * y + h[5]) / w;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Tensor upsampled_noise(std::mt19937& rng, std::int64_t H, std::int64_t W, int cells) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<float> coarse(static_cast<std::size_t>(3 * cells * cells));
    for (auto& v : coarse) v = static_cast<float>(uni(rng));
    auto out = Tensor::zeros({1, 3, H, W});
    auto d = out.data();
    const std::int64_t hw = H * W;
    for (int c = 0; c < 3; ++c) {
        std::span<const float> plane(coarse.data() + c * cells * cells,
                                     static_cast<std::size_t>(cells) * cells);
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                const double u = (cells - 1) * static_cast<double>(j) / std::max<std::int64_t>(W - 1, 1);
                const double v = (cells - 1) * static_cast<double>(i) / std::max<std::int64_t>(H - 1, 1);
                d[c * hw + i * W + j] = static_cast<float>(bilinear_at(plane, cells, cells, u, v));
            }
    }
    return out;
}

} // namespace

void DisplacementField::eval(double x, double y, double& dx, double& dy) const {
    dx = amp_x * (std::sin(freq[0] * kPi * y + phase[0]) + std::sin(freq[1] * kPi * x + phase[1])) * 0.5;
    dy = amp_y * (std::sin(freq[2] * kPi * x + phase[2]) + std::sin(freq[3] * kPi * y + phase[3])) * 0.5;
}

void SceneSetup::forward_geom(double cx, double cy, double& px, double& py) const {
    apply_homography(homography, cx, cy, px, py);
    double dx, dy;
    displacement.eval(cx, cy, dx, dy);
    px += dx;
    py += dy;
}

void SceneSetup::inverse_geom(double px, double py, double& cx, double& cy) const {
    const auto hinv_arr = invert3x3(homography);
    // g(c) = H(c) + d(c); solve c = H^{-1}(p - d(c)) by fixed point.
    apply_homography(hinv_arr, px, py, cx, cy);
    for (int it = 0; it < 40; ++it) {
        double dx, dy;
        displacement.eval(cx, cy, dx, dy);
        const double prev_x = cx, prev_y = cy;
        apply_homography(hinv_arr, px - dx, py - dy, cx, cy);
        if (std::abs(cx - prev_x) + std::abs(cy - prev_y) < 1e-12) break;
    }
}

SceneSetup gen_setup(int seed, std::int64_t height, std::int64_t width) {
    if (height < 32 || width < 32)
        throw ArgumentError("gen_setup: size must be at least 32x32");
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix(static_cast<std::uint64_t>(seed)) >> 16));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    SceneSetup s;
    s.seed = seed;
    s.height = height;
    s.width = width;

    // Surface texture: blended noise octaves plus a few color patches,
    // compressed away from pure black so reflectance never kills the signal.
    auto tex = Tensor::zeros({1, 3, height, width});
    {
        auto o1 = upsampled_noise(rng, height, width, 4);
        auto o2 = upsampled_noise(rng, height, width, 9);
        auto o3 = upsampled_noise(rng, height, width, 17);
        auto d = tex.data();
        for (std::int64_t i = 0; i < tex.numel(); ++i)
            d[i] = 0.55f * o1.data()[i] + 0.3f * o2.data()[i] + 0.15f * o3.data()[i];
        const int patches = 3 + static_cast<int>(uni(rng) * 3);
        const std::int64_t hw = height * width;
        for (int p = 0; p < patches; ++p) {
            const std::int64_t x0 = static_cast<std::int64_t>(uni(rng) * (width - 8));
            const std::int64_t y0 = static_cast<std::int64_t>(uni(rng) * (height - 8));
            const std::int64_t pw = 8 + static_cast<std::int64_t>(uni(rng) * width / 3);
            const std::int64_t ph = 8 + static_cast<std::int64_t>(uni(rng) * height / 3);
            const float cr = static_cast<float>(uni(rng));
            const float cg = static_cast<float>(uni(rng));
            const float cb = static_cast<float>(uni(rng));
            for (std::int64_t i = y0; i < std::min(height, y0 + ph); ++i)
                for (std::int64_t j = x0; j < std::min(width, x0 + pw); ++j) {
                    d[0 * hw + i * width + j] = 0.5f * d[0 * hw + i * width + j] + 0.5f * cr;
                    d[1 * hw + i * width + j] = 0.5f * d[1 * hw + i * width + j] + 0.5f * cg;
                    d[2 * hw + i * width + j] = 0.5f * d[2 * hw + i * width + j] + 0.5f * cb;
                }
        }
        for (std::int64_t i = 0; i < tex.numel(); ++i) d[i] = 0.62f + 0.38f * d[i];
    }
    s.surface_texture = tex;

    // Homography: camera corners to projector corners perturbed by <= 10%
    // of the normalized span (0.2 units).
    std::array<std::array<double, 2>, 4> cam{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    std::array<std::array<double, 2>, 4> prj = cam;
    for (auto& p : prj) {
        p[0] += (uni(rng) * 2 - 1) * 0.2;
        p[1] += (uni(rng) * 2 - 1) * 0.2;
    }
    s.homography = fit_homography(cam, prj);

    // Sinusoidal displacement <= 3% of the span (0.06 units).
    s.displacement.amp_x = uni(rng) * 0.06;
    s.displacement.amp_y = uni(rng) * 0.06;
    for (int i = 0; i < 4; ++i) {
        s.displacement.freq[i] = 1.0 + uni(rng) * 2.0;
        s.displacement.phase[i] = uni(rng) * 2 * kPi;
    }

    // Diagonally dominant nonnegative color mixing; rows sum to <= 1 so the
    // mixed signal stays in the projector's reachable range.
    for (int r = 0; r < 3; ++r) {
        double offsum = 0;
        for (int c = 0; c < 3; ++c)
            if (c != r) {
                s.color_mix[r * 3 + c] = uni(rng) * 0.2;
                offsum += s.color_mix[r * 3 + c];
            }
        s.color_mix[r * 3 + r] = 1.0 - offsum - uni(rng) * 0.05;
    }

    s.reflectance_blend = 0.7 + uni(rng) * 0.25;
    for (int c = 0; c < 3; ++c) {
        s.projector_gamma[c] = 1.8 + uni(rng) * 0.6;
        s.camera_gamma[c] = 1.0 + uni(rng) * 0.4;
        s.ambient[c] = uni(rng) * 0.03;
    }
    s.noise_sigma = uni(rng) * 0.01;
    return s;
}

Tensor photometric_response(const Tensor& x, const SceneSetup& scene) {
    if (x.ndim() != 4 || x.dim(0) != 1 || x.dim(1) != 3 || x.dim(2) != scene.height ||
        x.dim(3) != scene.width)
        throw ArgumentError("photometric_response: expected (1,3," + std::to_string(scene.height) +
                            "," + std::to_string(scene.width) + "), got " + shape_str(x.shape()));
    const auto xd = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i)
        if (xd[i] < 0.0f || xd[i] > 1.0f)
            throw ArgumentError("photometric_response: input values must lie in [0,1]");

    const std::int64_t hw = scene.height * scene.width;
    auto out = Tensor::zeros(x.shape());
    auto od = out.data();
    const auto tex = scene.surface_texture.data();
    const double blend = scene.reflectance_blend;
    for (std::int64_t p = 0; p < hw; ++p) {
        double lin[3];
        for (int c = 0; c < 3; ++c)
            lin[c] = std::pow(static_cast<double>(xd[c * hw + p]), scene.projector_gamma[c]);
        for (int c = 0; c < 3; ++c) {
            double v = scene.ambient[c];
            for (int c2 = 0; c2 < 3; ++c2) v += scene.color_mix[c * 3 + c2] * lin[c2];
            v = std::clamp(v, 0.0, 1.0);
            const double refl = (1.0 - blend) + blend * static_cast<double>(tex[c * hw + p]);
            od[c * hw + p] = static_cast<float>(refl * v);
        }
    }
    return out;
}

Tensor render_capture(const Tensor& x, const SceneSetup& scene, std::uint64_t noise_index) {
    auto pre = photometric_response(x, scene);
    const std::int64_t H = scene.height, W = scene.width, hw = H * W;

    // Geometric warp into the camera frame (backward sampling, border clamp).
    auto cam = Tensor::zeros(x.shape());
    auto cd = cam.data();
    const auto pd = pre.data();
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double cx = W > 1 ? -1.0 + 2.0 * j / (W - 1) : 0.0;
            const double cy = H > 1 ? -1.0 + 2.0 * i / (H - 1) : 0.0;
            double px, py;
            scene.forward_geom(cx, cy, px, py);
            const double u = (px + 1.0) * 0.5 * (W - 1);
            const double v = (py + 1.0) * 0.5 * (H - 1);
            for (int c = 0; c < 3; ++c)
                cd[c * hw + i * W + j] = static_cast<float>(
                    bilinear_at(pd.subspan(static_cast<std::size_t>(c * hw), static_cast<std::size_t>(hw)), H, W, u, v));
        }

    // Camera response and sensor noise.
    std::mt19937_64 noise_rng(splitmix(splitmix(static_cast<std::uint64_t>(scene.seed)) ^ noise_index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) {
            double v = std::pow(std::clamp(static_cast<double>(cd[c * hw + p]), 0.0, 1.0),
                                1.0 / scene.camera_gamma[c]);
            if (scene.noise_sigma > 0.0) v += gauss(noise_rng) * scene.noise_sigma;
            cd[c * hw + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return cam;
}

Tensor warp_to_frontal(const Tensor& captured, const SceneSetup& scene) {
    const std::int64_t H = scene.height, W = scene.width, hw = H * W;
    auto out = Tensor::zeros(captured.shape());
    auto od = out.data();
    const auto cd = captured.data();
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double px = W > 1 ? -1.0 + 2.0 * j / (W - 1) : 0.0;
            const double py = H > 1 ? -1.0 + 2.0 * i / (H - 1) : 0.0;
            double cx, cy;
            scene.inverse_geom(px, py, cx, cy);
            const double u = (cx + 1.0) * 0.5 * (W - 1);
            const double v = (cy + 1.0) * 0.5 * (H - 1);
            for (int c = 0; c < 3; ++c)
                od[c * hw + i * W + j] = static_cast<float>(
                    bilinear_at(cd.subspan(static_cast<std::size_t>(c * hw), static_cast<std::size_t>(hw)), H, W, u, v));
        }
    return out;
}

Tensor warp_from_frontal(const Tensor& frontal, const SceneSetup& scene) {
    const std::int64_t H = scene.height, W = scene.width, hw = H * W;
    auto out = Tensor::zeros(frontal.shape());
    auto od = out.data();
    const auto fd = frontal.data();
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double cx = W > 1 ? -1.0 + 2.0 * j / (W - 1) : 0.0;
            const double cy = H > 1 ? -1.0 + 2.0 * i / (H - 1) : 0.0;
            double px, py;
            scene.forward_geom(cx, cy, px, py);
            const double u = (px + 1.0) * 0.5 * (W - 1);
            const double v = (py + 1.0) * 0.5 * (H - 1);
            for (int c = 0; c < 3; ++c)
                od[c * hw + i * W + j] = static_cast<float>(
                    bilinear_at(fd.subspan(static_cast<std::size_t>(c * hw), static_cast<std::size_t>(hw)), H, W, u, v));
        }
    return out;
}

Tensor gen_sampling_image(int seed, int index, std::int64_t height, std::int64_t width) {
    std::mt19937 rng(static_cast<std::uint32_t>(
        splitmix(splitmix(static_cast<std::uint64_t>(seed)) ^ (0xABCDULL + index))));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto img = Tensor::zeros({1, 3, height, width});
    auto d = img.data();
    const std::int64_t hw = height * width;

    // Base: per-channel linear gradient with random orientation.
    for (int c = 0; c < 3; ++c) {
        const double gx = uni(rng) * 2 - 1, gy = uni(rng) * 2 - 1, off = uni(rng);
        for (std::int64_t i = 0; i < height; ++i)
            for (std::int64_t j = 0; j < width; ++j) {
                const double x = static_cast<double>(j) / width;
                const double y = static_cast<double>(i) / height;
                d[c * hw + i * width + j] =
                    static_cast<float>(std::clamp(off + 0.5 * (gx * x + gy * y), 0.06, 0.94));
            }
    }
    // Colorful shapes: rectangles and filled circles.
    const int shapes = 6 + static_cast<int>(uni(rng) * 6);
    for (int sidx = 0; sidx < shapes; ++sidx) {
        const float col[3] = {static_cast<float>(0.06 + 0.88 * uni(rng)),
                              static_cast<float>(0.06 + 0.88 * uni(rng)),
                              static_cast<float>(0.06 + 0.88 * uni(rng))};
        const bool circle = uni(rng) < 0.5;
        const double cx = uni(rng) * width, cy = uni(rng) * height;
        const double r = (0.05 + 0.2 * uni(rng)) * std::min(width, height);
        const std::int64_t x0 = static_cast<std::int64_t>(std::max(0.0, cx - r));
        const std::int64_t x1 = static_cast<std::int64_t>(std::min<double>(width, cx + r));
        const std::int64_t y0 = static_cast<std::int64_t>(std::max(0.0, cy - r));
        const std::int64_t y1 = static_cast<std::int64_t>(std::min<double>(height, cy + r));
        for (std::int64_t i = y0; i < y1; ++i)
            for (std::int64_t j = x0; j < x1; ++j) {
                if (circle && (i - cy) * (i - cy) + (j - cx) * (j - cx) > r * r) continue;
                for (int c = 0; c < 3; ++c)
                    d[c * hw + i * width + j] = 0.25f * d[c * hw + i * width + j] + 0.75f * col[c];
            }
    }
    return img;
}

DatasetManifest gen_dataset(const SceneSetup& scene, const std::vector<Tensor>& images,
                            int n_train, int n_test, const std::filesystem::path& out_dir,
                            int k) {
    if (static_cast<int>(images.size()) < n_train + n_test)
        throw ArgumentError("gen_dataset: need " + std::to_string(n_train + n_test) +
                            " source images, got " + std::to_string(images.size()));
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "train", ec);
    fs::create_directories(out_dir / "test", ec);
    if (!fs::exists(out_dir / "train") || !fs::exists(out_dir / "test"))
        throw IoError("gen_dataset: cannot create " + out_dir.string());

    DatasetManifest m;
    m.seed = scene.seed;
    m.height = scene.height;
    m.width = scene.width;
    m.k = k;
    m.n_train = n_train;
    m.n_test = n_test;
    m.noise_sigma = scene.noise_sigma;
    m.probe_level = scene.probe_level;

    auto probe = Tensor::filled({1, 3, scene.height, scene.width},
                                static_cast<float>(scene.probe_level));
    write_png(out_dir / "surface.png", render_capture(probe, scene, 0));
    m.surface_file = "surface.png";

    char name[32];
    for (int i = 0; i < n_train; ++i) {
        std::snprintf(name, sizeof(name), "prj_%04d.png", i);
        const std::string prj = std::string("train/") + name;
        std::snprintf(name, sizeof(name), "cam_%04d.png", i);
        const std::string cam = std::string("train/") + name;
        write_png(out_dir / prj, images[static_cast<std::size_t>(i)]);
        write_png(out_dir / cam,
                  render_capture(images[static_cast<std::size_t>(i)], scene, 1 + static_cast<std::uint64_t>(i)));
        m.train_prj.push_back(prj);
        m.train_cam.push_back(cam);
    }
    for (int i = 0; i < n_test; ++i) {
        const int src = n_train + i;
        std::snprintf(name, sizeof(name), "prj_%04d.png", i);
        const std::string prj = std::string("test/") + name;
        std::snprintf(name, sizeof(name), "cam_%04d.png", i);
        const std::string cam = std::string("test/") + name;
        write_png(out_dir / prj, images[static_cast<std::size_t>(src)]);
        write_png(out_dir / cam,
                  render_capture(images[static_cast<std::size_t>(src)], scene,
                                 1 + static_cast<std::uint64_t>(src)));
        m.test_prj.push_back(prj);
        m.test_cam.push_back(cam);
    }
    write_manifest(m, out_dir / "manifest.json");
    return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& manifest_path) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["height"] = m.height;
    j["width"] = m.width;
    j["k"] = m.k;
    j["n_train"] = m.n_train;
    j["n_test"] = m.n_test;
    j["noise_sigma"] = m.noise_sigma;
    j["probe_level"] = m.probe_level;
    j["surface"] = m.surface_file;
    j["train_prj"] = m.train_prj;
    j["train_cam"] = m.train_cam;
    j["test_prj"] = m.test_prj;
    j["test_cam"] = m.test_cam;
    std::ofstream out(manifest_path);
    if (!out) throw IoError("write_manifest: cannot open " + manifest_path.string());
    out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("read_manifest: cannot open " + manifest_path.string());
    nlohmann::json j;
    in >> j;
    DatasetManifest m;
    m.seed = j.at("seed").get<int>();
    m.height = j.at("height").get<std::int64_t>();
    m.width = j.at("width").get<std::int64_t>();
    m.k = j.at("k").get<int>();
    m.n_train = j.at("n_train").get<int>();
    m.n_test = j.at("n_test").get<int>();
    m.noise_sigma = j.at("noise_sigma").get<double>();
    m.probe_level = j.at("probe_level").get<double>();
    m.surface_file = j.at("surface").get<std::string>();
    m.train_prj = j.at("train_prj").get<std::vector<std::string>>();
    m.train_cam = j.at("train_cam").get<std::vector<std::string>>();
    m.test_prj = j.at("test_prj").get<std::vector<std::string>>();
    m.test_cam = j.at("test_cam").get<std::vector<std::string>>();
    return m;
}

SceneSetup scene_from_manifest(const DatasetManifest& m) {
    auto scene = gen_setup(m.seed, m.height, m.width);
    scene.noise_sigma = m.noise_sigma;
    scene.probe_level = m.probe_level;
    return scene;
}

} // namespace compenkit
