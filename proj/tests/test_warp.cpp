#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "compenkit/warp.hpp"
#include "doctest.h"

using namespace compenkit;

namespace {

// Independent TPS solve: assemble the interpolation system with Eigen and
// evaluate the fitted spline directly.
struct EigenTps {
    std::vector<std::array<double, 2>> ctrl;
    Eigen::VectorXd wx, wy;

    EigenTps(std::vector<std::array<double, 2>> pts, const std::vector<double>& offsets)
        : ctrl(std::move(pts)) {
        const int n = static_cast<int>(ctrl.size());
        const int m = n + 3;
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd bx = Eigen::VectorXd::Zero(m), by = Eigen::VectorXd::Zero(m);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double dx = ctrl[i][0] - ctrl[j][0];
                const double dy = ctrl[i][1] - ctrl[j][1];
                const double r2 = dx * dx + dy * dy;
                L(i, j) = r2 > 0 ? r2 * std::log(r2) : 0.0;
            }
            L(i, n) = L(n, i) = 1.0;
            L(i, n + 1) = L(n + 1, i) = ctrl[i][0];
            L(i, n + 2) = L(n + 2, i) = ctrl[i][1];
            bx(i) = ctrl[i][0] + offsets[2 * i];
            by(i) = ctrl[i][1] + offsets[2 * i + 1];
        }
        wx = L.fullPivLu().solve(bx);
        wy = L.fullPivLu().solve(by);
    }

    void eval(double x, double y, double& ox, double& oy) const {
        const int n = static_cast<int>(ctrl.size());
        ox = wx(n) + wx(n + 1) * x + wx(n + 2) * y;
        oy = wy(n) + wy(n + 1) * x + wy(n + 2) * y;
        for (int i = 0; i < n; ++i) {
            const double dx = x - ctrl[i][0];
            const double dy = y - ctrl[i][1];
            const double r2 = dx * dx + dy * dy;
            const double u = r2 > 0 ? r2 * std::log(r2) : 0.0;
            ox += wx(i) * u;
            oy += wy(i) * u;
        }
    }
};

} // namespace

TEST_SUITE_BEGIN("warp");

TEST_CASE("identity affine grid equals the identity mesh") {
    auto p = AffineParamsT<double>::identity();
    auto g = affine_grid(p.theta, 7, 9);
    auto id = identity_grid<double>(7, 9);
    for (std::int64_t i = 0; i < g.numel(); ++i)
        CHECK(g.data()[i] == doctest::Approx(id.data()[i]).epsilon(1e-14));
}

TEST_CASE("affine grid corners follow theta") {
    auto theta = TensorT<double>::from_data({2, 3}, {0.5, 0.0, 0.1, 0.0, 2.0, -0.2});
    auto g = affine_grid(theta, 5, 5);
    // top-left corner is (-1,-1)
    CHECK(g.data()[0] == doctest::Approx(0.5 * -1 + 0.1));
    CHECK(g.data()[25] == doctest::Approx(2.0 * -1 - 0.2));
    // bottom-right corner is (1,1)
    CHECK(g.data()[24] == doctest::Approx(0.5 + 0.1));
    CHECK(g.data()[49] == doctest::Approx(2.0 - 0.2));
}

TEST_CASE("tps_fit agrees with an Eigen solve") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> off(-0.2, 0.2);
    auto ctrl = grid_tps_ctrl_points(3, 3);
    std::vector<double> offsets(2 * ctrl.size());
    for (auto& v : offsets) v = off(rng);
    auto c = tps_fit(ctrl, offsets);
    EigenTps ref(ctrl, offsets);
    for (std::size_t i = 0; i < ctrl.size() + 3; ++i) {
        CHECK(c.wx[i] == doctest::Approx(ref.wx(static_cast<int>(i))).epsilon(1e-9));
        CHECK(c.wy[i] == doctest::Approx(ref.wy(static_cast<int>(i))).epsilon(1e-9));
    }
}

TEST_CASE("tps_grid matches Eigen evaluation off the control points") {
    std::mt19937 rng(18);
    std::uniform_real_distribution<double> off(-0.15, 0.15);
    auto tps = TpsParamsT<double>::make(default_tps_ctrl_points());
    std::vector<double> offsets(2 * tps.ctrl_points.size());
    for (auto& v : offsets) v = off(rng);
    for (std::size_t i = 0; i < offsets.size(); ++i) tps.offsets.data()[i] = offsets[i];

    const std::int64_t H = 9, W = 11;
    auto g = tps_grid(tps, H, W);
    EigenTps ref(tps.ctrl_points, offsets);
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double x = -1.0 + 2.0 * j / (W - 1);
            const double y = -1.0 + 2.0 * i / (H - 1);
            double ox, oy;
            ref.eval(x, y, ox, oy);
            CHECK(g.data()[i * W + j] == doctest::Approx(ox).epsilon(1e-7));
            CHECK(g.data()[H * W + i * W + j] == doctest::Approx(oy).epsilon(1e-7));
        }
}

TEST_CASE("TPS interpolates its control-point targets") {
    auto tps = TpsParamsT<double>::make(grid_tps_ctrl_points(2, 2));
    tps.offsets.data()[0] = 0.1; // move (-1,-1) in x
    tps.offsets.data()[5] = -0.2;
    auto g = tps_grid(tps, 3, 3); // mesh corners coincide with control points
    CHECK(g.data()[0] == doctest::Approx(-0.9).epsilon(1e-10));
    CHECK(g.data()[9 + 6] == doctest::Approx(0.8).epsilon(1e-10)); // y of (-1,1)
}

TEST_CASE("zero-offset TPS grid is the identity") {
    auto tps = TpsParamsT<double>::make(default_tps_ctrl_points());
    auto g = tps_grid(tps, 12, 8);
    auto id = identity_grid<double>(12, 8);
    for (std::int64_t i = 0; i < g.numel(); ++i)
        CHECK(std::abs(g.data()[i] - id.data()[i]) < 1e-10);
}

TEST_CASE("coarse grid composition reduces to affine under identity TPS") {
    auto theta = TensorT<double>::from_data({2, 3}, {0.9, 0.05, 0.02, -0.03, 0.85, 0.01});
    auto ga = affine_grid(theta, 16, 16);
    auto gt = identity_grid<double>(16, 16);
    auto gc = compose_coarse_grid(ga, gt);
    for (std::int64_t i = 0; i < gc.numel(); ++i)
        CHECK(gc.data()[i] == doctest::Approx(ga.data()[i]).epsilon(1e-9));
}

TEST_CASE("zero-weight refinement is the identity map") {
    RefineNetConfig cfg;
    auto net = RefineNetT<double>::make(cfg); // weights default to zero
    std::mt19937 rng(19);
    auto g = TensorT<double>::rand_uniform({1, 2, 16, 16}, rng, -1.0, 1.0);
    auto out = net.forward(g);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(out.data()[i] == g.data()[i]);
}

TEST_CASE("ganet collects theta, tps and refine parameters") {
    GaNetConfig cfg;
    auto g = GaNetT<float>::make(cfg);
    std::vector<ParamT<float>> ps;
    g.collect(ps);
    REQUIRE(ps.size() > 2);
    CHECK(ps[0].name == "ganet.theta_aff");
    CHECK(ps[1].name == "ganet.theta_tps");
    CHECK(ps[0].tensor.shape() == Shape{2, 3});
    CHECK(ps[1].tensor.shape() == Shape{5, 2});
}

TEST_CASE("tps_points validation") {
    GaNetConfig cfg;
    cfg.tps_points = 9; // 3x3 grid
    CHECK(GaNetT<float>::make(cfg).tps.ctrl_points.size() == 9);
    cfg.tps_points = 7;
    CHECK_THROWS_AS(GaNetT<float>::make(cfg), ArgumentError);
}

TEST_SUITE_END();
