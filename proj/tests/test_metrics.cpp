#include <cmath>
#include <random>

#include "compenkit/loss.hpp"
#include "compenkit/metrics.hpp"
#include "doctest.h"

using namespace compenkit;

namespace {

// Sharma, Wu & Dalal verification set: 34 Lab pairs with published CIEDE2000
// values to four decimals (kL = kC = kH = 1).
struct LabPair {
    double l1, a1, b1, l2, a2, b2, expected;
};

const LabPair kCiedePairs[34] = {
    {50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425},
    {50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615},
    {50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412},
    {50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669},
    {50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461},
    {50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065},
    {50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492},
    {50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977},
    {50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030},
    {50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000},
    {60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644},
    {63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630},
    {61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731},
    {35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645},
    {22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373},
    {36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146},
    {90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441},
    {90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381},
    {6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377},
    {2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082},
};

// Plain per-window SSIM in double, written independently of the library's
// convolution-based version.
double ssim_reference(const Tensor& a, const Tensor& b) {
    const std::int64_t C = a.dim(1), H = a.dim(2), W = a.dim(3);
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    double g[win][win];
    double gsum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - 5.0, dx = j - 5.0;
            g[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            gsum += g[i][j];
        }
    for (auto& row : g)
        for (auto& v : row) v /= gsum;

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    std::int64_t count = 0;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y + win <= H; ++y)
            for (std::int64_t x = 0; x + win <= W; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = a.data()[(c * H + y + i) * W + x + j];
                        const double vb = b.data()[(c * H + y + i) * W + x + j];
                        ma += g[i][j] * va;
                        mb += g[i][j] * vb;
                        saa += g[i][j] * va * va;
                        sbb += g[i][j] * vb * vb;
                        sab += g[i][j] * va * vb;
                    }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += (2 * ma * mb + c1) * (2 * cov + c2) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return total / count;
}

Tensor random_image(std::mt19937& rng, std::int64_t h, std::int64_t w) {
    auto img = Tensor::zeros({1, 3, h, w});
    std::uniform_real_distribution<float> noise(-0.15f, 0.15f);
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                const float base = 0.5f + 0.4f * std::sin(0.3f * x + 0.5f * y + 1.7f * c);
                float v = base + noise(rng);
                img.data()[(c * h + y) * w + x] = std::min(1.0f, std::max(0.0f, v));
            }
    return img;
}

} // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("CIEDE2000 reproduces the published verification pairs") {
    for (const auto& p : kCiedePairs) {
        const double got = ciede2000_lab(p.l1, p.a1, p.b1, p.l2, p.a2, p.b2);
        CHECK(std::abs(got - p.expected) < 1e-4);
    }
}

TEST_CASE("CIEDE2000 is symmetric and zero on identical colors") {
    CHECK(ciede2000_lab(50, 2.5, 0, 50, 2.5, 0) == doctest::Approx(0.0));
    const double ab = ciede2000_lab(50, 2.5, 0, 61, -5, 29);
    const double ba = ciede2000_lab(61, -5, 29, 50, 2.5, 0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}

TEST_CASE("sRGB to Lab hits the reference white") {
    double L, A, B;
    srgb_to_lab(1.0, 1.0, 1.0, L, A, B);
    CHECK(L == doctest::Approx(100.0).epsilon(1e-3));
    CHECK(std::abs(A) < 1e-2);
    CHECK(std::abs(B) < 1e-2);
    srgb_to_lab(0.0, 0.0, 0.0, L, A, B);
    CHECK(std::abs(L) < 1e-3);
}

TEST_CASE("SSIM is 1 on identical images and below 1 otherwise") {
    std::mt19937 rng(21);
    auto a = random_image(rng, 24, 24);
    auto b = random_image(rng, 24, 24);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-6);
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));
}

TEST_CASE("SSIM matches the per-window reference on 10 pairs") {
    std::mt19937 rng(22);
    for (int i = 0; i < 10; ++i) {
        auto a = random_image(rng, 20, 26);
        auto b = random_image(rng, 20, 26);
        CHECK(std::abs(ssim(a, b) - ssim_reference(a, b)) < 1e-4);
    }
}

TEST_CASE("PSNR and RMSE are formula-consistent") {
    std::mt19937 rng(23);
    for (int i = 0; i < 10; ++i) {
        auto a = Tensor::rand_uniform({1, 3, 16, 16}, rng);
        auto b = Tensor::rand_uniform({1, 3, 16, 16}, rng);
        const double r = rmse(a, b);
        CHECK(std::abs(psnr(a, b) - 20.0 * std::log10(1.0 / r)) < 1e-9);
    }
    auto a = Tensor::filled({1, 3, 8, 8}, 0.5f);
    CHECK(psnr(a, a) == doctest::Approx(100.0));
    CHECK(rmse(a, a) == doctest::Approx(0.0));
}

TEST_CASE("delta_e vanishes on identical images") {
    std::mt19937 rng(24);
    auto a = random_image(rng, 12, 12);
    CHECK(delta_e(a, a) < 1e-12);
    auto b = random_image(rng, 12, 12);
    CHECK(delta_e(a, b) > 0.0);
}

TEST_CASE("loss terms vanish at the optimum and are nonnegative") {
    std::mt19937 rng(25);
    auto x = Tensor::rand_uniform({1, 3, 16, 16}, rng);
    LossTerms all;
    auto at_opt = loss(x, x, all);
    CHECK(at_opt.l1 == doctest::Approx(0.0));
    CHECK(at_opt.l2 == doctest::Approx(0.0));
    CHECK(std::abs(at_opt.ssim_term) < 1e-6);

    auto y = Tensor::rand_uniform({1, 3, 16, 16}, rng);
    auto r = loss(x, y, all);
    CHECK(r.l1 > 0.0);
    CHECK(r.l2 > 0.0);
    CHECK(static_cast<double>(r.total.item()) ==
          doctest::Approx(r.l1 + r.l2 + r.ssim_term).epsilon(1e-5));
}

TEST_CASE("loss term selection and labels") {
    LossTerms only_l2;
    only_l2.l1 = false;
    only_l2.ssim = false;
    CHECK(only_l2.str() == "l2");
    LossTerms all;
    CHECK(all.str() == "l1+l2+ssim");
    LossTerms none;
    none.l1 = none.l2 = none.ssim = false;
    auto x = Tensor::zeros({1, 3, 16, 16});
    CHECK_THROWS_AS(loss(x, x, none), ArgumentError);
}

TEST_SUITE_END();
