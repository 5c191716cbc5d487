#include "compenkit/metrics.hpp"

#include <cmath>
#include <numbers>

#include "compenkit/errors.hpp"

namespace compenkit {

namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Collapse an image tensor to (C, H, W) view parameters.
void image_dims(const Tensor& t, std::int64_t& c, std::int64_t& h, std::int64_t& w,
                const char* op) {
    if (t.ndim() < 2) throw ShapeError(std::string(op) + ": expected an image tensor");
    h = t.dim(t.ndim() - 2);
    w = t.dim(t.ndim() - 1);
    c = t.numel() / (h * w);
}

} // namespace

double rmse(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "rmse");
    double acc = 0;
    const auto ad = a.data(), bd = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(ad[i]) - static_cast<double>(bd[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.numel()));
}

double psnr(const Tensor& a, const Tensor& b) {
    const double r = rmse(a, b);
    if (r < 1e-5) return 100.0;
    return 20.0 * std::log10(1.0 / r);
}

double ssim(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "ssim");
    std::int64_t C, H, W;
    image_dims(a, C, H, W, "ssim");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    if (H < win || W < win)
        throw ArgumentError("ssim: image smaller than the 11x11 window");

    double kernel[win][win];
    double ksum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - (win - 1) / 2.0;
            const double dx = j - (win - 1) / 2.0;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            ksum += kernel[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) kernel[i][j] /= ksum;

    const auto ad = a.data(), bd = b.data();
    double total = 0;
    std::int64_t count = 0;
    for (std::int64_t c = 0; c < C; ++c) {
        const float* pa = ad.data() + c * H * W;
        const float* pb = bd.data() + c * H * W;
        for (std::int64_t y = 0; y + win <= H; ++y)
            for (std::int64_t x = 0; x + win <= W; ++x) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = pa[(y + i) * W + x + j];
                        const double vb = pb[(y + i) * W + x + j];
                        const double k = kernel[i][j];
                        mu_a += k * va;
                        mu_b += k * vb;
                        aa += k * va * va;
                        bb += k * vb * vb;
                        ab += k * va * vb;
                    }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                const double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
                const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += num / den;
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

void srgb_to_lab(double r, double g, double b, double& L, double& A, double& B) {
    auto linearize = [](double u) {
        return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
    };
    const double rl = linearize(r), gl = linearize(g), bl = linearize(b);
    // sRGB -> XYZ, D65 white point.
    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    const double xn = 0.95047, yn = 1.0, zn = 1.08883;
    auto f = [](double t) {
        constexpr double delta = 6.0 / 29.0;
        return t > delta * delta * delta ? std::cbrt(t)
                                         : t / (3 * delta * delta) + 4.0 / 29.0;
    };
    const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
    L = 116.0 * fy - 16.0;
    A = 500.0 * (fx - fy);
    B = 200.0 * (fy - fz);
}

double ciede2000_lab(double l1, double a1, double b1, double l2, double a2, double b2) {
    constexpr double pi = std::numbers::pi;
    const double c1 = std::hypot(a1, b1);
    const double c2 = std::hypot(a2, b2);
    const double cbar = 0.5 * (c1 + c2);
    const double cbar7 = std::pow(cbar, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0))));
    const double ap1 = (1.0 + g) * a1;
    const double ap2 = (1.0 + g) * a2;
    const double cp1 = std::hypot(ap1, b1);
    const double cp2 = std::hypot(ap2, b2);
    auto hp = [&](double ap, double b) {
        if (ap == 0.0 && b == 0.0) return 0.0;
        double h = std::atan2(b, ap);
        if (h < 0) h += 2 * pi;
        return h;
    };
    const double hp1 = hp(ap1, b1);
    const double hp2 = hp(ap2, b2);

    const double dlp = l2 - l1;
    const double dcp = cp2 - cp1;
    double dhp_angle = 0.0;
    if (cp1 * cp2 != 0.0) {
        dhp_angle = hp2 - hp1;
        if (dhp_angle > pi) dhp_angle -= 2 * pi;
        else if (dhp_angle < -pi) dhp_angle += 2 * pi;
    }
    const double dhp = 2.0 * std::sqrt(cp1 * cp2) * std::sin(dhp_angle / 2.0);

    const double lbar = 0.5 * (l1 + l2);
    const double cpbar = 0.5 * (cp1 + cp2);
    double hbar;
    if (cp1 * cp2 == 0.0) {
        hbar = hp1 + hp2;
    } else if (std::abs(hp1 - hp2) <= pi) {
        hbar = 0.5 * (hp1 + hp2);
    } else if (hp1 + hp2 < 2 * pi) {
        hbar = 0.5 * (hp1 + hp2 + 2 * pi);
    } else {
        hbar = 0.5 * (hp1 + hp2 - 2 * pi);
    }

    const double t = 1.0 - 0.17 * std::cos(hbar - pi / 6.0) + 0.24 * std::cos(2.0 * hbar) +
                     0.32 * std::cos(3.0 * hbar + pi / 30.0) -
                     0.20 * std::cos(4.0 * hbar - 63.0 * pi / 180.0);
    const double dtheta = (30.0 * pi / 180.0) *
                          std::exp(-std::pow((hbar * 180.0 / pi - 275.0) / 25.0, 2.0));
    const double cpbar7 = std::pow(cpbar, 7.0);
    const double rc = 2.0 * std::sqrt(cpbar7 / (cpbar7 + std::pow(25.0, 7.0)));
    const double lb50 = (lbar - 50.0) * (lbar - 50.0);
    const double sl = 1.0 + 0.015 * lb50 / std::sqrt(20.0 + lb50);
    const double sc = 1.0 + 0.045 * cpbar;
    const double sh = 1.0 + 0.015 * cpbar * t;
    const double rt = -std::sin(2.0 * dtheta) * rc;

    const double tl = dlp / sl;
    const double tc = dcp / sc;
    const double th = dhp / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double delta_e(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "delta_e");
    std::int64_t C, H, W;
    image_dims(a, C, H, W, "delta_e");
    if (C != 3) throw ArgumentError("delta_e: expected a 3-channel sRGB image");
    const auto ad = a.data(), bd = b.data();
    const std::int64_t hw = H * W;
    double acc = 0;
    for (std::int64_t p = 0; p < hw; ++p) {
        double l1, a1, b1, l2, a2, b2;
        srgb_to_lab(ad[p], ad[hw + p], ad[2 * hw + p], l1, a1, b1);
        srgb_to_lab(bd[p], bd[hw + p], bd[2 * hw + p], l2, a2, b2);
        acc += ciede2000_lab(l1, a1, b1, l2, a2, b2);
    }
    return acc / static_cast<double>(hw);
}

double MetricsRecord::mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

} // namespace compenkit
