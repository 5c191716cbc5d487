#pragma once

#include <vector>

#include "compenkit/tensor.hpp"

namespace compenkit {

/// sqrt(mean (a-b)^2) on [0,1] images.
double rmse(const Tensor& a, const Tensor& b);

/// 20*log10(1/rmse), capped at 100 dB when rmse < 1e-5.
double psnr(const Tensor& a, const Tensor& b);

/// Standard SSIM: 11x11 Gaussian window sigma 1.5, C1=0.01^2, C2=0.03^2 on
/// unit dynamic range, valid windows, channel-averaged. Symmetric.
double ssim(const Tensor& a, const Tensor& b);

/// CIEDE2000 distance between two CIELAB colors (kL = kC = kH = 1).
double ciede2000_lab(double l1, double a1, double b1, double l2, double a2, double b2);

/// sRGB [0,1] -> CIELAB under D65.
void srgb_to_lab(double r, double g, double b, double& L, double& A, double& B);

/// Mean per-pixel CIEDE2000 between two sRGB images (3 channels required).
double delta_e(const Tensor& a, const Tensor& b);

/// Per-image metric lists with aggregate means.
struct MetricsRecord {
    std::vector<double> psnr, rmse, ssim, delta_e;

    void push(double p, double r, double s, double d) {
        psnr.push_back(p);
        rmse.push_back(r);
        ssim.push_back(s);
        delta_e.push_back(d);
    }
    static double mean_of(const std::vector<double>& v);
    double mean_psnr() const { return mean_of(psnr); }
    double mean_rmse() const { return mean_of(rmse); }
    double mean_ssim() const { return mean_of(ssim); }
    double mean_delta_e() const { return mean_of(delta_e); }
};

} // namespace compenkit
