#include "compenkit/eval.hpp"

#include <cstdio>
#include <fstream>

#include "compenkit/errors.hpp"

namespace compenkit {

std::string EvalResult::summary() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "compensated:   psnr %7.4f dB  rmse %.4f  ssim %.4f  deltaE %7.4f\n"
                  "uncompensated: psnr %7.4f dB  rmse %.4f  ssim %.4f  deltaE %7.4f",
                  compensated.mean_psnr(), compensated.mean_rmse(), compensated.mean_ssim(),
                  compensated.mean_delta_e(), uncompensated.mean_psnr(),
                  uncompensated.mean_rmse(), uncompensated.mean_ssim(),
                  uncompensated.mean_delta_e());
    return buf;
}

void EvalResult::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("EvalResult::write_csv: cannot open " + path.string());
    out << "image,mode,psnr,rmse,ssim,delta_e\n";
    char buf[192];
    auto dump = [&](const MetricsRecord& r, const char* mode) {
        for (std::size_t i = 0; i < r.psnr.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,%.6f,%.6f,%.6f\n", i, mode,
                          r.psnr[i], r.rmse[i], r.ssim[i], r.delta_e[i]);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), "mean,%s,%.6f,%.6f,%.6f,%.6f\n", mode,
                      r.mean_psnr(), r.mean_rmse(), r.mean_ssim(), r.mean_delta_e());
        out << buf;
    };
    dump(compensated, "compensated");
    dump(uncompensated, "uncompensated");
}

EvalResult evaluate(const CompensationModel& model, const Dataset& data,
                    const SceneSetup& scene) {
    if (data.test_prj.empty()) throw ArgumentError("evaluate: dataset has no test pairs");
    EvalResult result;
    const std::uint64_t eval_noise_base =
        1 + static_cast<std::uint64_t>(data.manifest.n_train) +
        static_cast<std::uint64_t>(data.manifest.n_test);
    for (std::size_t i = 0; i < data.test_prj.size(); ++i) {
        const auto& desired = data.test_prj[i];

        // The model consumes camera-frame images (it was trained on captures),
        // so pose the frontal-frame target in the camera frame first.
        auto comp = compensate(model, warp_from_frontal(desired, scene), data.surface);
        auto captured = render_capture(comp, scene, eval_noise_base + i);
        auto frontal = warp_to_frontal(captured, scene);
        result.compensated.push(psnr(frontal, desired), rmse(frontal, desired),
                                ssim(frontal, desired), delta_e(frontal, desired));

        auto baseline = warp_to_frontal(data.test_cam[i], scene);
        result.uncompensated.push(psnr(baseline, desired), rmse(baseline, desired),
                                  ssim(baseline, desired), delta_e(baseline, desired));
    }
    return result;
}

} // namespace compenkit
