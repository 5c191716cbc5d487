#include "compenkit/ablate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "compenkit/errors.hpp"

namespace compenkit {

void AblationTable::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("AblationTable::write_csv: cannot open " + path.string());
    for (const auto& h : extra_header) out << "# " << h << "\n";
    out << "variant,seed,n_train,psnr,rmse,ssim,delta_e,seconds\n";
    char buf[224];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%u,%d,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                      r.variant.c_str(), r.seed, r.n_train, r.psnr, r.rmse, r.ssim,
                      r.delta_e, r.seconds);
        out << buf;
    }
}

std::string AblationTable::formatted() const {
    std::string s;
    char buf[224];
    std::snprintf(buf, sizeof(buf), "%-14s %5s %8s %9s %8s %8s %9s %9s\n", "variant",
                  "seed", "n_train", "psnr", "rmse", "ssim", "delta_e", "seconds");
    s += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-14s %5u %8d %9.4f %8.4f %8.4f %9.4f %9.2f\n",
                      r.variant.c_str(), r.seed, r.n_train, r.psnr, r.rmse, r.ssim,
                      r.delta_e, r.seconds);
        s += buf;
    }
    return s;
}

double AblationTable::median_psnr(const std::string& variant) const {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.variant == variant) v.push_back(r.psnr);
    if (v.empty()) throw ArgumentError("median_psnr: no rows for variant " + variant);
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ModelConfig variant_config(const std::string& name) {
    ModelConfig c;
    if (name == "full") return c;
    if (name == "no_p1") {
        c.use_p1 = false;
        return c;
    }
    if (name == "no_p2") {
        c.use_p2 = false;
        return c;
    }
    if (name == "no_p1p2") {
        c.use_p1 = c.use_p2 = false;
        return c;
    }
    if (name == "no_r1r2") {
        c.use_r1 = c.use_r2 = false;
        return c;
    }
    if (name == "coarse_only") {
        c.use_refine = false;
        return c;
    }
    throw ArgumentError("unknown ablation variant: " + name);
}

const std::vector<std::string>& attention_variants() {
    static const std::vector<std::string> v{"full", "no_p1", "no_p2", "no_p1p2"};
    return v;
}

const std::vector<std::string>& refinement_variants() {
    static const std::vector<std::string> v{"full", "no_r1r2", "coarse_only"};
    return v;
}

const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> v{"full",    "no_p1",   "no_p2",
                                            "no_p1p2", "no_r1r2", "coarse_only"};
    return v;
}

namespace {

AblationRow timed_run(const std::string& label, const ModelConfig& mc, const Dataset& data,
                      const SceneSetup& scene, const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    auto model = CompensationModel::make(mc);
    model.init(cfg.seed);
    train(model, data, cfg);
    auto ev = evaluate(model, data, scene);
    const auto t1 = std::chrono::steady_clock::now();

    AblationRow row;
    row.variant = label;
    row.seed = cfg.seed;
    row.n_train = static_cast<int>(data.train_prj.size());
    row.psnr = ev.compensated.mean_psnr();
    row.rmse = ev.compensated.mean_rmse();
    row.ssim = ev.compensated.mean_ssim();
    row.delta_e = ev.compensated.mean_delta_e();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    return row;
}

} // namespace

AblationRow run_variant(const std::string& variant, const Dataset& data,
                        const SceneSetup& scene, const TrainConfig& cfg) {
    return timed_run(variant, variant_config(variant), data, scene, cfg);
}

AblationTable ablate_architecture(const Dataset& data, const SceneSetup& scene,
                                  const TrainConfig& cfg,
                                  const std::vector<std::string>& variants,
                                  const std::vector<unsigned>& seeds) {
    AblationTable table;
    table.extra_header.push_back("architecture ablation");
    for (const auto& name : variants)
        for (auto seed : seeds) {
            auto c = cfg;
            c.seed = seed;
            table.rows.push_back(run_variant(name, data, scene, c));
        }
    return table;
}

AblationTable ablate_loss(const Dataset& data, const SceneSetup& scene,
                          const TrainConfig& cfg) {
    AblationTable table;
    table.extra_header.push_back("loss-term ablation");
    for (int mask = 1; mask < 8; ++mask) {
        auto c = cfg;
        c.terms.l1 = mask & 1;
        c.terms.l2 = mask & 2;
        c.terms.ssim = mask & 4;
        auto row = timed_run(c.terms.str(), ModelConfig{}, data, scene, c);
        table.rows.push_back(row);
    }
    return table;
}

AblationTable ablate_train_size(const Dataset& data, const SceneSetup& scene,
                                const TrainConfig& cfg, const std::vector<int>& sizes) {
    AblationTable table;
    table.extra_header.push_back("training-set size sweep");
    for (int n : sizes) {
        if (n < 1 || n > static_cast<int>(data.train_prj.size()))
            throw ArgumentError("ablate_train_size: size out of range");
        Dataset sub = data;
        sub.train_prj.resize(static_cast<std::size_t>(n));
        sub.train_cam.resize(static_cast<std::size_t>(n));
        char label[32];
        std::snprintf(label, sizeof(label), "train_%d", n);
        table.rows.push_back(timed_run(label, ModelConfig{}, sub, scene, cfg));
    }
    return table;
}

} // namespace compenkit
