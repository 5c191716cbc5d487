// compenkit CLI: dataset generation, training, compensation, evaluation,
// ablations and gradient checking against the built-in simulator.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "compenkit/ablate.hpp"
#include "compenkit/checkpoint.hpp"
#include "compenkit/dataset.hpp"
#include "compenkit/eval.hpp"
#include "compenkit/gradcheck_suite.hpp"
#include "compenkit/image.hpp"
#include "compenkit/threading.hpp"
#include "compenkit/train.hpp"

namespace fs = std::filesystem;
using namespace compenkit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

// File-backed run configuration. Strict schema: unknown keys are rejected.
struct RunConfig {
    int seed = 7;
    int size = 128;
    int k = 2;
    int n_train = 32;
    int n_test = 8;
    double noise_sigma = 0.005;
    double probe_level = 0.5;

    double lr = 1e-3;
    double decay_factor = 5.0;
    int decay_every = 1500;
    int iters = 300;
    int batch = 4;
    std::string loss_terms = "l1+l2+ssim";
    std::string init_mode = "scaled"; // or "normal"

    int tps_points = 5;
    bool use_refine = true, use_r1 = true, use_r2 = true;
    bool use_p1 = true, use_p2 = true;
};

void apply_json(RunConfig& c, const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "seed",       "size",        "k",           "n_train",  "n_test",
        "noise_sigma", "probe_level", "lr",         "decay_factor", "decay_every",
        "iters",      "batch",       "loss",        "init",     "tps_points",
        "use_refine", "use_r1",      "use_r2",      "use_p1",   "use_p2"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ArgumentError("config: unknown key '" + it.key() + "'");
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("size", c.size);
    get("k", c.k);
    get("n_train", c.n_train);
    get("n_test", c.n_test);
    get("noise_sigma", c.noise_sigma);
    get("probe_level", c.probe_level);
    get("lr", c.lr);
    get("decay_factor", c.decay_factor);
    get("decay_every", c.decay_every);
    get("iters", c.iters);
    get("batch", c.batch);
    get("loss", c.loss_terms);
    get("init", c.init_mode);
    get("tps_points", c.tps_points);
    get("use_refine", c.use_refine);
    get("use_r1", c.use_r1);
    get("use_r2", c.use_r2);
    get("use_p1", c.use_p1);
    get("use_p2", c.use_p2);
}

LossTerms parse_loss_terms(const std::string& s) {
    LossTerms t;
    t.l1 = s.find("l1") != std::string::npos;
    t.l2 = s.find("l2") != std::string::npos;
    t.ssim = s.find("ssim") != std::string::npos;
    if (!t.any()) throw ArgumentError("config: loss '" + s + "' selects no terms");
    return t;
}

ModelConfig model_config(const RunConfig& c) {
    ModelConfig m;
    m.k = c.k;
    m.tps_points = c.tps_points;
    m.use_refine = c.use_refine;
    m.use_r1 = c.use_r1;
    m.use_r2 = c.use_r2;
    m.use_p1 = c.use_p1;
    m.use_p2 = c.use_p2;
    if (c.init_mode == "scaled") m.scaled_init = true;
    else if (c.init_mode == "normal") m.scaled_init = false;
    else throw ArgumentError("config: init must be 'scaled' or 'normal'");
    return m;
}

TrainConfig train_config(const RunConfig& c) {
    TrainConfig t;
    t.lr = c.lr;
    t.decay_factor = c.decay_factor;
    t.decay_every = c.decay_every;
    t.iters = c.iters;
    t.batch = c.batch;
    t.terms = parse_loss_terms(c.loss_terms);
    t.seed = static_cast<unsigned>(c.seed);
    return t;
}

int cmd_gen(const RunConfig& cfg, const std::string& out_dir) {
    auto scene = gen_setup(cfg.seed, cfg.size, cfg.size);
    scene.noise_sigma = cfg.noise_sigma;
    scene.probe_level = cfg.probe_level;
    std::vector<Tensor> images;
    for (int i = 0; i < cfg.n_train + cfg.n_test; ++i)
        images.push_back(gen_sampling_image(cfg.seed, i, cfg.size, cfg.size));
    auto manifest = gen_dataset(scene, images, cfg.n_train, cfg.n_test, out_dir, cfg.k);
    (void)manifest;
    std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_ckpt,
              const std::string& log_csv) {
    auto data = Dataset::load(data_dir);
    auto model = CompensationModel::make(model_config(cfg));
    model.init(static_cast<unsigned>(cfg.seed));
    const auto t0 = std::chrono::steady_clock::now();
    auto log = train(model, data, train_config(cfg));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_checkpoint(model, out_ckpt);
    if (!log_csv.empty()) log.write_csv(log_csv);
    const double final_loss = log.rows.empty() ? 0.0 : log.rows.back().loss;
    std::printf("trained %d iterations in %.1f s, final loss %.6f\n", cfg.iters, secs, final_loss);
    std::printf("checkpoint: %s\n", out_ckpt.c_str());
    return 0;
}

int cmd_compensate(const std::string& ckpt, const std::string& data_dir,
                   const std::vector<std::string>& inputs, const std::string& out_dir) {
    auto model = load_checkpoint(ckpt);
    auto data = Dataset::load(data_dir);
    fs::create_directories(out_dir);
    for (const auto& in_path : inputs) {
        auto img = read_png(in_path);
        if (img.dim(2) != data.surface.dim(2) || img.dim(3) != data.surface.dim(3))
            throw ArgumentError("compensate: input size of " + in_path +
                                " does not match the dataset surface");
        auto out = compensate(model, img, data.surface);
        const auto out_path = fs::path(out_dir) / fs::path(in_path).filename();
        write_png(out_path, out);
        std::cout << out_path.string() << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& report) {
    auto model = load_checkpoint(ckpt);
    auto data = Dataset::load(data_dir);
    auto scene = scene_from_manifest(data.manifest);
    auto result = evaluate(model, data, scene);
    if (!report.empty()) result.write_csv(report);
    std::cout << result.summary() << "\n";
    std::printf("PSNR/RMSE/SSIM/dE: %.4f / %.4f / %.4f / %.4f\n",
                result.compensated.mean_psnr(), result.compensated.mean_rmse(),
                result.compensated.mean_ssim(), result.compensated.mean_delta_e());
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& data_dir, const std::string& study,
               std::vector<std::string> variants, std::vector<unsigned> seeds,
               const std::string& out_csv) {
    auto data = Dataset::load(data_dir);
    auto scene = scene_from_manifest(data.manifest);
    auto tcfg = train_config(cfg);
    if (seeds.empty()) seeds = {tcfg.seed};

    AblationTable table;
    if (study == "loss") {
        table = ablate_loss(data, scene, tcfg);
    } else if (study == "trainsize") {
        std::vector<int> sizes;
        for (int n = 8; n <= static_cast<int>(data.train_prj.size()); n += 8) sizes.push_back(n);
        table = ablate_train_size(data, scene, tcfg, sizes);
    } else if (study == "attention") {
        table = ablate_architecture(data, scene, tcfg, attention_variants(), seeds);
    } else if (study == "refine") {
        table = ablate_architecture(data, scene, tcfg, refinement_variants(), seeds);
    } else if (study == "arch") {
        table = ablate_architecture(data, scene, tcfg, all_variants(), seeds);
    } else if (study == "custom") {
        if (variants.empty()) throw ArgumentError("ablate: custom study needs --variants");
        table = ablate_architecture(data, scene, tcfg, variants, seeds);
    } else {
        throw ArgumentError("ablate: unknown study '" + study + "'");
    }
    if (!out_csv.empty()) table.write_csv(out_csv);
    std::cout << table.formatted();
    return 0;
}

int cmd_gradcheck(const std::string& precision, int n_seeds) {
    bool ok = true;
    auto report = [&](const char* label, const GradcheckReport& rep, double threshold) {
        std::printf("%s precision (threshold %g):\n", label, threshold);
        for (const auto& r : rep.rows) {
            const bool pass = r.max_rel < threshold;
            ok = ok && pass;
            std::printf("  %-18s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel,
                        pass ? "ok" : "FAIL");
        }
    };
    if (precision == "single" || precision == "both")
        report("single", run_gradcheck_suite<float>(n_seeds), 1e-3);
    if (precision == "double" || precision == "both")
        report("double", run_gradcheck_suite<double>(n_seeds), 1e-5);
    if (precision != "single" && precision != "double" && precision != "both")
        throw ArgumentError("gradcheck: precision must be single, double or both");
    return ok ? 0 : kExitDiverged;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"compenkit: full projector compensation against a synthetic "
                 "projector-camera simulator"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may appear after the verb

    std::string config_path;
    int seed_flag = -1;
    int threads_flag = -1;
    app.add_option("--config", config_path, "JSON run configuration (strict schema)");
    app.add_option("--seed", seed_flag, "Override the config seed");
    app.add_option("--threads", threads_flag,
                   "Worker threads (0 = all cores; env COMPENKIT_THREADS as fallback)");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    std::string gen_out;
    int gen_size = -1, gen_train = -1, gen_test = -1;
    double gen_noise = -1;
    gen->add_option("-o,--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--size", gen_size, "Image side length (default 128)");
    gen->add_option("--train", gen_train, "Training pair count (default 32)");
    gen->add_option("--test", gen_test, "Test pair count (default 8)");
    gen->add_option("--noise", gen_noise, "Camera noise sigma (default 0.005)");

    auto* tr = app.add_subcommand("train", "Train a compensation model");
    std::string tr_data, tr_out = "model.ckpt", tr_log;
    int tr_iters = -1;
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("-o,--out", tr_out, "Output checkpoint path (default model.ckpt)");
    tr->add_option("--log", tr_log, "Per-iteration CSV log path");
    tr->add_option("--iters", tr_iters, "Override iteration count");

    auto* comp = app.add_subcommand("compensate", "Compensate desired images");
    std::string comp_ckpt, comp_data, comp_out = ".";
    std::vector<std::string> comp_inputs;
    comp->add_option("--checkpoint", comp_ckpt, "Trained checkpoint")->required();
    comp->add_option("--data", comp_data, "Dataset directory (for the surface capture)")
        ->required();
    comp->add_option("-o,--out-dir", comp_out, "Output directory (default .)");
    comp->add_option("inputs", comp_inputs, "Input PNGs")->required();

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
    std::string ev_ckpt, ev_data, ev_report;
    ev->add_option("--checkpoint", ev_ckpt, "Trained checkpoint")->required();
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("-o,--report", ev_report, "Metrics CSV path");

    auto* ab = app.add_subcommand("ablate", "Train and compare model variants");
    std::string ab_data, ab_study = "arch", ab_out;
    std::vector<std::string> ab_variants;
    std::vector<unsigned> ab_seeds;
    ab->add_option("--data", ab_data, "Dataset directory")->required();
    ab->add_option("--study", ab_study,
                   "arch | attention | refine | loss | trainsize | custom (default arch)");
    ab->add_option("--variants", ab_variants, "Variant names for --study custom")
        ->delimiter(',');
    ab->add_option("--seeds", ab_seeds, "Training seeds (default: the config seed)");
    ab->add_option("-o,--out", ab_out, "Comparison table CSV path");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op");
    std::string gc_precision = "both";
    int gc_seeds = 3;
    gc->add_option("--precision", gc_precision, "single | double | both (default both)");
    gc->add_option("--seeds", gc_seeds, "Random seeds per op (default 3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        int threads = 0;
        if (threads_flag >= 0) {
            threads = threads_flag;
        } else if (const char* env = std::getenv("COMPENKIT_THREADS")) {
            threads = std::max(0, std::atoi(env));
        }
        set_num_threads(threads);

        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw IoError("cannot open config " + config_path);
            apply_json(cfg, nlohmann::json::parse(in));
        }
        if (seed_flag >= 0) cfg.seed = seed_flag;
        if (cfg.size < 32) throw ArgumentError("config: size must be >= 32");

        if (gen->parsed()) {
            if (gen_size > 0) cfg.size = gen_size;
            if (gen_train > 0) cfg.n_train = gen_train;
            if (gen_test > 0) cfg.n_test = gen_test;
            if (gen_noise >= 0) cfg.noise_sigma = gen_noise;
            if (cfg.size < 32) throw ArgumentError("gen: size must be >= 32");
            return cmd_gen(cfg, gen_out);
        }
        if (tr->parsed()) {
            if (tr_iters >= 0) cfg.iters = tr_iters;
            return cmd_train(cfg, tr_data, tr_out, tr_log);
        }
        if (comp->parsed()) return cmd_compensate(comp_ckpt, comp_data, comp_inputs, comp_out);
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_report);
        if (ab->parsed())
            return cmd_ablate(cfg, ab_data, ab_study, ab_variants, ab_seeds, ab_out);
        if (gc->parsed()) return cmd_gradcheck(gc_precision, gc_seeds);
        return kExitUsage;
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
