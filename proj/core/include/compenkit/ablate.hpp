#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "compenkit/eval.hpp"
#include "compenkit/train.hpp"

namespace compenkit {

/// One trained-and-evaluated configuration.
struct AblationRow {
    std::string variant;
    unsigned seed = 0;
    int n_train = 0;
    double psnr = 0, rmse = 0, ssim = 0, delta_e = 0; // compensated means
    double seconds = 0;                                // train + eval wall time
};

struct AblationTable {
    std::vector<std::string> extra_header; // optional leading comment lines
    std::vector<AblationRow> rows;

    void write_csv(const std::filesystem::path& path) const;
    std::string formatted() const;
    /// Median compensated PSNR over all rows with this variant name.
    double median_psnr(const std::string& variant) const;
};

/// Architecture variant names: full, no_p1, no_p2, no_p1p2, no_r1r2,
/// coarse_only. Throws ArgumentError on anything else.
ModelConfig variant_config(const std::string& name);
const std::vector<std::string>& attention_variants();   // Table-5 style, 4 rows
const std::vector<std::string>& refinement_variants();  // Table-4 style
const std::vector<std::string>& all_variants();

/// Trains a fresh model for the variant and evaluates it on the test set.
AblationRow run_variant(const std::string& variant, const Dataset& data,
                        const SceneSetup& scene, const TrainConfig& cfg);

/// One row per (variant, seed); identical data across variants.
AblationTable ablate_architecture(const Dataset& data, const SceneSetup& scene,
                                  const TrainConfig& cfg,
                                  const std::vector<std::string>& variants,
                                  const std::vector<unsigned>& seeds);

/// The 7 non-empty loss-term combinations on the full model.
AblationTable ablate_loss(const Dataset& data, const SceneSetup& scene,
                          const TrainConfig& cfg);

/// Full model trained on growing prefixes of the training set.
AblationTable ablate_train_size(const Dataset& data, const SceneSetup& scene,
                                const TrainConfig& cfg, const std::vector<int>& sizes);

} // namespace compenkit
