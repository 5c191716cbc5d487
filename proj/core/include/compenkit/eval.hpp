#pragma once

#include <filesystem>
#include <string>

#include "compenkit/dataset.hpp"
#include "compenkit/metrics.hpp"
#include "compenkit/model.hpp"

namespace compenkit {

struct EvalResult {
    MetricsRecord compensated;
    MetricsRecord uncompensated;

    std::string summary() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Closed-loop evaluation on the test set. Each desired image is compensated,
/// rendered through the simulated projector-camera chain, warped back to the
/// frontal view with the true scene geometry, and compared against the
/// desired image. The uncompensated baseline projects the desired image
/// directly (the stored test captures) and is warped back the same way.
EvalResult evaluate(const CompensationModel& model, const Dataset& data,
                    const SceneSetup& scene);

} // namespace compenkit
