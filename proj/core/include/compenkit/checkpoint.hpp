#pragma once

#include <filesystem>

#include "compenkit/model.hpp"

namespace compenkit {

/// Versioned binary container: model config header plus named float tensors.
/// save/load round-trips are bit-exact.
void save_checkpoint(CompensationModel& model, const std::filesystem::path& path);
CompensationModel load_checkpoint(const std::filesystem::path& path);

} // namespace compenkit
