#pragma once

#include <filesystem>

#include "compenkit/tensor.hpp"

namespace compenkit {

/// Reads an 8-bit RGB PNG into a (1,3,H,W) float tensor; values are v/255.
Tensor read_png(const std::filesystem::path& path);

/// Writes a (1,3,H,W) or (3,H,W) [0,1] tensor as an 8-bit RGB PNG
/// (round-to-nearest). Deterministic bytes for identical inputs.
void write_png(const std::filesystem::path& path, const Tensor& image);

} // namespace compenkit
