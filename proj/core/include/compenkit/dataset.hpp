#pragma once

#include <filesystem>
#include <vector>

#include "compenkit/sim.hpp"
#include "compenkit/tensor.hpp"

namespace compenkit {

/// In-memory dataset: the captured surface image plus (projector input,
/// camera capture) pairs for training and testing.
struct Dataset {
    DatasetManifest manifest;
    Tensor surface;
    std::vector<Tensor> train_prj, train_cam, test_prj, test_cam;

    static Dataset load(const std::filesystem::path& dir);
};

} // namespace compenkit
