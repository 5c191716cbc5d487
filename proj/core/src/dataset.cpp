#include "compenkit/dataset.hpp"

#include "compenkit/errors.hpp"
#include "compenkit/image.hpp"

namespace compenkit {

Dataset Dataset::load(const std::filesystem::path& dir) {
    Dataset d;
    d.manifest = read_manifest(dir / "manifest.json");
    d.surface = read_png(dir / d.manifest.surface_file);
    for (const auto& f : d.manifest.train_prj) d.train_prj.push_back(read_png(dir / f));
    for (const auto& f : d.manifest.train_cam) d.train_cam.push_back(read_png(dir / f));
    for (const auto& f : d.manifest.test_prj) d.test_prj.push_back(read_png(dir / f));
    for (const auto& f : d.manifest.test_cam) d.test_cam.push_back(read_png(dir / f));
    if (d.train_prj.size() != d.train_cam.size() || d.test_prj.size() != d.test_cam.size())
        throw IoError("Dataset::load: manifest pair lists are inconsistent");
    return d;
}

} // namespace compenkit
