#include "compenkit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "compenkit/errors.hpp"

namespace compenkit {

namespace {

constexpr char kMagic[8] = {'C', 'K', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"k", c.k},           {"tps_points", c.tps_points}, {"use_refine", c.use_refine},
            {"use_r1", c.use_r1}, {"use_r2", c.use_r2},         {"use_p1", c.use_p1},
            {"use_p2", c.use_p2}, {"scaled_init", c.scaled_init}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.k = j.at("k").get<int>();
    c.tps_points = j.at("tps_points").get<int>();
    c.use_refine = j.at("use_refine").get<bool>();
    c.use_r1 = j.at("use_r1").get<bool>();
    c.use_r2 = j.at("use_r2").get<bool>();
    c.use_p1 = j.at("use_p1").get<bool>();
    c.use_p2 = j.at("use_p2").get<bool>();
    c.scaled_init = j.at("scaled_init").get<bool>();
    return c;
}

} // namespace

void save_checkpoint(CompensationModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::string cfg = config_to_json(model.cfg).dump();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    auto params = model.params();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (auto& p : params) {
        write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(p.tensor.ndim()));
        for (auto d : p.tensor.shape()) write_pod<std::int64_t>(out, d);
        out.write(reinterpret_cast<const char*>(p.tensor.data().data()),
                  static_cast<std::streamsize>(p.tensor.numel() * sizeof(float)));
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

CompensationModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("load_checkpoint: not a compenkit checkpoint: " + path.string());
    const auto cfg_len = read_pod<std::uint32_t>(in);
    std::string cfg_str(cfg_len, '\0');
    in.read(cfg_str.data(), cfg_len);
    auto model = CompensationModel::make(config_from_json(nlohmann::json::parse(cfg_str)));

    std::map<std::string, Tensor> by_name;
    for (auto& p : model.params()) by_name.emplace(p.name, p.tensor);

    const auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto ndim = read_pod<std::uint8_t>(in);
        Shape shape(ndim);
        for (auto& d : shape) d = read_pod<std::int64_t>(in);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw IoError("load_checkpoint: unknown parameter '" + name + "'");
        if (it->second.shape() != shape)
            throw IoError("load_checkpoint: shape mismatch for '" + name + "'");
        in.read(reinterpret_cast<char*>(it->second.data().data()),
                static_cast<std::streamsize>(it->second.numel() * sizeof(float)));
    }
    if (!in) throw IoError("load_checkpoint: truncated file " + path.string());
    return model;
}

} // namespace compenkit
