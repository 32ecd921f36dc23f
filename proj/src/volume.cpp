#include "vt/volume.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vt {

void GridInfo::validate() const {
    for (int d : dims)
        if (d <= 0) throw std::runtime_error("volume dims must be positive");
    if (spacing.x <= 0 || spacing.y <= 0 || spacing.z <= 0)
        throw std::runtime_error("volume spacing must be strictly positive");
}

void ScalarVolume::validate() const {
    grid.validate();
    if (data.size() != grid.voxel_count())
        throw std::runtime_error("scalar volume payload size does not match dims");
    for (float v : data)
        if (!std::isfinite(v)) throw std::runtime_error("scalar volume contains non-finite values");
}

void LabelVolume::validate() const {
    grid.validate();
    if (data.size() != grid.voxel_count())
        throw std::runtime_error("label volume payload size does not match dims");
    std::set<uint16_t> known;
    known.insert(0);  // background is implicit
    for (auto& [name, id] : labels) known.insert(id);
    for (uint16_t v : data)
        if (!known.count(v))
            throw std::runtime_error("label id " + std::to_string(v) + " absent from label table");
}

uint16_t LabelVolume::id_of(const std::string& name) const {
    auto it = labels.find(name);
    if (it == labels.end()) throw std::runtime_error("unknown label name: " + name);
    return it->second;
}

uint16_t LabelVolume::label_at_world(const WorldPoint& p) const {
    Vec3 v = grid.world_to_voxel(p);
    int i = (int)std::lround(v.x), j = (int)std::lround(v.y), k = (int)std::lround(v.z);
    if (i < 0 || j < 0 || k < 0 || i >= grid.dims[0] || j >= grid.dims[1] || k >= grid.dims[2])
        return 0;
    return at(i, j, k);
}

float sample_trilinear(const ScalarVolume& vol, const WorldPoint& p) {
    const auto& g = vol.grid;
    Vec3 v = g.world_to_voxel(p);
    // Clamp-free: any corner outside the grid contributes the fill value.
    double fx = std::floor(v.x), fy = std::floor(v.y), fz = std::floor(v.z);
    int i0 = (int)fx, j0 = (int)fy, k0 = (int)fz;
    double tx = v.x - fx, ty = v.y - fy, tz = v.z - fz;
    auto fetch = [&](int i, int j, int k) -> double {
        if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2])
            return vol.fill_value;
        return vol.at(i, j, k);
    };
    double c00 = fetch(i0, j0, k0) * (1 - tx) + fetch(i0 + 1, j0, k0) * tx;
    double c10 = fetch(i0, j0 + 1, k0) * (1 - tx) + fetch(i0 + 1, j0 + 1, k0) * tx;
    double c01 = fetch(i0, j0, k0 + 1) * (1 - tx) + fetch(i0 + 1, j0, k0 + 1) * tx;
    double c11 = fetch(i0, j0 + 1, k0 + 1) * (1 - tx) + fetch(i0 + 1, j0 + 1, k0 + 1) * tx;
    double c0 = c00 * (1 - ty) + c10 * ty;
    double c1 = c01 * (1 - ty) + c11 * ty;
    return (float)(c0 * (1 - tz) + c1 * tz);
}

ScalarVolume make_scalar_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, float init) {
    ScalarVolume v;
    v.grid = {dims, spacing, origin};
    v.grid.validate();
    v.data.assign(v.grid.voxel_count(), init);
    return v;
}

LabelVolume make_label_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin) {
    LabelVolume v;
    v.grid = {dims, spacing, origin};
    v.grid.validate();
    v.data.assign(v.grid.voxel_count(), 0);
    return v;
}

namespace {

json grid_to_json(const GridInfo& g) {
    return json{{"dims", g.dims},
                {"spacing_mm", {g.spacing.x, g.spacing.y, g.spacing.z}},
                {"origin_mm", {g.origin.x, g.origin.y, g.origin.z}}};
}

GridInfo grid_from_json(const json& j) {
    GridInfo g;
    auto d = j.at("dims");
    g.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    auto s = j.at("spacing_mm");
    g.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    auto o = j.at("origin_mm");
    g.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    g.validate();
    return g;
}

std::string payload_name(const std::string& header_path) {
    fs::path p(header_path);
    return p.stem().string() + ".raw";
}

void write_payload(const std::string& header_path, const void* bytes, size_t n) {
    fs::path raw = fs::path(header_path).parent_path() / payload_name(header_path);
    std::ofstream f(raw, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write payload: " + raw.string());
    f.write((const char*)bytes, (std::streamsize)n);
}

std::vector<char> read_payload(const std::string& header_path, const std::string& rel) {
    fs::path raw = fs::path(header_path).parent_path() / rel;
    std::ifstream f(raw, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot read payload: " + raw.string());
    std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<char> buf((size_t)n);
    f.read(buf.data(), n);
    return buf;
}

void write_header(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write header: " + path);
    f << j.dump(2) << "\n";
}

json read_header(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open volume header: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed volume header " + path + ": " + e.what());
    }
    return j;
}

}  // namespace

void save_volume(const ScalarVolume& vol, const std::string& header_path) {
    vol.validate();
    json j = grid_to_json(vol.grid);
    j["dtype"] = "f32";
    j["payload"] = payload_name(header_path);
    write_header(header_path, j);
    write_payload(header_path, vol.data.data(), vol.data.size() * sizeof(float));
}

void save_volume(const LabelVolume& vol, const std::string& header_path) {
    vol.validate();
    json j = grid_to_json(vol.grid);
    j["dtype"] = "u16";
    j["payload"] = payload_name(header_path);
    j["labels"] = vol.labels;
    write_header(header_path, j);
    write_payload(header_path, vol.data.data(), vol.data.size() * sizeof(uint16_t));
}

AnyVolume load_volume(const std::string& header_path) {
    json j = read_header(header_path);
    GridInfo g = grid_from_json(j);
    std::string dtype = j.at("dtype").get<std::string>();
    auto bytes = read_payload(header_path, j.at("payload").get<std::string>());
    if (dtype == "f32") {
        ScalarVolume v;
        v.grid = g;
        if (bytes.size() != g.voxel_count() * sizeof(float))
            throw std::runtime_error("payload size mismatch in " + header_path);
        v.data.resize(g.voxel_count());
        std::memcpy(v.data.data(), bytes.data(), bytes.size());
        v.validate();
        return v;
    }
    if (dtype == "u16") {
        LabelVolume v;
        v.grid = g;
        if (bytes.size() != g.voxel_count() * sizeof(uint16_t))
            throw std::runtime_error("payload size mismatch in " + header_path);
        v.data.resize(g.voxel_count());
        std::memcpy(v.data.data(), bytes.data(), bytes.size());
        if (j.contains("labels")) v.labels = j.at("labels").get<std::map<std::string, uint16_t>>();
        v.validate();
        return v;
    }
    throw std::runtime_error("unknown dtype '" + dtype + "' in " + header_path);
}

ScalarVolume load_scalar_volume(const std::string& header_path) {
    auto v = load_volume(header_path);
    if (!std::holds_alternative<ScalarVolume>(v))
        throw std::runtime_error(header_path + " is not a scalar volume");
    return std::get<ScalarVolume>(std::move(v));
}

LabelVolume load_label_volume(const std::string& header_path) {
    auto v = load_volume(header_path);
    if (!std::holds_alternative<LabelVolume>(v))
        throw std::runtime_error(header_path + " is not a label volume");
    return std::get<LabelVolume>(std::move(v));
}

}  // namespace vt
