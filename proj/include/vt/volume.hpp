#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "vt/vec3.hpp"

namespace vt {

// Axis-aligned 3D grid in physical space. Voxel center (i,j,k) sits at
// origin + (i*sx, j*sy, k*sz). Data is x-fastest.
struct GridInfo {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};  // mm, strictly positive
    Vec3 origin{0, 0, 0};   // mm

    size_t voxel_count() const { return (size_t)dims[0] * dims[1] * dims[2]; }
    size_t index(int i, int j, int k) const {
        return (size_t)i + (size_t)dims[0] * ((size_t)j + (size_t)dims[1] * k);
    }
    Vec3 world_to_voxel(const WorldPoint& p) const {
        return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y,
                (p.z - origin.z) / spacing.z};
    }
    WorldPoint voxel_to_world(double i, double j, double k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
    }
    bool contains_world(const WorldPoint& p) const {
        Vec3 v = world_to_voxel(p);
        return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x <= dims[0] - 1 && v.y <= dims[1] - 1 &&
               v.z <= dims[2] - 1;
    }
    void validate() const;
};

struct ScalarVolume {
    GridInfo grid;
    std::vector<float> data;
    float fill_value = 0.0f;  // returned for out-of-bounds samples

    float& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    float at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
    void validate() const;
};

struct LabelVolume {
    GridInfo grid;
    std::vector<uint16_t> data;
    std::map<std::string, uint16_t> labels;  // name -> id

    uint16_t& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    uint16_t at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
    uint16_t id_of(const std::string& name) const;
    // Label id at the voxel nearest to p; 0 outside the grid.
    uint16_t label_at_world(const WorldPoint& p) const;
    void validate() const;
};

// Trilinear interpolation; out-of-bounds regions use vol.fill_value. Total function.
float sample_trilinear(const ScalarVolume& vol, const WorldPoint& p);

ScalarVolume make_scalar_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin,
                                float init = 0.0f);
LabelVolume make_label_volume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin);

// File format: JSON text header (dims, spacing_mm, origin_mm, dtype, payload path,
// optional labels) plus a sibling raw little-endian payload, x-fastest.
using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

void save_volume(const ScalarVolume& vol, const std::string& header_path);
void save_volume(const LabelVolume& vol, const std::string& header_path);
AnyVolume load_volume(const std::string& header_path);
ScalarVolume load_scalar_volume(const std::string& header_path);
LabelVolume load_label_volume(const std::string& header_path);

}  // namespace vt
