#pragma once

#include <array>
#include <vector>

#include "vt/vec3.hpp"

namespace vt {

// Subdivided icosahedron in the pole-aligned orientation (a vertex at +z and
// one at -z). Deterministic vertex ordering.
struct Icosphere {
    int level = 0;
    std::vector<Direction> vertices;           // unit norm
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::vector<int>> adjacency;   // sorted neighbor lists, symmetric
    double vertex_spacing = 0;                 // max nearest-neighbor angle, radians
};

Icosphere build_icosphere(int level);

// Index of the vertex closest to direction d.
int nearest_vertex(const Icosphere& sphere, const Direction& d);

}  // namespace vt
