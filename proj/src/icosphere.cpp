#include "vt/icosphere.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace vt {

Icosphere build_icosphere(int level) {
    if (level < 0) throw std::runtime_error("icosphere level must be >= 0");
    Icosphere s;
    s.level = level;

    // pole-aligned icosahedron: vertex 0 at +z, vertex 11 at -z,
    // upper ring at latitude atan(1/2), lower ring mirrored and offset 36 deg
    std::vector<Vec3> verts;
    verts.push_back({0, 0, 1});
    double lat = std::atan(0.5);
    for (int i = 0; i < 5; ++i) {
        double lon = 2 * M_PI * i / 5;
        verts.push_back({std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                         std::sin(lat)});
    }
    for (int i = 0; i < 5; ++i) {
        double lon = 2 * M_PI * i / 5 + M_PI / 5;
        verts.push_back({std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                         -std::sin(lat)});
    }
    verts.push_back({0, 0, -1});

    std::vector<std::array<int, 3>> tris;
    for (int i = 0; i < 5; ++i) {
        int a = 1 + i, b = 1 + (i + 1) % 5;
        int c = 6 + i, d = 6 + (i + 1) % 5;
        tris.push_back({0, a, b});
        tris.push_back({a, c, b});
        tris.push_back({b, c, d});
        tris.push_back({11, d, c});
    }

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = ((verts[a] + verts[b]) * 0.5).normalized();
            verts.push_back(m);
            int idx = (int)verts.size() - 1;
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (auto [a, b, c] : tris) {
            int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }

    s.vertices.reserve(verts.size());
    for (auto& v : verts) s.vertices.push_back(v.normalized());
    s.triangles = tris;

    std::vector<std::set<int>> adj(verts.size());
    for (auto [a, b, c] : tris) {
        adj[a].insert(b); adj[a].insert(c);
        adj[b].insert(a); adj[b].insert(c);
        adj[c].insert(a); adj[c].insert(b);
    }
    s.adjacency.resize(verts.size());
    double max_nn = 0;
    for (size_t v = 0; v < verts.size(); ++v) {
        s.adjacency[v].assign(adj[v].begin(), adj[v].end());
        double nn = M_PI;
        for (int u : s.adjacency[v]) nn = std::min(nn, angle_between(s.vertices[v], s.vertices[u]));
        max_nn = std::max(max_nn, nn);
    }
    s.vertex_spacing = max_nn;
    return s;
}

int nearest_vertex(const Icosphere& sphere, const Direction& d) {
    int best = 0;
    double best_dot = -2;
    for (size_t i = 0; i < sphere.vertices.size(); ++i) {
        double c = sphere.vertices[i].dot(d);
        if (c > best_dot) { best_dot = c; best = (int)i; }
    }
    return best;
}

}  // namespace vt
