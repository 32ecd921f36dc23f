#include "vt/orientation.hpp"

#include <algorithm>
#include <stdexcept>

namespace vt {

SphericalResponse aggregate_max(const std::vector<SphericalResponse>& responses) {
    if (responses.empty()) throw std::runtime_error("aggregate_max: no responses");
    size_t V = responses[0].size();
    for (const auto& r : responses)
        if (r.size() != V) throw std::runtime_error("aggregate_max: vertex count mismatch");
    SphericalResponse out = responses[0];
    for (size_t j = 1; j < responses.size(); ++j)
        for (size_t v = 0; v < V; ++v) out[v] = std::max(out[v], responses[j][v]);
    return out;
}

std::optional<OrientationPair> extract_directions(const SphericalResponse& f_max,
                                                  const Icosphere& sphere) {
    if (f_max.size() != sphere.vertices.size())
        throw std::runtime_error("extract_directions: field size mismatch");
    float lo = f_max[0], hi = f_max[0];
    for (float v : f_max) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi - lo <= 1e-6f) return std::nullopt;

    size_t i1 = 0;
    for (size_t v = 1; v < f_max.size(); ++v)
        if (f_max[v] > f_max[i1]) i1 = v;  // strict: ties keep the lowest index

    const Direction& d1 = sphere.vertices[i1];
    bool found = false;
    size_t i2 = 0;
    for (size_t v = 0; v < f_max.size(); ++v) {
        if (d1.dot(sphere.vertices[v]) > 1e-9) continue;  // < 90 degrees away
        if (!found || f_max[v] > f_max[i2]) { i2 = v; found = true; }
    }
    if (!found) return std::nullopt;  // unreachable on an icosphere (antipodal vertices exist)
    return OrientationPair{d1, sphere.vertices[i2]};
}

AdaptiveScale select_scale(const std::vector<SphericalResponse>& responses, const ScaleSet& R) {
    R.validate();
    if (responses.size() != R.radii.size())
        throw std::runtime_error("select_scale: responses/scales length mismatch");
    AdaptiveScale out;
    double wsum = 0, rsum = 0;
    for (size_t j = 0; j < responses.size(); ++j) {
        float m = *std::max_element(responses[j].begin(), responses[j].end());
        double w = std::max(0.0, (double)m);
        out.weights.push_back(w);
        wsum += w;
        rsum += w * R.radii[j];
    }
    if (wsum <= 0) {
        // fallback: median scale keeps the tracker alive one step
        size_t n = R.radii.size();
        out.r_tilde = n % 2 ? R.radii[n / 2] : 0.5 * (R.radii[n / 2 - 1] + R.radii[n / 2]);
    } else {
        out.r_tilde = rsum / wsum;
    }
    return out;
}

}  // namespace vt
