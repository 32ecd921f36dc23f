#pragma once

#include <optional>
#include <vector>

#include "vt/icosphere.hpp"
#include "vt/sphere_backbone.hpp"

namespace vt {

struct OrientationPair {
    Direction d1, d2;  // at least 90 degrees apart
};

struct AdaptiveScale {
    double r_tilde = 0;           // mm, in [min(R), max(R)]
    std::vector<double> weights;  // clamped per-scale maxima
};

// Per-vertex maximum over scales; permutation invariant.
SphericalResponse aggregate_max(const std::vector<SphericalResponse>& responses);

// d1 = argmax vertex; d2 = argmax over vertices at >= 90 deg from d1.
// Ties break to the lowest vertex index. Returns nullopt ("no orientation")
// for a constant field (max - min <= 1e-6).
std::optional<OrientationPair> extract_directions(const SphericalResponse& f_max,
                                                  const Icosphere& sphere);

// r_tilde = sum(w_j * r_j) / sum(w_j), w_j = max(0, per-scale maximum).
// Falls back to median(R) when all weights vanish.
AdaptiveScale select_scale(const std::vector<SphericalResponse>& responses, const ScaleSet& R);

}  // namespace vt
