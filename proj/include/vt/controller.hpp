#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vt/vec3.hpp"
#include "vt/volume.hpp"

namespace vt {

struct LabelRegion {
    const LabelVolume* masks = nullptr;
    uint16_t id = 0;
    std::string name;
};

struct SlabRegion {
    int axis = 2;
    double threshold = 0;  // mm
    int side = +1;         // +1: coordinate > threshold, -1: < threshold
    std::string name;
};

using TerminationRegion = std::variant<LabelRegion, SlabRegion>;

// Ordered list of stopping regions; list order is the match priority.
struct BoundaryConditions {
    std::vector<TerminationRegion> regions;

    // Name of the first matching region, nullopt in free space.
    std::optional<std::string> match(const WorldPoint& p) const;
};

struct SeedSpec {
    std::string vessel;
    WorldPoint point;
    std::string provenance;  // "center-of-mass:<label>" | "path-midpoint" | "manual"
};

// Intensity-unweighted centroid of the labeled voxel centers; snaps to the
// nearest labeled voxel when the centroid itself falls outside the mask.
SeedSpec center_of_mass(const LabelVolume& masks, const std::string& label);

struct ShortestPathResult {
    std::vector<WorldPoint> path;  // from label_a to label_b
    SeedSpec seed;                 // vertex nearest to half the accumulated cost
    double total_cost = 0;
};

// Dijkstra over the 26-connected voxel graph. Edge cost into voxel v:
// step_mm * (1 + exp(-(I(v) - mu)/sigma)) with (mu, sigma) the intensity
// statistics under both masks, so bright voxels are cheap.
ShortestPathResult shortest_path_seed(const ScalarVolume& vol, const LabelVolume& masks,
                                      const std::string& label_a, const std::string& label_b);

struct VesselPlan {
    SeedSpec seed;
    BoundaryConditions omega;
    double delta = 1.0;  // tracker step, mm
    int eta = 5;         // contour cadence, steps
};

// Resolves a controller config (JSON text, see README for the schema) against
// the mask volume into per-vessel seeds and boundary conditions.
std::map<std::string, VesselPlan> build_boundary_conditions(const std::string& config_json,
                                                            const LabelVolume& masks,
                                                            const ScalarVolume& vol);

std::string resolved_plan_to_json(const std::map<std::string, VesselPlan>& plans);

}  // namespace vt
