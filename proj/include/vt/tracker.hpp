#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vt/controller.hpp"
#include "vt/orientation.hpp"
#include "vt/polar.hpp"
#include "vt/sphere_backbone.hpp"

namespace vt {

struct TrackConfig {
    double delta = 1.0;     // step size, mm
    int eta = 5;            // contour interval, steps
    int max_steps = 2000;
    double angle_gate = 60; // max turn per step, degrees; <= 0 disables the gate
    int n_r = 32;
    int n_phi = 64;
    bool recenter = false;  // recenter onto the contour centroid, once per contour
};

struct TrackedContour {
    Contour contour;
    int centerline_index = 0;
};

struct TrackedVessel {
    std::string name;
    std::vector<WorldPoint> centerline;
    std::vector<TrackedContour> contours;  // indices monotone along the centerline
    std::string reason_forward, reason_backward;  // one termination reason per leg
};

// "omega" | "volume exit" | "no orientation" | "kink" | "max steps"; omega hits
// also carry the region name as "omega:<name>".
std::optional<std::string> check_termination(const WorldPoint& p, const BoundaryConditions& omega);

TrackedVessel track_vessel(const ScalarVolume& vol, GcnNet& backbone, ContourNet& contour_net,
                           const Icosphere& sphere, const ScaleSet& R, const WorldPoint& seed,
                           const BoundaryConditions& omega, const TrackConfig& cfg,
                           const std::string& name = "vessel");

std::string tracked_vessel_to_json(const TrackedVessel& v);
TrackedVessel tracked_vessel_from_json(const std::string& text);

}  // namespace vt
