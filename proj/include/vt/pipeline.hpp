#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vt/phantom.hpp"
#include "vt/polar.hpp"
#include "vt/sphere_backbone.hpp"
#include "vt/surface.hpp"
#include "vt/tracker.hpp"

namespace vt {

// ---- canonical phantom system ----------------------------------------------

// Symmetric Y bifurcation (one trunk, two branches) with controller masks and
// a matching controller config; the standard end-to-end target.
struct PhantomSystem {
    ScalarVolume volume;
    LabelVolume masks;
    std::vector<PhantomTruth> truths;   // trunk, branch_a, branch_b
    std::string controller_config;      // JSON, see README
};

PhantomSystem make_default_phantom(uint64_t seed);

// ---- training datasets ------------------------------------------------------

// Straight tubes at random orientations, each in its own volume, with
// on-centerline sample points.
struct OrientDatasetConfig {
    int n_tubes = 24;
    double r_lo = 3, r_hi = 20;  // tube radius range, mm
    int samples_per_tube = 6;
    double noise_sigma = 0.02;
    int grid_dim = 48;  // cubic volume, spacing scaled so the tube is ~6 voxels
    uint64_t seed = 1;
};

struct OrientDataset {
    // owns the sample volumes/truths referenced by `samples`
    std::vector<std::unique_ptr<ScalarVolume>> volumes;
    std::vector<std::unique_ptr<PhantomTruth>> truths;
    std::vector<OrientSample> samples;
};

OrientDataset make_orient_dataset(const OrientDatasetConfig& cfg);

// Labeled polar images: cross-sections extracted from straight-tube volumes
// (random gauge rotation, center jitter) mixed with analytic elliptic-lumen
// images. r_tilde / radius is drawn from [q_lo, q_hi].
struct ContourDatasetConfig {
    int n_tubes = 48;
    double r_lo = 3, r_hi = 20;
    int samples_per_tube = 8;
    double jitter_frac = 0.2;       // center offset <= jitter_frac * r_tilde
    double q_lo = 1.8, q_hi = 8.5;  // r_tilde as a multiple of the radius
    double ellipse_frac = 0.3;      // fraction of synthetic elliptic samples
    double ellipse_ratio_max = 1.6; // max semi-axis ratio
    double noise_sigma = 0.02;
    int n_r = 32, n_phi = 64;
    int grid_dim = 48;
    uint64_t seed = 1;
};

std::vector<ContourSample> make_contour_dataset(const ContourDatasetConfig& cfg);

// ---- truth-based evaluation -------------------------------------------------

// Mean distance from tracked centerline points to the nearest truth centerline.
double centerline_mean_error(const TrackedVessel& v, const std::vector<PhantomTruth>& truths);

// Reference lumen contour in the given plane, found per angular bin by
// bisection on (distance to centerline - local radius). Bins where the ray
// never leaves the lumen within rho_max get rho_max.
Contour truth_contour(const PhantomTruth& t, const PlaneFrame& frame, double rho_max,
                      int n_phi = 64);

// DSC of each tracked contour against the truth contour in the same plane
// (truth chosen as the nearest centerline).
std::vector<double> track_contour_dsc(const TrackedVessel& v,
                                      const std::vector<PhantomTruth>& truths);

struct SurfaceErrorStats {
    double mean = 0;
    double max = 0;
};

// Per-vertex |smallest (distance-to-centerline - radius) over all truths|:
// distance from the mesh to the analytic union surface.
SurfaceErrorStats mesh_surface_error(const Mesh& m, const std::vector<PhantomTruth>& truths);

}  // namespace vt
