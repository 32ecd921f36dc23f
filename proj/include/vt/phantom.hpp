#pragma once

#include <string>
#include <variant>
#include <vector>

#include "vt/vec3.hpp"
#include "vt/volume.hpp"

namespace vt {

// ---- analytic centerline curves -------------------------------------------

struct Segment {
    Vec3 a, b;
};

// point(t) = center + radius*(cos(t)*u + sin(t)*v), t in [t0, t1]
struct Arc {
    Vec3 center;
    Vec3 u, v;  // orthonormal in-plane basis
    double radius = 0;
    double t0 = 0, t1 = 0;
};

struct CurveClosest {
    double dist = 0;       // distance to the curve, mm
    double arclength = 0;  // arclength of the closest point
};

// Piecewise segment/arc curve with exact arclength parameterization.
class Curve {
  public:
    void add(const Segment& s);
    void add(const Arc& a);

    double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
    bool empty() const { return pieces_.empty(); }
    Vec3 point(double s) const;
    Direction tangent(double s) const;
    CurveClosest closest(const Vec3& p) const;

  private:
    std::vector<std::variant<Segment, Arc>> pieces_;
    std::vector<double> cum_;  // cumulative length after each piece
};

// Polyline through `points`; interior corners optionally replaced by tangent
// fillet arcs of the given radius. Throws on repeated points.
Curve make_polyline(const std::vector<Vec3>& points, double fillet_radius = 0.0);

// ---- tube specification and ground truth ----------------------------------

struct TubeSpec {
    std::string name = "tube";
    Curve centerline;
    // radius as piecewise-linear function of arclength; (s, r) knots, clamped ends
    std::vector<std::pair<double, double>> radius_knots;
    double intensity_in = 1.0;
    double intensity_out = 0.0;
    double edge_smoothness = 0.5;  // mm, sigmoid transition width
    double noise_sigma = 0.0;

    double radius_at(double s) const;
    double max_radius() const;
    void validate() const;
};

struct TruthSample {
    double arclength = 0;
    WorldPoint center;
    Direction tangent, e1, e2;  // right-handed frame, tangent = e1 x e2 normal
    double radius = 0;
};

struct PhantomTruth {
    std::string name;
    std::vector<TruthSample> samples;  // fixed arclength spacing
    double sample_spacing = 1.0;
    Curve centerline;  // kept for analytic distance queries in evaluation

    double distance_to_centerline(const WorldPoint& p) const {
        return centerline.closest(p).dist;
    }
};

// Noise-free intensity of a single tube at p (sigmoid edge profile).
double tube_intensity(const TubeSpec& spec, const Vec3& p);
// Smooth union of several tubes sharing intensity_in/out of specs[0].
double tube_system_intensity(const std::vector<TubeSpec>& specs, const Vec3& p);

ScalarVolume gen_tube_volume(const TubeSpec& spec, const GridInfo& grid, uint64_t rng_seed,
                             PhantomTruth* truth = nullptr);

// Several tubes rendered into one volume via a smooth union; one truth per tube.
ScalarVolume gen_tube_system(const std::vector<TubeSpec>& specs, const GridInfo& grid,
                             uint64_t rng_seed, std::vector<PhantomTruth>* truths = nullptr);

// Bifurcation: both children must start on the parent centerline.
ScalarVolume gen_bifurcation(const TubeSpec& parent, const TubeSpec& child_a,
                             const TubeSpec& child_b, const GridInfo& grid, uint64_t rng_seed,
                             std::vector<PhantomTruth>* truths = nullptr);

// ---- controller mask surrogates -------------------------------------------

struct SlabSpec {
    int axis = 2;           // 0=x 1=y 2=z
    double threshold = 0;   // mm, world coordinate
    int side = +1;          // +1: coordinate > threshold, -1: coordinate < threshold
    std::string name;
};

struct BlobSpec {
    Vec3 center;
    double radius = 0;
    std::string name;
};

struct TubeMaskSpec {
    size_t truth_index = 0;   // into the truths list
    double dilation = 1.5;    // mask radius = dilation * local tube radius
    std::string name;
};

using MaskRegionSpec = std::variant<TubeMaskSpec, SlabSpec, BlobSpec>;

// Rasterize regions in priority order (first listed wins on overlap).
// Throws if any region ends up empty.
LabelVolume gen_controller_masks(const std::vector<PhantomTruth>& truths,
                                 const std::vector<MaskRegionSpec>& regions,
                                 const GridInfo& grid);

// ---- serialization --------------------------------------------------------

std::string truth_to_json(const PhantomTruth& t);
void save_truth(const PhantomTruth& t, const std::string& path);
// Round trip; the centerline is rebuilt as a polyline through the sample
// centers (exact for straight tubes, sub-sample-spacing error on arcs).
PhantomTruth truth_from_json(const std::string& text);
PhantomTruth load_truth(const std::string& path);

}  // namespace vt
