#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "vt/nn.hpp"
#include "vt/tracker.hpp"
#include "vt/vec3.hpp"

namespace vt {

// ---- triangle meshes -------------------------------------------------------

struct Mesh {
    std::vector<WorldPoint> vertices;
    std::vector<std::array<int, 3>> triangles;  // CCW seen from outside
};

double mesh_area(const Mesh& m);
double mesh_signed_volume(const Mesh& m);  // positive for outward orientation

struct WatertightReport {
    bool is_watertight = false;
    size_t boundary_edges = 0;      // undirected edges used by exactly 1 triangle
    size_t non_manifold_edges = 0;  // used by 3+ triangles, or twice same direction
    long euler = 0;                 // V - E + F
    int components = 0;             // vertex-connected components (via edges)
};

// Exact combinatorial audit: watertight iff every undirected edge is used by
// exactly two triangles in opposite directions.
WatertightReport mesh_watertight(const Mesh& m);
std::string watertight_report_to_json(const WatertightReport& r);

// ASCII OBJ, v/f records with 1-based indices.
void save_obj(const std::string& path, const Mesh& m);
Mesh load_obj(const std::string& path);

// ---- contour lofting (proxy surface for SDF supervision) ------------------

// Triangulated tube through the track's contour rings plus end caps.
// Consecutive rings are matched over cyclic index shifts (minimum total
// squared distance). Watertight by construction. A fold (consecutive ring
// centers moving against the ring normal) is reported via `folded`, not fixed.
Mesh loft_contours(const TrackedVessel& v, bool* folded = nullptr);

// Best cyclic shift s minimizing sum_k |a[k] - b[(k+s) % n]|^2. Exposed for
// testing against brute force.
int align_rings(const std::vector<WorldPoint>& a, const std::vector<WorldPoint>& b);

// ---- signed distance oracle ------------------------------------------------

// Signed distance to a watertight mesh: unsigned min point-triangle distance,
// sign from ray-crossing parity (axis ray, perturbed and recast on edge or
// vertex grazings). Ctor throws on a non-watertight mesh.
class MeshSdf {
  public:
    explicit MeshSdf(const Mesh& mesh);
    double operator()(const WorldPoint& p) const;

  private:
    Mesh mesh_;
};

// Convenience wrapper (validates the mesh on every call; use MeshSdf in loops).
double sdf_oracle(const Mesh& mesh, const WorldPoint& p);

// ---- neural signed-distance field ------------------------------------------

// Coordinate MLP 3 -> 64 -> 64 -> 64 -> 1: sine on the first layer, ReLU on
// the two middle layers, linear head. Inputs are normalized to a unit box
// (center/scale stored with the field); output is a distance in mm.
class NeuralField {
  public:
    NeuralField();
    explicit NeuralField(uint64_t seed, double omega0 = 12.0);

    void set_normalization(const Vec3& center, double scale);
    Vec3 norm_center() const { return center_; }
    double norm_scale() const { return scale_; }

    // Single-point evaluation; no state mutation, safe to call concurrently.
    double operator()(const WorldPoint& p) const;

    // Training-side batched pass; caches activations for backward_batch.
    std::vector<double> forward_batch(const std::vector<WorldPoint>& pts);
    // d(loss)/d(output) per point -> accumulated parameter gradients.
    void backward_batch(const std::vector<double>& dout);

    std::vector<ParamRef> params();
    void zero_grad();
    void save(const std::string& path) const;
    static NeuralField load(const std::string& path);

  private:
    static constexpr int H = 64;
    double omega0_ = 12.0;
    Vec3 center_{0, 0, 0};
    double scale_ = 1.0;
    std::vector<float> W1_, b1_, W2_, b2_, W3_, b3_, W4_, b4_;
    std::vector<float> gW1_, gb1_, gW2_, gb2_, gW3_, gb3_, gW4_, gb4_;
    // caches for backward (per batch point)
    std::vector<float> X_, Z1_, A1_, Z2_, A2_, Z3_, A3_;
    size_t batch_ = 0;

    float eval_normalized(const float x[3]) const;
};

struct FieldTrainConfig {
    double lr = 1e-4;
    int steps = 20000;
    int batch = 64;             // data points per step
    int eikonal_batch = 16;     // extra points for the |grad f| = 1 penalty
    double eikonal_weight = 0.1;
    double eikonal_h = 0.5;     // finite-difference half step, mm
    int oracle_samples = 8000;  // box samples labeled by the loft oracle
    double bbox_scale = 1.5;    // sampling box = bbox scaled about its center
    int holdout_stride = 0;     // withhold every n-th contour point (0 = none)
    uint64_t seed = 1;
};

struct FieldFitReport {
    double data_loss = 0;     // mean squared distance error, last 100 steps
    double eikonal_loss = 0;  // mean (|grad f| - 1)^2, last 100 steps
    double holdout_mean_abs_mm = 0;  // mean |f| over withheld contour points
    size_t holdout_points = 0;
    bool loft_folded = false;
};

// Fits the field to the track: contour points at distance 0 plus box samples
// labeled by the lofted-mesh oracle, with the finite-difference Eikonal
// penalty. Throws on loft failure or divergence (non-finite loss).
NeuralField fit_neural_field(const TrackedVessel& v, const FieldTrainConfig& cfg,
                             FieldFitReport* report = nullptr);

// ---- blending and extraction -----------------------------------------------

// Exponential smooth minimum -(1/k) * ln(sum_i e^{-k v_i}); the running
// minimum is subtracted before exponentiation so large magnitudes cannot
// overflow. min(v) - smooth_min(v) <= ln(n)/k.
double smooth_min(const std::vector<double>& vals, double k);

using SdfFn = std::function<double(const WorldPoint&)>;

// Combined evaluator: smooth minimum over all fields. k in 1/mm, > 0.
SdfFn blend_fields(std::vector<const NeuralField*> fields, double k = 2.0);

// Field evaluator restricted to the field's normalization box: outside it the
// extrapolating network is replaced by the (positive) distance to the box, so
// a blend of several fields cannot grow spurious far-field surface.
SdfFn clamp_to_domain(const NeuralField& field);

// Smooth minimum over arbitrary evaluators (same semantics as blend_fields).
SdfFn blend_sdfs(std::vector<SdfFn> fns, double k = 2.0);

// Grid sampling kernels (x-fastest layout). The OpenMP version must produce
// bitwise the same samples as the serial reference.
std::vector<double> sample_sdf_grid_serial(const SdfFn& sdf, const Vec3& bmin,
                                           const std::array<int, 3>& dims, double res);
std::vector<double> sample_sdf_grid(const SdfFn& sdf, const Vec3& bmin,
                                    const std::array<int, 3>& dims, double res);

// Standard 256-case marching cubes with linear edge interpolation and
// edge-keyed vertex welding; triangles are oriented with normals toward
// increasing sdf. Samples landing exactly on iso are nudged by +1e-6.
// Throws if no cell straddles the isovalue.
Mesh marching_cubes(const SdfFn& sdf, const Vec3& bmin, const Vec3& bmax, double resolution_mm,
                    double iso = 0.0);

}  // namespace vt
