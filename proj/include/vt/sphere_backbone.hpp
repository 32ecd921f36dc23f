#pragma once

#include <vector>

#include "vt/icosphere.hpp"
#include "vt/nn.hpp"
#include "vt/phantom.hpp"
#include "vt/volume.hpp"

namespace vt {

// Per-icosphere-vertex radial intensity profile around a center point:
// samples[v][k] = volume at center + t_k * vertex_v, t_k = (k+1) * r / N_s.
struct SphericalFeature {
    WorldPoint center;
    double scale = 0;  // r, mm
    TensorF samples;   // [V, N_s]
};

// Per-vertex scalar field output of the backbone.
using SphericalResponse = std::vector<float>;

// Ordered radii r_1 < ... < r_m in mm.
struct ScaleSet {
    std::vector<double> radii;
    void validate() const;
};

// {5, 10, 15, ..., 80}
ScaleSet default_scale_set();

SphericalFeature project_features(const ScalarVolume& vol, const WorldPoint& x, double r,
                                  const Icosphere& sphere, int n_samples);

// The rotation-equivariant backbone g: per-vertex dense encoder followed by
// isotropic graph convolutions and a linear per-vertex head. One parameter set
// shared across all scales.
class GcnNet {
  public:
    GcnNet() = default;
    GcnNet(int n_samples, uint64_t seed);

    SphericalResponse forward(const SphericalFeature& feat, const Icosphere& sphere);
    // Backward for MSE-style losses: dLoss/dResponse per vertex. Accumulates
    // parameter gradients.
    void backward(const std::vector<float>& d_response);

    std::vector<ParamRef> params();
    void zero_grad();
    int n_samples() const { return n_samples_; }

    void save(const std::string& path) const;
    static GcnNet load(const std::string& path);

  private:
    int n_samples_ = 0;
    Dense enc1_, enc2_;
    GraphConv g1_, g2_, g3_;
    Dense head_;
};

// One response per scale; all scales share the same parameters.
std::vector<SphericalResponse> multi_scale_forward(GcnNet& net, const ScalarVolume& vol,
                                                   const WorldPoint& x, const ScaleSet& R,
                                                   const Icosphere& sphere);

// ---- training --------------------------------------------------------------

struct OrientSample {
    const ScalarVolume* vol = nullptr;
    const PhantomTruth* truth = nullptr;  // for off-axis recentering targets
    WorldPoint point;                     // on the centerline
    Direction tangent;
    double radius = 0;  // local tube radius, mm
};

struct OrientTrainConfig {
    double lr = 0.005;
    int batch = 20;
    int steps = 800;
    double target_exponent = 8;
    // supervised scale-to-radius ratio band; scales outside get a zero target
    double q_lo = 2.5;
    double q_hi = 16.0;
    // peak height falls off log-normally away from q_ref, so the
    // response-weighted scale average select_scale() lands near q_ref * radius
    double q_ref = 3.0;
    double height_sigma = 0.30;  // of ln(q / q_ref)
    double zero_target_prob = 0.2;
    // off-axis augmentation: sample points up to jitter_frac * radius off the
    // centerline with targets tilted back toward the axis (recenter_gain)
    double jitter_frac = 0.5;
    double recenter_gain = 0.6;
    uint64_t seed = 1;
};

// Target heatmap for tangent d at a (possibly off-axis) point.
std::vector<float> orientation_target(const Icosphere& sphere, const Direction& d1,
                                      const Direction& d2, double exponent);

// Trains theta_g in place; returns the per-step loss curve.
std::vector<double> train_orientation(GcnNet& net, const std::vector<OrientSample>& dataset,
                                      const ScaleSet& R, const Icosphere& sphere,
                                      const OrientTrainConfig& cfg);

}  // namespace vt
