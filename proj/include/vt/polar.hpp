#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vt/nn.hpp"
#include "vt/vec3.hpp"
#include "vt/volume.hpp"

namespace vt {

// Right-handed orthonormal frame {e1, e2, normal} on the plane through center.
struct PlaneFrame {
    WorldPoint center;
    Direction normal;
    Direction e1, e2;
    void validate() const;
};

// In-plane gauge for a new normal. With a previous frame the gauge is
// transported (project prev.e1 off the new normal); otherwise an absolute rule
// based on the global axis least aligned with d.
PlaneFrame plane_basis(const WorldPoint& center, const Direction& d,
                       const std::optional<PlaneFrame>& prev = std::nullopt);

// Scale-adaptive polar resampling: pixel (i,k) sampled at
// center + rho_i*(cos(phi_k) e1 + sin(phi_k) e2),
// rho_i = (i+0.5)*r_tilde/N_r, phi_k = 2*pi*k/N_phi.
struct PolarImage {
    PlaneFrame frame;
    double r_tilde = 0;
    TensorF pixels;  // [N_r, N_phi]
    int n_r() const { return pixels.shape[0]; }
    int n_phi() const { return pixels.shape[1]; }
    double rho(int i) const { return (i + 0.5) * r_tilde / n_r(); }
    double phi(int k) const { return 2.0 * M_PI * k / n_phi(); }
};

PolarImage extract_polar_image(const ScalarVolume& vol, const PlaneFrame& frame, double r_tilde,
                               int n_r = 32, int n_phi = 64);

// Closed lumen contour: radius per angular bin, cyclic.
struct Contour {
    PlaneFrame frame;
    double r_tilde = 0;
    std::vector<double> radii;  // mm, size N_phi
    std::vector<WorldPoint> points() const;
};

// Reverses a contour's frame (normal -> -normal) keeping the same geometry.
Contour flip_contour(const Contour& c);

// Soft-argmax decoding: radii_k = sum_i p[i,k] * rho_i. Linear in the heatmap.
std::vector<double> heatmap_to_radii(const TensorF& heatmap, double r_tilde);

// The contour-regression CNN h: four circular 3x3 conv layers (1->16->16->16->1)
// with a column-wise softmax head producing a radial heatmap per angle.
class ContourNet {
  public:
    ContourNet() = default;
    explicit ContourNet(uint64_t seed);

    // normalized input -> heatmap [N_r, N_phi], each column sums to 1
    TensorF forward(const PolarImage& img);
    // d_heatmap -> parameter gradients (through softmax and convs)
    void backward(const TensorF& d_heatmap);

    std::vector<ParamRef> params();
    void zero_grad();
    void save(const std::string& path) const;
    static ContourNet load(const std::string& path);

  private:
    Conv2dCircular c1_, c2_, c3_, c4_;
    TensorF softmax_;  // cached output for backward
};

Contour predict_contour(ContourNet& net, const PolarImage& img);

// ---- training --------------------------------------------------------------

struct ContourSample {
    TensorF pixels;             // [N_r, N_phi]
    double r_tilde = 0;
    std::vector<double> radii;  // ground truth, mm
};

struct ContourTrainConfig {
    double lr = 0.001;
    int batch = 10;
    int steps = 1500;
    uint64_t seed = 1;
};

// Minimizes MSE(decoded radii, true radii) through the soft-argmax decoder.
std::vector<double> train_contour(ContourNet& net, const std::vector<ContourSample>& dataset,
                                  const ContourTrainConfig& cfg);

// ---- evaluation ------------------------------------------------------------

// Dice coefficient of the enclosed polygon areas, rasterized on a shared
// 0.05 mm grid. Contours must be coplanar.
double contour_dsc(const Contour& a, const Contour& b, double pitch = 0.05);

std::string contour_to_json(const Contour& c);

}  // namespace vt
