#include "vt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vt {

// ---- canonical phantom system ----------------------------------------------

PhantomSystem make_default_phantom(uint64_t seed) {
    GridInfo grid;
    grid.dims = {96, 96, 96};
    grid.spacing = {2, 2, 2};
    grid.origin = {0, 0, 0};

    const Vec3 junction{96, 96, 100};
    TubeSpec trunk;
    trunk.name = "trunk";
    trunk.centerline = make_polyline({{96, 96, 16}, junction});
    trunk.radius_knots = {{0, 12.0}};
    trunk.noise_sigma = 0.02;

    TubeSpec branch_a;
    branch_a.name = "branch_a";
    branch_a.centerline = make_polyline({junction, {150, 96, 154}});
    branch_a.radius_knots = {{0, 7.0}};
    branch_a.noise_sigma = 0.02;

    TubeSpec branch_b;
    branch_b.name = "branch_b";
    branch_b.centerline = make_polyline({junction, {42, 96, 154}});
    branch_b.radius_knots = {{0, 7.0}};
    branch_b.noise_sigma = 0.02;

    PhantomSystem sys;
    sys.volume = gen_bifurcation(trunk, branch_a, branch_b, grid, seed, &sys.truths);

    std::vector<MaskRegionSpec> regions;
    regions.push_back(BlobSpec{{96, 96, 20}, 14.0, "inlet"});
    regions.push_back(BlobSpec{{146, 96, 150}, 9.0, "outlet_a"});
    regions.push_back(BlobSpec{{46, 96, 150}, 9.0, "outlet_b"});
    // mid-branch markers used only for center-of-mass seeding
    regions.push_back(BlobSpec{{123, 96, 127}, 8.0, "mark_a"});
    regions.push_back(BlobSpec{{69, 96, 127}, 8.0, "mark_b"});
    regions.push_back(TubeMaskSpec{0, 1.2, "trunk_mask"});
    sys.masks = gen_controller_masks(sys.truths, regions, grid);

    sys.controller_config = R"({
  "vessels": [
    {
      "name": "trunk",
      "seed": {"type": "com", "label": "trunk_mask"},
      "omega": [
        {"type": "slab", "axis": "z", "threshold_mm": 26.0, "side": "below", "name": "inlet_slab"},
        {"type": "slab", "axis": "z", "threshold_mm": 88.0, "side": "above", "name": "junction_slab"}
      ],
      "delta_mm": 1.0,
      "eta": 5
    },
    {
      "name": "branch_a",
      "seed": {"type": "com", "label": "mark_a"},
      "omega": [
        {"type": "label", "label": "inlet"},
        {"type": "label", "label": "outlet_a"}
      ],
      "delta_mm": 0.5,
      "eta": 5
    },
    {
      "name": "branch_b",
      "seed": {"type": "com", "label": "mark_b"},
      "omega": [
        {"type": "label", "label": "inlet"},
        {"type": "label", "label": "outlet_b"}
      ],
      "delta_mm": 0.5,
      "eta": 5
    }
  ]
})";
    return sys;
}

// ---- training datasets ------------------------------------------------------

namespace {

Direction random_direction(Rng& rng) {
    Vec3 v;
    do {
        v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    } while (v.norm2() < 1e-3 || v.norm2() > 1.0);
    return v.normalized();
}

// straight tube through the center of its own cubic volume
struct TubePhantom {
    std::unique_ptr<ScalarVolume> vol;
    std::unique_ptr<PhantomTruth> truth;
    double radius = 0;
    double length = 0;
};

TubePhantom make_tube(double radius, const Direction& axis, int grid_dim, double noise_sigma,
                      uint64_t seed) {
    // spacing such that the tube is ~6 voxels across and its surroundings fit
    double spacing = radius / 3.0;
    double side = spacing * (grid_dim - 1);
    Vec3 center{side / 2, side / 2, side / 2};
    // longest centerline that keeps the tube (plus edge margin) inside the grid
    double half_len = side / 2 - radius - 2.0 * spacing;

    TubeSpec spec;
    spec.centerline = make_polyline({center - axis * half_len, center + axis * half_len});
    spec.radius_knots = {{0, radius}};
    spec.noise_sigma = noise_sigma;

    GridInfo grid;
    grid.dims = {grid_dim, grid_dim, grid_dim};
    grid.spacing = {spacing, spacing, spacing};
    grid.origin = {0, 0, 0};

    TubePhantom t;
    t.truth = std::make_unique<PhantomTruth>();
    t.vol = std::make_unique<ScalarVolume>(gen_tube_volume(spec, grid, seed, t.truth.get()));
    t.radius = radius;
    t.length = 2 * half_len;
    return t;
}

}  // namespace

OrientDataset make_orient_dataset(const OrientDatasetConfig& cfg) {
    if (cfg.n_tubes < 1) throw std::runtime_error("orientation dataset needs >= 1 tube");
    Rng rng = Rng(cfg.seed).fork("orient_dataset");
    OrientDataset ds;
    for (int t = 0; t < cfg.n_tubes; ++t) {
        double radius = std::exp(rng.uniform(std::log(cfg.r_lo), std::log(cfg.r_hi)));
        Direction axis = random_direction(rng);
        TubePhantom tube = make_tube(radius, axis, cfg.grid_dim, cfg.noise_sigma,
                                     rng.fork((uint64_t)t).next_u64());
        // sample the stretch of centerline that stays inside the volume
        double mid = tube.length / 2;
        double span = tube.radius * cfg.grid_dim / 6.0 * 0.5;  // well inside the cube
        for (int s = 0; s < cfg.samples_per_tube; ++s) {
            double arc = mid + rng.uniform(-span, span);
            OrientSample smp;
            smp.vol = tube.vol.get();
            smp.truth = tube.truth.get();
            smp.point = tube.truth->centerline.point(arc);
            smp.tangent = tube.truth->centerline.tangent(arc);
            smp.radius = radius;
            ds.samples.push_back(smp);
        }
        ds.volumes.push_back(std::move(tube.vol));
        ds.truths.push_back(std::move(tube.truth));
    }
    return ds;
}

namespace {

// boundary radius of a circle (radius r, center at in-plane offset -o from the
// polar origin) along direction angle phi; requires |o| < r
double circle_ray_radius(double r, const Vec3& o2 /* in-plane offset, (x,y) */, double phi) {
    double ux = std::cos(phi), uy = std::sin(phi);
    double b = o2.x * ux + o2.y * uy;
    double disc = b * b + r * r - (o2.x * o2.x + o2.y * o2.y);
    return -b + std::sqrt(std::max(0.0, disc));
}

}  // namespace

std::vector<ContourSample> make_contour_dataset(const ContourDatasetConfig& cfg) {
    if (cfg.n_tubes < 1) throw std::runtime_error("contour dataset needs >= 1 tube");
    Rng rng = Rng(cfg.seed).fork("contour_dataset");
    std::vector<ContourSample> out;

    int n_volume_tubes = (int)std::lround(cfg.n_tubes * (1.0 - cfg.ellipse_frac));
    for (int t = 0; t < cfg.n_tubes; ++t) {
        double radius = std::exp(rng.uniform(std::log(cfg.r_lo), std::log(cfg.r_hi)));
        bool synthetic = t >= n_volume_tubes;

        if (!synthetic) {
            Direction axis = random_direction(rng);
            TubePhantom tube = make_tube(radius, axis, cfg.grid_dim, cfg.noise_sigma,
                                         rng.fork((uint64_t)t).next_u64());
            double mid = tube.length / 2;
            double span = tube.radius * cfg.grid_dim / 6.0 * 0.4;
            for (int s = 0; s < cfg.samples_per_tube; ++s) {
                double arc = mid + rng.uniform(-span, span);
                WorldPoint c0 = tube.truth->centerline.point(arc);
                Direction n = tube.truth->centerline.tangent(arc);
                PlaneFrame frame = plane_basis(c0, n);
                // random in-plane gauge
                double alpha = rng.uniform(0, 2 * M_PI);
                Direction e1 =
                    (frame.e1 * std::cos(alpha) + frame.e2 * std::sin(alpha)).normalized();
                frame.e1 = e1;
                frame.e2 = frame.normal.cross(e1);

                double r_tilde = radius * rng.uniform(cfg.q_lo, cfg.q_hi);
                // center jitter, bounded so the polar origin stays in the lumen
                double jmax = std::min(cfg.jitter_frac * r_tilde, 0.8 * radius);
                double jr = rng.uniform(0, jmax), ja = rng.uniform(0, 2 * M_PI);
                Vec3 off = frame.e1 * (jr * std::cos(ja)) + frame.e2 * (jr * std::sin(ja));
                frame.center = c0 + off;

                PolarImage img =
                    extract_polar_image(*tube.vol, frame, r_tilde, cfg.n_r, cfg.n_phi);
                ContourSample cs;
                cs.pixels = img.pixels;
                cs.r_tilde = r_tilde;
                cs.radii.resize(cfg.n_phi);
                Vec3 o2{off.dot(frame.e1), off.dot(frame.e2), 0};
                for (int k = 0; k < cfg.n_phi; ++k)
                    cs.radii[k] = circle_ray_radius(radius, o2, 2 * M_PI * k / cfg.n_phi);
                out.push_back(std::move(cs));
            }
        } else {
            // analytic elliptic lumen rendered straight into polar pixels
            for (int s = 0; s < cfg.samples_per_tube; ++s) {
                double ratio = rng.uniform(1.0, cfg.ellipse_ratio_max);
                double a = radius * std::sqrt(ratio), b = radius / std::sqrt(ratio);
                double psi = rng.uniform(0, 2 * M_PI);
                double r_tilde = radius * rng.uniform(cfg.q_lo, cfg.q_hi);
                double jmax = std::min(cfg.jitter_frac * r_tilde, 0.8 * b);
                double jr = rng.uniform(0, jmax), ja = rng.uniform(0, 2 * M_PI);
                double ox = jr * std::cos(ja), oy = jr * std::sin(ja);
                double edge = 0.5;  // mm, matches the phantom default

                ContourSample cs;
                cs.r_tilde = r_tilde;
                cs.pixels = TensorF({cfg.n_r, cfg.n_phi});
                cs.radii.resize(cfg.n_phi);
                auto boundary = [&](double phi) {
                    // ellipse frame coordinates of the ray from the offset origin
                    double ux = std::cos(phi - psi), uy = std::sin(phi - psi);
                    double ex = ox * std::cos(psi) + oy * std::sin(psi);
                    double ey = -ox * std::sin(psi) + oy * std::cos(psi);
                    double A = ux * ux / (a * a) + uy * uy / (b * b);
                    double B = 2 * (ex * ux / (a * a) + ey * uy / (b * b));
                    double C = ex * ex / (a * a) + ey * ey / (b * b) - 1;
                    double disc = std::max(0.0, B * B - 4 * A * C);
                    return (-B + std::sqrt(disc)) / (2 * A);
                };
                for (int k = 0; k < cfg.n_phi; ++k) {
                    double phi = 2 * M_PI * k / cfg.n_phi;
                    double rb = boundary(phi);
                    cs.radii[k] = rb;
                    for (int i = 0; i < cfg.n_r; ++i) {
                        double rho = (i + 0.5) * r_tilde / cfg.n_r;
                        double v = 1.0 / (1.0 + std::exp(-(rb - rho) / edge));
                        cs.pixels.data[(size_t)i * cfg.n_phi + k] =
                            (float)(v + rng.normal() * cfg.noise_sigma);
                    }
                }
                out.push_back(std::move(cs));
            }
        }
    }
    return out;
}

// ---- truth-based evaluation -------------------------------------------------

namespace {

double radius_at_arclength(const PhantomTruth& t, double s) {
    if (t.samples.empty()) throw std::runtime_error("truth has no samples");
    if (t.samples.size() == 1) return t.samples[0].radius;
    auto it = std::lower_bound(t.samples.begin(), t.samples.end(), s,
                               [](const TruthSample& a, double v) { return a.arclength < v; });
    if (it == t.samples.begin()) return it->radius;
    if (it == t.samples.end()) return t.samples.back().radius;
    const TruthSample& hi = *it;
    const TruthSample& lo = *(it - 1);
    double w = (s - lo.arclength) / std::max(1e-9, hi.arclength - lo.arclength);
    return lo.radius + w * (hi.radius - lo.radius);
}

// signed "inside" function for one truth: distance to centerline minus radius
double tube_sdf(const PhantomTruth& t, const WorldPoint& p) {
    CurveClosest cc = t.centerline.closest(p);
    return cc.dist - radius_at_arclength(t, cc.arclength);
}

}  // namespace

double centerline_mean_error(const TrackedVessel& v, const std::vector<PhantomTruth>& truths) {
    if (v.centerline.empty() || truths.empty())
        throw std::runtime_error("centerline error needs a non-empty track and truths");
    double acc = 0;
    for (const auto& p : v.centerline) {
        double best = std::numeric_limits<double>::max();
        for (const auto& t : truths) best = std::min(best, t.distance_to_centerline(p));
        acc += best;
    }
    return acc / (double)v.centerline.size();
}

Contour truth_contour(const PhantomTruth& t, const PlaneFrame& frame, double rho_max,
                      int n_phi) {
    frame.validate();
    Contour c;
    c.frame = frame;
    c.r_tilde = rho_max;
    c.radii.resize(n_phi);
    for (int k = 0; k < n_phi; ++k) {
        double phi = 2 * M_PI * k / n_phi;
        Direction u = frame.e1 * std::cos(phi) + frame.e2 * std::sin(phi);
        auto f = [&](double rho) { return tube_sdf(t, frame.center + u * rho); };
        double lo = 0, hi = rho_max;
        if (f(lo) >= 0) { c.radii[k] = 1e-6; continue; }  // center outside the lumen
        if (f(hi) <= 0) { c.radii[k] = rho_max; continue; }
        for (int it = 0; it < 60; ++it) {
            double mid = (lo + hi) / 2;
            (f(mid) < 0 ? lo : hi) = mid;
        }
        c.radii[k] = (lo + hi) / 2;
    }
    return c;
}

std::vector<double> track_contour_dsc(const TrackedVessel& v,
                                      const std::vector<PhantomTruth>& truths) {
    if (truths.empty()) throw std::runtime_error("no truths for contour evaluation");
    std::vector<double> dsc;
    for (const auto& tc : v.contours) {
        const PhantomTruth* best = &truths[0];
        double bd = std::numeric_limits<double>::max();
        for (const auto& t : truths) {
            double d = t.distance_to_centerline(tc.contour.frame.center);
            if (d < bd) { bd = d; best = &t; }
        }
        Contour ref = truth_contour(*best, tc.contour.frame, 2.0 * tc.contour.r_tilde,
                                    (int)tc.contour.radii.size());
        dsc.push_back(contour_dsc(tc.contour, ref));
    }
    return dsc;
}

SurfaceErrorStats mesh_surface_error(const Mesh& m, const std::vector<PhantomTruth>& truths) {
    if (m.vertices.empty() || truths.empty())
        throw std::runtime_error("surface error needs a mesh and truths");
    SurfaceErrorStats st;
    for (const auto& p : m.vertices) {
        double sdf = std::numeric_limits<double>::max();
        for (const auto& t : truths) sdf = std::min(sdf, tube_sdf(t, p));
        double e = std::abs(sdf);
        st.mean += e;
        st.max = std::max(st.max, e);
    }
    st.mean /= (double)m.vertices.size();
    return st;
}

}  // namespace vt
