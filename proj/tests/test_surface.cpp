#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vt/surface.hpp"

using namespace vt;

namespace {

Mesh make_cube(double half) {
    // axis-aligned cube centered at the origin, CCW from outside
    Mesh m;
    double h = half;
    m.vertices = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                  {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
    m.triangles = {{0, 2, 1}, {0, 3, 2},   // bottom (z = -h)
                   {4, 5, 6}, {4, 6, 7},   // top
                   {0, 1, 5}, {0, 5, 4},   // front (y = -h)
                   {2, 3, 7}, {2, 7, 6},   // back
                   {1, 2, 6}, {1, 6, 5},   // right (x = +h)
                   {3, 0, 4}, {3, 4, 7}};  // left
    return m;
}

// circular-contour tube along +z used for loft and field-fit tests
TrackedVessel make_ring_track(int n_rings, int n_phi, double radius, double spacing) {
    TrackedVessel v;
    v.name = "ring_track";
    for (int i = 0; i < n_rings; ++i) {
        WorldPoint c{0, 0, i * spacing};
        v.centerline.push_back(c);
        TrackedContour tc;
        tc.centerline_index = i;
        tc.contour.frame = plane_basis(c, {0, 0, 1});
        tc.contour.r_tilde = 4 * radius;
        tc.contour.radii.assign(n_phi, radius);
        v.contours.push_back(tc);
    }
    return v;
}

}  // namespace

TEST_CASE("mesh area and signed volume on the unit-ish cube") {
    Mesh m = make_cube(2.0);
    CHECK(mesh_area(m) == doctest::Approx(6 * 16.0));
    CHECK(mesh_signed_volume(m) == doctest::Approx(64.0));

    // flipping all triangles negates the signed volume
    Mesh flipped = m;
    for (auto& t : flipped.triangles) std::swap(t[1], t[2]);
    CHECK(mesh_signed_volume(flipped) == doctest::Approx(-64.0));
}

TEST_CASE("watertight audit: intact, holed, and non-manifold meshes") {
    Mesh m = make_cube(1.0);
    WatertightReport r = mesh_watertight(m);
    CHECK(r.is_watertight);
    CHECK(r.boundary_edges == 0);
    CHECK(r.non_manifold_edges == 0);
    CHECK(r.euler == 2);
    CHECK(r.components == 1);

    // removing one triangle opens exactly 3 boundary edges
    Mesh holed = m;
    holed.triangles.pop_back();
    WatertightReport rh = mesh_watertight(holed);
    CHECK_FALSE(rh.is_watertight);
    CHECK(rh.boundary_edges == 3);

    // duplicating a triangle makes its edges non-manifold
    Mesh dup = m;
    dup.triangles.push_back(dup.triangles[0]);
    WatertightReport rd = mesh_watertight(dup);
    CHECK_FALSE(rd.is_watertight);
    CHECK(rd.non_manifold_edges >= 3);

    // two disjoint cubes: one watertight surface per component
    Mesh two = m;
    Mesh other = make_cube(1.0);
    int base = (int)two.vertices.size();
    for (auto& v : other.vertices) two.vertices.push_back(v + Vec3{5, 0, 0});
    for (auto& t : other.triangles) two.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    WatertightReport r2 = mesh_watertight(two);
    CHECK(r2.is_watertight);
    CHECK(r2.components == 2);
    CHECK(r2.euler == 4);

    std::string js = watertight_report_to_json(r2);
    CHECK(js.find("\"components\": 2") != std::string::npos);
}

TEST_CASE("OBJ save/load round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "vt_test_surface";
    fs::create_directories(dir);
    std::string path = (dir / "cube.obj").string();

    Mesh m = make_cube(1.5);
    save_obj(path, m);
    Mesh back = load_obj(path);
    REQUIRE(back.vertices.size() == m.vertices.size());
    REQUIRE(back.triangles.size() == m.triangles.size());
    for (size_t i = 0; i < m.vertices.size(); ++i)
        CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
    CHECK(back.triangles == m.triangles);
    CHECK_THROWS_AS(load_obj((dir / "missing.obj").string()), std::exception);
}

TEST_CASE("align_rings recovers a known cyclic shift") {
    const int n = 16;
    std::vector<WorldPoint> a;
    for (int k = 0; k < n; ++k) {
        double phi = 2 * M_PI * k / n;
        a.push_back({3 * std::cos(phi) + 0.2 * std::cos(3 * phi), 3 * std::sin(phi), 0});
    }
    for (int shift : {0, 3, 9}) {
        std::vector<WorldPoint> b(n);
        for (int k = 0; k < n; ++k) b[(k + shift) % n] = a[k] + Vec3{0, 0, 1};
        int s = align_rings(a, b);
        // brute-force reference
        double best = 1e300;
        int want = -1;
        for (int cand = 0; cand < n; ++cand) {
            double cost = 0;
            for (int k = 0; k < n; ++k) cost += (a[k] - b[(k + cand) % n]).norm2();
            if (cost < best) { best = cost; want = cand; }
        }
        CHECK(s == want);
        CHECK(s == shift);
    }
}

TEST_CASE("loft produces a watertight tube with the expected element counts") {
    const int R = 6, N = 24;
    TrackedVessel v = make_ring_track(R, N, 3.0, 2.0);
    bool folded = true;
    Mesh m = loft_contours(v, &folded);
    CHECK_FALSE(folded);
    CHECK(m.vertices.size() == (size_t)R * N + 2);       // rings + 2 cap apices
    CHECK(m.triangles.size() == (size_t)(R - 1) * N * 2 + 2 * N);
    WatertightReport r = mesh_watertight(m);
    CHECK(r.is_watertight);
    CHECK(r.euler == 2);
    CHECK(r.components == 1);
    CHECK(mesh_signed_volume(m) > 0);  // oriented outward

    // lateral area of a radius-3 cylinder of length 10
    double side_area = 2 * M_PI * 3.0 * 10.0;
    double cap_area = 2 * M_PI * 3.0 * 3.0;
    CHECK(mesh_area(m) == doctest::Approx(side_area + cap_area).epsilon(0.03));

    // a reversed centerline flags the fold
    TrackedVessel bad = v;
    std::swap(bad.contours[2], bad.contours[3]);
    bad.contours[2].centerline_index = 2;
    bad.contours[3].centerline_index = 3;
    loft_contours(bad, &folded);
    CHECK(folded);

    CHECK_THROWS_AS(loft_contours(TrackedVessel{}), std::exception);
}

TEST_CASE("MeshSdf gives signed distances with the right sign and magnitude") {
    Mesh cube = make_cube(1.0);
    MeshSdf sdf(cube);
    CHECK(sdf({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(sdf({2, 0, 0}) == doctest::Approx(1.0));
    CHECK(sdf({0.5, 0, 0}) == doctest::Approx(-0.5));
    CHECK(sdf({3, 4, 0}) == doctest::Approx(std::hypot(2, 3)));
    CHECK(sdf({1, 1, 1}) == doctest::Approx(0.0).epsilon(1e-9));  // corner

    // non-watertight input is rejected
    Mesh holed = cube;
    holed.triangles.pop_back();
    CHECK_THROWS_AS(MeshSdf{holed}, std::exception);

    // convenience wrapper agrees
    CHECK(sdf_oracle(cube, {2, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("MeshSdf approximates the true distance on a lofted tube") {
    TrackedVessel v = make_ring_track(11, 32, 3.0, 2.0);  // tube z in [0, 20]
    MeshSdf sdf(loft_contours(v));
    // mid-tube, away from caps: cylinder distance |r - 3|
    CHECK(sdf({0, 0, 10}) == doctest::Approx(-3.0).epsilon(0.02));
    CHECK(sdf({1.5, 0, 10}) == doctest::Approx(-1.5).epsilon(0.05));
    CHECK(sdf({5, 0, 10}) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("smooth_min: closed forms, bound, and sharp limit") {
    // equal values: smin = v - ln(n)/k exactly
    for (double k : {0.5, 2.0, 8.0})
        CHECK(smooth_min({1.5, 1.5, 1.5}, k) == doctest::Approx(1.5 - std::log(3.0) / k));

    // two values, closed form
    double a = 0.2, b = 1.1, k = 2.0;
    double want = -std::log(std::exp(-k * a) + std::exp(-k * b)) / k;
    CHECK(smooth_min({a, b}, k) == doctest::Approx(want).epsilon(1e-12));

    // bound min - smin <= ln(n)/k on random tuples
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 2 + rng.uniform_index(5);
        std::vector<double> vals;
        double mn = 1e300;
        for (size_t i = 0; i < n; ++i) {
            vals.push_back(rng.uniform(-50, 50));
            mn = std::min(mn, vals.back());
        }
        double kk = rng.uniform(0.5, 8);
        double sm = smooth_min(vals, kk);
        CHECK(sm <= mn + 1e-12);
        CHECK(mn - sm <= std::log((double)n) / kk + 1e-12);
    }

    // large k approaches the hard minimum; huge magnitudes do not overflow
    CHECK(smooth_min({3.0, 7.0}, 1000.0) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(std::isfinite(smooth_min({-1e6, 1e6}, 2.0)));
    CHECK(smooth_min({-1e6, 1e6}, 2.0) == doctest::Approx(-1e6));
}

TEST_CASE("blend_fields equals smooth_min of the member fields") {
    NeuralField f1(1), f2(2);
    f1.set_normalization({0, 0, 0}, 10);
    f2.set_normalization({1, 1, 1}, 20);
    SdfFn blended = blend_fields({&f1, &f2}, 2.0);
    for (WorldPoint p : {WorldPoint{0, 0, 0}, {3, -2, 5}}) {
        double want = smooth_min({f1(p), f2(p)}, 2.0);
        CHECK(blended(p) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(blend_fields({}, 2.0), std::exception);
    CHECK_THROWS_AS(blend_fields({&f1}, -1.0), std::exception);
}

TEST_CASE("clamp_to_domain replaces far-field extrapolation with the box distance") {
    NeuralField f(5);
    f.set_normalization({10, 0, 0}, 4.0);  // cube [6,14] x [-4,4] x [-4,4]
    SdfFn clamped = clamp_to_domain(f);
    // deep inside the box the field passes through unless it dips below the
    // (negative) box distance
    WorldPoint inside{10, 0, 0};
    CHECK(clamped(inside) == doctest::Approx(std::max(f(inside), -4.0)).epsilon(1e-12));
    // outside, the result is at least the distance to the box face
    WorldPoint out{10, 0, 9};  // 5 mm beyond the +z face
    CHECK(clamped(out) >= 5.0 - 1e-9);
    CHECK(clamped(out) == doctest::Approx(std::max(f(out), 5.0)).epsilon(1e-12));
    // corner distance is the Euclidean distance to the corner
    WorldPoint corner{17, 7, 7};
    CHECK(clamped(corner) >= std::sqrt(27.0) - 1e-9);
}

TEST_CASE("blend_sdfs matches smooth_min over arbitrary evaluators") {
    SdfFn a = [](const WorldPoint& p) { return p.norm() - 3.0; };
    SdfFn b = [](const WorldPoint& p) { return p.x + 1.0; };
    SdfFn blended = blend_sdfs({a, b}, 2.0);
    for (WorldPoint p : {WorldPoint{0, 0, 0}, {2, -1, 4}}) {
        double want = smooth_min({a(p), b(p)}, 2.0);
        CHECK(blended(p) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(blend_sdfs({}, 2.0), std::exception);
    CHECK_THROWS_AS(blend_sdfs({a}, 0.0), std::exception);
    CHECK_THROWS_AS(blend_sdfs({SdfFn{}}, 2.0), std::exception);
}

TEST_CASE("serial and OpenMP SDF grid sampling agree bitwise") {
    SdfFn sphere = [](const WorldPoint& p) { return p.norm() - 5.0; };
    std::array<int, 3> dims{20, 18, 22};
    auto a = sample_sdf_grid_serial(sphere, {-6, -6, -6}, dims, 0.6);
    auto b = sample_sdf_grid(sphere, {-6, -6, -6}, dims, 0.6);
    CHECK(a == b);
}

TEST_CASE("marching cubes on an analytic sphere") {
    const double r = 10.0;
    SdfFn sphere = [&](const WorldPoint& p) { return p.norm() - r; };
    Mesh m = marching_cubes(sphere, {-12, -12, -12}, {12, 12, 12}, 0.5);

    WatertightReport rep = mesh_watertight(m);
    CHECK(rep.is_watertight);
    CHECK(rep.euler == 2);
    CHECK(rep.components == 1);
    CHECK(mesh_area(m) == doctest::Approx(4 * M_PI * r * r).epsilon(0.02));
    CHECK(mesh_signed_volume(m) == doctest::Approx(4.0 / 3.0 * M_PI * r * r * r).epsilon(0.02));
    // every vertex sits on the isosurface
    for (const auto& v : m.vertices) CHECK(std::abs(v.norm() - r) < 0.05);
}

TEST_CASE("marching cubes refinement reduces the area error monotonically") {
    const double r = 6.0;
    SdfFn sphere = [&](const WorldPoint& p) { return p.norm() - r; };
    double prev_err = 1e300;
    for (double res : {2.0, 1.0, 0.5}) {
        Mesh m = marching_cubes(sphere, {-8, -8, -8}, {8, 8, 8}, res);
        double err = std::abs(mesh_area(m) - 4 * M_PI * r * r);
        CHECK(err < prev_err);
        prev_err = err;
    }
}

TEST_CASE("marching cubes on a half-space yields an open sheet") {
    SdfFn plane = [](const WorldPoint& p) { return p.z - 0.5; };
    Mesh m = marching_cubes(plane, {-5, -5, -5}, {5, 5, 5}, 1.0);
    WatertightReport rep = mesh_watertight(m);
    CHECK_FALSE(rep.is_watertight);
    CHECK(rep.boundary_edges > 0);
    for (const auto& v : m.vertices) CHECK(v.z == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("marching cubes throws when the isosurface misses the box") {
    SdfFn far = [](const WorldPoint& p) { return p.norm() + 100.0; };
    CHECK_THROWS_AS(marching_cubes(far, {-2, -2, -2}, {2, 2, 2}, 1.0), std::exception);
}

TEST_CASE("NeuralField: batched forward matches single-point eval, save/load") {
    NeuralField f(7);
    f.set_normalization({1, 2, 3}, 25);
    std::vector<WorldPoint> pts = {{0, 0, 0}, {5, -3, 2}, {-10, 10, 4}};
    auto batch = f.forward_batch(pts);
    REQUIRE(batch.size() == 3);
    for (size_t i = 0; i < pts.size(); ++i)
        CHECK(batch[i] == doctest::Approx(f(pts[i])).epsilon(1e-6));

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "vt_test_surface";
    fs::create_directories(dir);
    std::string path = (dir / "field.ckpt").string();
    f.save(path);
    NeuralField g = NeuralField::load(path);
    CHECK(g.norm_scale() == doctest::Approx(25));
    for (const auto& p : pts) CHECK(g(p) == doctest::Approx(f(p)).epsilon(1e-9));
}

TEST_CASE("NeuralField finite-difference gradient check") {
    // gentle omega0 keeps the sine layer's curvature out of the finite
    // differences; the remaining error floor is ReLU kink crossings in f32
    NeuralField f(7, 2.0);
    f.set_normalization({0, 0, 0}, 5);
    std::vector<WorldPoint> pts = {{1, 0.5, -2}, {-3, 2, 1}, {0.3, -0.1, 4}};

    auto loss = [&] {
        auto y = f.forward_batch(pts);
        double s = 0;
        for (double v : y) s += v * v;
        return s;
    };
    auto back = [&] {
        f.zero_grad();
        auto y = f.forward_batch(pts);
        for (auto& v : y) v *= 2;
        f.backward_batch(y);
    };
    auto rep = grad_check(loss, back, f.params(), 1e-3, 48, 7);
    CHECK(rep.ok(5e-3));
}

TEST_CASE("fit_neural_field learns a short tube") {
    TrackedVessel v = make_ring_track(6, 24, 3.0, 2.0);  // tube z in [0, 10]
    FieldTrainConfig cfg;
    cfg.steps = 4000;
    cfg.oracle_samples = 1500;
    cfg.lr = 3e-4;
    cfg.holdout_stride = 9;
    cfg.seed = 5;
    FieldFitReport rep;
    NeuralField f = fit_neural_field(v, cfg, &rep);

    CHECK_FALSE(rep.loft_folded);
    CHECK(rep.holdout_points > 0);
    CHECK(rep.holdout_mean_abs_mm < 1.0);
    CHECK(std::isfinite(rep.data_loss));
    // gross sign structure: inside negative, outside positive
    CHECK(f({0, 0, 5}) < 0);
    CHECK(f({8, 0, 5}) > 0);
}
