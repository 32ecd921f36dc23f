#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vt/phantom.hpp"
#include "vt/tracker.hpp"

using namespace vt;

namespace {

ScalarVolume tube_volume(GridInfo& grid_out, double radius = 5) {
    TubeSpec s;
    s.centerline = make_polyline({{0, 0, -40}, {0, 0, 40}});
    s.radius_knots = {{0, radius}};
    GridInfo grid;
    grid.dims = {49, 49, 49};
    grid.spacing = {2, 2, 2};
    grid.origin = {-48, -48, -48};
    grid_out = grid;
    return gen_tube_volume(s, grid, 0);
}

BoundaryConditions slab_omega(double z_above, double z_below) {
    BoundaryConditions bc;
    bc.regions.push_back(SlabRegion{2, z_above, +1, "top"});
    bc.regions.push_back(SlabRegion{2, z_below, -1, "bottom"});
    return bc;
}

}  // namespace

TEST_CASE("check_termination matches regions in priority order") {
    BoundaryConditions bc = slab_omega(30, -30);
    CHECK(check_termination({0, 0, 0}, bc) == std::nullopt);
    CHECK(check_termination({0, 0, 31}, bc) == std::optional<std::string>("top"));
    CHECK(check_termination({0, 0, -31}, bc) == std::optional<std::string>("bottom"));

    // overlapping regions: first listed wins
    BoundaryConditions overlap;
    overlap.regions.push_back(SlabRegion{2, 10, +1, "first"});
    overlap.regions.push_back(SlabRegion{2, 5, +1, "second"});
    CHECK(check_termination({0, 0, 20}, overlap) == std::optional<std::string>("first"));
    CHECK(check_termination({0, 0, 7}, overlap) == std::optional<std::string>("second"));
}

TEST_CASE("track_vessel rejects bad seeds") {
    GridInfo grid;
    ScalarVolume vol = tube_volume(grid);
    Icosphere sphere = build_icosphere(1);
    GcnNet net(8, 3);
    ContourNet cnet(5);
    ScaleSet R{{4.0, 8.0, 16.0}};
    TrackConfig cfg;

    CHECK_THROWS_AS(track_vessel(vol, net, cnet, sphere, R, {500, 0, 0}, slab_omega(30, -30), cfg),
                    std::exception);
    CHECK_THROWS_AS(track_vessel(vol, net, cnet, sphere, R, {0, 0, 35}, slab_omega(30, -30), cfg),
                    std::exception);
}

TEST_CASE("constant volume yields no orientation and a single-point track") {
    ScalarVolume vol = make_scalar_volume({21, 21, 21}, {2, 2, 2}, {-20, -20, -20}, 1.0f);
    Icosphere sphere = build_icosphere(1);
    GcnNet net(8, 3);
    ContourNet cnet(5);
    ScaleSet R{{4.0, 8.0}};
    TrackConfig cfg;
    TrackedVessel v =
        track_vessel(vol, net, cnet, sphere, R, {0, 0, 0}, slab_omega(100, -100), cfg, "flat");
    CHECK(v.centerline.size() == 1);
    CHECK(v.reason_forward == "no orientation");
    CHECK(v.reason_backward == "no orientation");
    CHECK(v.contours.empty());
}

TEST_CASE("omega is checked before the step is appended") {
    // seed one step away from the slab: the leg stepping toward it must stop
    // without appending a point past the boundary
    GridInfo grid;
    ScalarVolume vol = tube_volume(grid);
    Icosphere sphere = build_icosphere(2);
    GcnNet net(8, 3);
    ContourNet cnet(5);
    ScaleSet R{{4.0, 8.0, 16.0}};
    TrackConfig cfg;
    cfg.delta = 2.0;
    cfg.max_steps = 300;
    cfg.angle_gate = 0;  // untrained backbone; do not stop on kinks

    // free space is the box |x|,|y|,|z| <= 1: any 2 mm step lands in a slab,
    // so both legs must stop at the seed with nothing appended
    BoundaryConditions bc;
    for (int axis = 0; axis < 3; ++axis) {
        bc.regions.push_back(SlabRegion{axis, 1.0, +1, "hi" + std::to_string(axis)});
        bc.regions.push_back(SlabRegion{axis, -1.0, -1, "lo" + std::to_string(axis)});
    }
    TrackedVessel v = track_vessel(vol, net, cnet, sphere, R, {0, 0, 0}, bc, cfg);
    CHECK(v.centerline.size() == 1);
    CHECK((v.centerline[0] - Vec3{0, 0, 0}).norm() == doctest::Approx(0));
    CHECK(v.reason_forward.substr(0, 6) == "omega:");
    CHECK(v.reason_backward.substr(0, 6) == "omega:");
}

TEST_CASE("merged track is ordered and contours carry monotone indices") {
    GridInfo grid;
    ScalarVolume vol = tube_volume(grid);
    Icosphere sphere = build_icosphere(2);
    GcnNet net(8, 3);
    ContourNet cnet(5);
    ScaleSet R{{4.0, 8.0, 16.0}};
    TrackConfig cfg;
    cfg.delta = 2.0;
    cfg.eta = 3;
    cfg.max_steps = 20;
    cfg.angle_gate = 0;

    BoundaryConditions bc = slab_omega(44, -44);
    TrackedVessel v = track_vessel(vol, net, cnet, sphere, R, {0, 0, 0}, bc, cfg);
    REQUIRE(!v.centerline.empty());
    REQUIRE(!v.contours.empty());
    for (size_t i = 1; i < v.contours.size(); ++i)
        CHECK(v.contours[i].centerline_index >= v.contours[i - 1].centerline_index);
    for (const auto& tc : v.contours) {
        CHECK(tc.centerline_index >= 0);
        CHECK(tc.centerline_index < (int)v.centerline.size());
        // the contour is anchored on its centerline point
        CHECK((tc.contour.frame.center - v.centerline[tc.centerline_index]).norm() ==
              doctest::Approx(0).epsilon(1e-9));
    }
    // consecutive centerline points are delta apart
    for (size_t i = 1; i < v.centerline.size(); ++i)
        CHECK((v.centerline[i] - v.centerline[i - 1]).norm() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(!v.reason_forward.empty());
    CHECK(!v.reason_backward.empty());
}

TEST_CASE("tracking is deterministic") {
    GridInfo grid;
    ScalarVolume vol = tube_volume(grid);
    Icosphere sphere = build_icosphere(2);
    ScaleSet R{{4.0, 8.0, 16.0}};
    TrackConfig cfg;
    cfg.delta = 2.0;
    cfg.max_steps = 15;
    cfg.angle_gate = 0;
    BoundaryConditions bc = slab_omega(44, -44);

    auto run = [&] {
        GcnNet net(8, 3);
        ContourNet cnet(5);
        return tracked_vessel_to_json(
            track_vessel(vol, net, cnet, sphere, R, {0, 0, 0}, bc, cfg));
    };
    CHECK(run() == run());
}

TEST_CASE("tracked vessel JSON round trip") {
    TrackedVessel v;
    v.name = "branch_a";
    v.centerline = {{0, 0, 0}, {0, 0, 1}, {0, 0, 2}};
    v.reason_forward = "omega:top";
    v.reason_backward = "volume exit";
    TrackedContour tc;
    tc.centerline_index = 1;
    tc.contour.frame = plane_basis({0, 0, 1}, {0, 0, 1});
    tc.contour.r_tilde = 6;
    tc.contour.radii.assign(8, 2.5);
    v.contours.push_back(tc);

    TrackedVessel back = tracked_vessel_from_json(tracked_vessel_to_json(v));
    CHECK(back.name == v.name);
    REQUIRE(back.centerline.size() == 3);
    CHECK((back.centerline[2] - v.centerline[2]).norm() == doctest::Approx(0).epsilon(1e-12));
    REQUIRE(back.contours.size() == 1);
    CHECK(back.contours[0].centerline_index == 1);
    CHECK(back.contours[0].contour.r_tilde == doctest::Approx(6));
    back.contours[0].contour.frame.validate();  // e2 reconstructed from normal x e1
    CHECK(back.reason_forward == "omega:top");
    CHECK(back.reason_backward == "volume exit");
}
