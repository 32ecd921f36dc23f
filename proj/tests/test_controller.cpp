#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vt/controller.hpp"
#include "vt/phantom.hpp"

using namespace vt;

namespace {

// straight horizontal tube with blob masks at both ends
struct PathFixture {
    ScalarVolume vol;
    LabelVolume masks;
    std::vector<PhantomTruth> truths;
};

PathFixture make_path_fixture() {
    TubeSpec s;
    s.name = "conn";
    s.centerline = make_polyline({{-36, 0, 0}, {36, 0, 0}});
    s.radius_knots = {{0, 5}};
    GridInfo grid;
    grid.dims = {49, 25, 25};
    grid.spacing = {2, 2, 2};
    grid.origin = {-48, -24, -24};

    PathFixture f;
    f.vol = gen_tube_system({s}, grid, 3, &f.truths);
    std::vector<MaskRegionSpec> regions;
    regions.push_back(BlobSpec{{-34, 0, 0}, 6, "a"});
    regions.push_back(BlobSpec{{34, 0, 0}, 6, "b"});
    f.masks = gen_controller_masks(f.truths, regions, grid);
    return f;
}

}  // namespace

TEST_CASE("center_of_mass lands on the blob center for symmetric masks") {
    GridInfo grid;
    grid.dims = {25, 25, 25};
    grid.spacing = {2, 2, 2};
    grid.origin = {-24, -24, -24};
    TubeSpec s;
    s.centerline = make_polyline({{0, 0, -18}, {0, 0, 18}});
    s.radius_knots = {{0, 3}};
    std::vector<PhantomTruth> truths;
    gen_tube_system({s}, grid, 0, &truths);
    // blob centered on a voxel center: the mask is symmetric around it
    LabelVolume masks = gen_controller_masks({truths}, {BlobSpec{{0, 0, -10}, 7, "inlet"}}, grid);

    SeedSpec seed = center_of_mass(masks, "inlet");
    CHECK((seed.point - Vec3{0, 0, -10}).norm() < 0.5 * 2.0);  // within half a voxel
    CHECK(seed.provenance == "center-of-mass:inlet");
    CHECK_THROWS_AS(center_of_mass(masks, "missing"), std::exception);
}

TEST_CASE("center_of_mass snaps to the mask when the centroid falls outside") {
    // two disjoint blobs under one label: the centroid lies in the gap
    LabelVolume masks = make_label_volume({41, 5, 5}, {1, 1, 1}, {0, 0, 0});
    masks.labels = {{"pair", 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                masks.at(i, j + 1, k + 1) = 1;       // blob near x = 1
                masks.at(38 + i, j + 1, k + 1) = 1;  // blob near x = 39
            }
    SeedSpec seed = center_of_mass(masks, "pair");
    CHECK(seed.provenance == "center-of-mass:pair:snapped");
    CHECK(masks.label_at_world(seed.point) == 1);
}

TEST_CASE("shortest path follows the bright tube and seeds its midpoint") {
    PathFixture f = make_path_fixture();
    ShortestPathResult res = shortest_path_seed(f.vol, f.masks, "a", "b");
    REQUIRE(res.path.size() > 10);
    CHECK(res.total_cost > 0);

    // endpoints inside their masks
    CHECK(f.masks.label_at_world(res.path.front()) == f.masks.id_of("a"));
    CHECK(f.masks.label_at_world(res.path.back()) == f.masks.id_of("b"));

    // >= 95% of the path stays inside the true tube
    int inside = 0;
    for (const auto& p : res.path)
        if (f.truths[0].distance_to_centerline(p) <= 5.0) ++inside;
    CHECK((double)inside / res.path.size() >= 0.95);

    // the seed is near half the accumulated cost, which for a uniform tube is
    // near the geometric middle
    CHECK(res.seed.provenance == "path-midpoint");
    CHECK(std::abs(res.seed.point.x) < 10.0);
    CHECK(std::abs(res.seed.point.y) < 5.0);

    CHECK_THROWS_AS(shortest_path_seed(f.vol, f.masks, "a", "a"), std::exception);
    CHECK_THROWS_AS(shortest_path_seed(f.vol, f.masks, "a", "missing"), std::exception);
}

TEST_CASE("build_boundary_conditions resolves seeds and omega regions") {
    PathFixture f = make_path_fixture();
    std::string cfg = R"({
      "vessels": [
        {
          "name": "conn",
          "seed": {"type": "path", "from": "a", "to": "b"},
          "omega": [
            {"type": "label", "label": "a"},
            {"type": "label", "label": "b"},
            {"type": "slab", "axis": "z", "threshold_mm": 20, "side": "above", "name": "roof"}
          ],
          "delta_mm": 0.5,
          "eta": 4
        },
        {
          "name": "manual_one",
          "seed": {"type": "manual", "point_mm": [1, 2, 3]},
          "omega": [{"type": "slab", "axis": "x", "threshold_mm": 40, "side": "above"}]
        }
      ]
    })";
    auto plans = build_boundary_conditions(cfg, f.masks, f.vol);
    REQUIRE(plans.size() == 2);

    const VesselPlan& conn = plans.at("conn");
    CHECK(conn.seed.vessel == "conn");
    CHECK(conn.seed.provenance == "path-midpoint");
    CHECK(conn.delta == doctest::Approx(0.5));
    CHECK(conn.eta == 4);
    REQUIRE(conn.omega.regions.size() == 3);
    CHECK(conn.omega.match({-34, 0, 0}) == std::optional<std::string>("a"));
    CHECK(conn.omega.match({0, 0, 21}) == std::optional<std::string>("roof"));
    CHECK(conn.omega.match({0, 0, 0}) == std::nullopt);

    const VesselPlan& man = plans.at("manual_one");
    CHECK(man.seed.provenance == "manual");
    CHECK((man.seed.point - Vec3{1, 2, 3}).norm() == doctest::Approx(0));
    CHECK(man.delta == doctest::Approx(1.0));  // defaults
    CHECK(man.eta == 5);

    std::string dump = resolved_plan_to_json(plans);
    CHECK(dump.find("conn") != std::string::npos);
    CHECK(dump.find("path-midpoint") != std::string::npos);
}

TEST_CASE("build_boundary_conditions rejects malformed configs") {
    PathFixture f = make_path_fixture();
    auto build = [&](const std::string& cfg) { return build_boundary_conditions(cfg, f.masks, f.vol); };

    CHECK_THROWS_AS(build("not json"), std::exception);
    // unknown label
    CHECK_THROWS_AS(build(R"({"vessels":[{"name":"v","seed":{"type":"com","label":"nope"},
        "omega":[{"type":"label","label":"a"}]}]})"),
                    std::exception);
    // unknown seed type
    CHECK_THROWS_AS(build(R"({"vessels":[{"name":"v","seed":{"type":"teleport"},
        "omega":[{"type":"label","label":"a"}]}]})"),
                    std::exception);
    // empty omega
    CHECK_THROWS_AS(build(R"({"vessels":[{"name":"v","seed":{"type":"com","label":"a"},
        "omega":[]}]})"),
                    std::exception);
    // bad slab side
    CHECK_THROWS_AS(build(R"({"vessels":[{"name":"v","seed":{"type":"com","label":"a"},
        "omega":[{"type":"slab","axis":"z","threshold_mm":0,"side":"sideways"}]}]})"),
                    std::exception);
}
