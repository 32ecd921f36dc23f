#include "vt/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;

namespace vt {

std::optional<std::string> check_termination(const WorldPoint& p,
                                             const BoundaryConditions& omega) {
    return omega.match(p);
}

namespace {

struct Leg {
    std::vector<WorldPoint> pts;           // positions after the seed
    std::vector<TrackedContour> contours;  // centerline_index = step number (1-based)
    std::string reason;
};

Vec3 contour_centroid(const Contour& c) {
    Vec3 acc{0, 0, 0};
    auto ps = c.points();
    for (const auto& p : ps) acc += p;
    return acc / (double)ps.size();
}

Leg run_leg(const ScalarVolume& vol, GcnNet& backbone, ContourNet& contour_net,
            const Icosphere& sphere, const ScaleSet& R, const WorldPoint& seed,
            const Direction& d0, const PlaneFrame& seed_frame, const BoundaryConditions& omega,
            const TrackConfig& cfg) {
    Leg leg;
    WorldPoint x = seed;
    Direction dir = d0;
    PlaneFrame prev_frame = seed_frame;
    double cos_gate = std::cos(cfg.angle_gate * M_PI / 180.0);
    int steps = 0;
    while (true) {
        if (steps >= cfg.max_steps) { leg.reason = "max steps"; break; }
        WorldPoint nxt = x + dir * cfg.delta;
        if (auto hit = omega.match(nxt)) { leg.reason = "omega:" + *hit; break; }
        if (!vol.grid.contains_world(nxt)) { leg.reason = "volume exit"; break; }
        x = nxt;
        leg.pts.push_back(x);
        ++steps;

        auto responses = multi_scale_forward(backbone, vol, x, R, sphere);
        if (steps % cfg.eta == 0) {
            AdaptiveScale scale = select_scale(responses, R);
            PlaneFrame frame = plane_basis(x, dir, prev_frame);
            PolarImage img = extract_polar_image(vol, frame, scale.r_tilde, cfg.n_r, cfg.n_phi);
            Contour c = predict_contour(contour_net, img);
            leg.contours.push_back({c, steps});
            prev_frame = frame;
            if (cfg.recenter) {
                x = contour_centroid(c);
                leg.pts.back() = x;
            }
        }
        auto pair = extract_directions(aggregate_max(responses), sphere);
        if (!pair) { leg.reason = "no orientation"; break; }
        // direction continuity: keep the member closest to the previous direction
        Direction chosen =
            pair->d1.dot(dir) >= pair->d2.dot(dir) ? pair->d1 : pair->d2;
        if (cfg.angle_gate > 0 && chosen.dot(dir) < cos_gate) { leg.reason = "kink"; break; }
        dir = chosen;
    }
    return leg;
}

}  // namespace

TrackedVessel track_vessel(const ScalarVolume& vol, GcnNet& backbone, ContourNet& contour_net,
                           const Icosphere& sphere, const ScaleSet& R, const WorldPoint& seed,
                           const BoundaryConditions& omega, const TrackConfig& cfg,
                           const std::string& name) {
    if (!vol.grid.contains_world(seed)) throw std::runtime_error("seed is outside the volume");
    if (auto hit = omega.match(seed))
        throw std::runtime_error("seed lies inside termination region '" + *hit + "'");

    TrackedVessel out;
    out.name = name;

    auto responses = multi_scale_forward(backbone, vol, seed, R, sphere);
    auto pair = extract_directions(aggregate_max(responses), sphere);
    if (!pair) {
        out.centerline = {seed};
        out.reason_forward = out.reason_backward = "no orientation";
        return out;
    }

    // contour at the seed, shared by both legs
    AdaptiveScale seed_scale = select_scale(responses, R);
    PlaneFrame seed_frame = plane_basis(seed, pair->d1);
    PolarImage seed_img =
        extract_polar_image(vol, seed_frame, seed_scale.r_tilde, cfg.n_r, cfg.n_phi);
    Contour seed_contour = predict_contour(contour_net, seed_img);

    Leg fwd = run_leg(vol, backbone, contour_net, sphere, R, seed, pair->d1, seed_frame, omega, cfg);
    Leg bwd = run_leg(vol, backbone, contour_net, sphere, R, seed, pair->d2, seed_frame, omega, cfg);
    out.reason_forward = fwd.reason;
    out.reason_backward = bwd.reason;

    // merge: reversed backward leg, seed once, forward leg
    size_t n2 = bwd.pts.size();
    out.centerline.reserve(n2 + 1 + fwd.pts.size());
    for (size_t i = 0; i < n2; ++i) out.centerline.push_back(bwd.pts[n2 - 1 - i]);
    out.centerline.push_back(seed);
    for (const auto& p : fwd.pts) out.centerline.push_back(p);

    for (const auto& tc : bwd.contours) {
        // backward-leg frames point against the merged tangent; flip them
        out.contours.push_back({flip_contour(tc.contour), (int)n2 - tc.centerline_index});
    }
    out.contours.push_back({seed_contour, (int)n2});
    for (const auto& tc : fwd.contours)
        out.contours.push_back({tc.contour, (int)n2 + tc.centerline_index});
    std::sort(out.contours.begin(), out.contours.end(),
              [](const TrackedContour& a, const TrackedContour& b) {
                  return a.centerline_index < b.centerline_index;
              });
    return out;
}

// ---- serialization ---------------------------------------------------------

std::string tracked_vessel_to_json(const TrackedVessel& v) {
    json j;
    j["name"] = v.name;
    json cl = json::array();
    for (const auto& p : v.centerline) cl.push_back({p.x, p.y, p.z});
    j["centerline"] = cl;
    json cs = json::array();
    for (const auto& tc : v.contours) {
        const auto& c = tc.contour;
        cs.push_back({{"index", tc.centerline_index},
                      {"center", {c.frame.center.x, c.frame.center.y, c.frame.center.z}},
                      {"normal", {c.frame.normal.x, c.frame.normal.y, c.frame.normal.z}},
                      {"e1", {c.frame.e1.x, c.frame.e1.y, c.frame.e1.z}},
                      {"r_tilde", c.r_tilde},
                      {"radii", c.radii}});
    }
    j["contours"] = cs;
    j["termination"] = {{"forward", v.reason_forward}, {"backward", v.reason_backward}};
    return j.dump(2);
}

TrackedVessel tracked_vessel_from_json(const std::string& text) {
    json j = json::parse(text);
    TrackedVessel v;
    v.name = j.at("name").get<std::string>();
    for (const auto& p : j.at("centerline"))
        v.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    for (const auto& c : j.at("contours")) {
        TrackedContour tc;
        tc.centerline_index = c.at("index").get<int>();
        auto vec = [&](const char* key) {
            auto a = c.at(key);
            return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
        };
        tc.contour.frame.center = vec("center");
        tc.contour.frame.normal = vec("normal");
        tc.contour.frame.e1 = vec("e1");
        tc.contour.frame.e2 = tc.contour.frame.normal.cross(tc.contour.frame.e1);
        tc.contour.r_tilde = c.at("r_tilde").get<double>();
        tc.contour.radii = c.at("radii").get<std::vector<double>>();
        v.contours.push_back(tc);
    }
    v.reason_forward = j.at("termination").at("forward").get<std::string>();
    v.reason_backward = j.at("termination").at("backward").get<std::string>();
    return v;
}

}  // namespace vt
