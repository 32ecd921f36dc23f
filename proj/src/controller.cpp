#include "vt/controller.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;

namespace vt {

std::optional<std::string> BoundaryConditions::match(const WorldPoint& p) const {
    for (const auto& r : regions) {
        if (auto* lr = std::get_if<LabelRegion>(&r)) {
            if (lr->masks->label_at_world(p) == lr->id) return lr->name;
        } else {
            const auto& sl = std::get<SlabRegion>(r);
            double c = p[sl.axis];
            if (sl.side > 0 ? c > sl.threshold : c < sl.threshold) return sl.name;
        }
    }
    return std::nullopt;
}

SeedSpec center_of_mass(const LabelVolume& masks, const std::string& label) {
    uint16_t id = masks.id_of(label);
    const auto& g = masks.grid;
    double sx = 0, sy = 0, sz = 0;
    size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (masks.at(i, j, k) == id) {
                    sx += i; sy += j; sz += k;
                    ++n;
                }
    if (n == 0) throw std::runtime_error("label '" + label + "' has no voxels");
    WorldPoint com = g.voxel_to_world(sx / n, sy / n, sz / n);
    SeedSpec seed{"", com, "center-of-mass:" + label};
    if (masks.label_at_world(com) == id) return seed;
    // centroid fell outside the (non-convex) mask: snap to the nearest labeled voxel
    double best = 1e300;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (masks.at(i, j, k) == id) {
                    WorldPoint w = g.voxel_to_world(i, j, k);
                    double d = (w - com).norm2();
                    if (d < best) { best = d; seed.point = w; }
                }
    seed.provenance += ":snapped";
    return seed;
}

ShortestPathResult shortest_path_seed(const ScalarVolume& vol, const LabelVolume& masks,
                                      const std::string& label_a, const std::string& label_b) {
    if (label_a == label_b) throw std::runtime_error("shortest path needs two distinct labels");
    uint16_t ida = masks.id_of(label_a), idb = masks.id_of(label_b);
    const auto& g = vol.grid;
    if (g.dims != masks.grid.dims) throw std::runtime_error("mask grid does not match volume grid");
    size_t N = g.voxel_count();

    // intensity statistics under both masks drive the edge cost
    double mu = 0, count = 0;
    for (size_t i = 0; i < N; ++i)
        if (masks.data[i] == ida || masks.data[i] == idb) { mu += vol.data[i]; ++count; }
    if (count == 0) throw std::runtime_error("shortest path labels are empty");
    mu /= count;
    double var = 0;
    for (size_t i = 0; i < N; ++i)
        if (masks.data[i] == ida || masks.data[i] == idb) {
            double d = vol.data[i] - mu;
            var += d * d;
        }
    double sigma = std::sqrt(var / count);
    if (sigma < 1e-6) sigma = 1e-6;

    auto edge_cost = [&](size_t target, double step_mm) {
        double z = ((double)vol.data[target] - mu) / sigma;
        return step_mm * (1.0 + std::exp(-z));
    };

    std::vector<double> dist(N, 1e300);
    std::vector<int64_t> parent(N, -1);
    using QE = std::pair<double, size_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
    for (size_t i = 0; i < N; ++i)
        if (masks.data[i] == ida) { dist[i] = 0; pq.push({0.0, i}); }

    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    size_t goal = SIZE_MAX;
    while (!pq.empty()) {
        auto [d, idx] = pq.top();
        pq.pop();
        if (d > dist[idx]) continue;
        if (masks.data[idx] == idb) { goal = idx; break; }
        int i = (int)(idx % nx), j = (int)((idx / nx) % ny), k = (int)(idx / ((size_t)nx * ny));
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    if (!di && !dj && !dk) continue;
                    int ii = i + di, jj = j + dj, kk = k + dk;
                    if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
                    double step = std::sqrt(di * di * g.spacing.x * g.spacing.x +
                                            dj * dj * g.spacing.y * g.spacing.y +
                                            dk * dk * g.spacing.z * g.spacing.z);
                    size_t t = g.index(ii, jj, kk);
                    double nd = d + edge_cost(t, step);
                    if (nd < dist[t]) {
                        dist[t] = nd;
                        parent[t] = (int64_t)idx;
                        pq.push({nd, t});
                    }
                }
    }
    if (goal == SIZE_MAX) throw std::runtime_error("no path between labels");

    std::vector<size_t> chain;
    for (int64_t c = (int64_t)goal; c >= 0; c = parent[c]) chain.push_back((size_t)c);
    std::reverse(chain.begin(), chain.end());

    ShortestPathResult res;
    res.total_cost = dist[goal];
    double half = res.total_cost / 2;
    size_t mid = 0;
    double best = 1e300;
    for (size_t n = 0; n < chain.size(); ++n) {
        size_t idx = chain[n];
        int i = (int)(idx % nx), j = (int)((idx / nx) % ny), k = (int)(idx / ((size_t)nx * ny));
        res.path.push_back(g.voxel_to_world(i, j, k));
        double gap = std::abs(dist[idx] - half);
        if (gap < best) { best = gap; mid = n; }
    }
    res.seed = SeedSpec{"", res.path[mid], "path-midpoint"};
    return res;
}

// ---- config resolution -----------------------------------------------------

namespace {

int axis_from_json(const json& j) {
    std::string a = j.get<std::string>();
    if (a == "x") return 0;
    if (a == "y") return 1;
    if (a == "z") return 2;
    throw std::runtime_error("bad slab axis: " + a);
}

TerminationRegion region_from_json(const json& j, const LabelVolume& masks) {
    std::string type = j.at("type").get<std::string>();
    if (type == "label") {
        std::string name = j.at("label").get<std::string>();
        return LabelRegion{&masks, masks.id_of(name), name};
    }
    if (type == "slab") {
        SlabRegion s;
        s.axis = axis_from_json(j.at("axis"));
        s.threshold = j.at("threshold_mm").get<double>();
        std::string side = j.at("side").get<std::string>();
        s.side = side == "above" ? +1 : (side == "below" ? -1 : throw std::runtime_error(
                                                                    "bad slab side: " + side));
        s.name = j.value("name", side + "_" + j.at("axis").get<std::string>());
        return s;
    }
    throw std::runtime_error("unknown omega region type: " + type);
}

}  // namespace

std::map<std::string, VesselPlan> build_boundary_conditions(const std::string& config_json,
                                                            const LabelVolume& masks,
                                                            const ScalarVolume& vol) {
    json cfg = json::parse(config_json);
    std::map<std::string, VesselPlan> plans;
    for (const auto& v : cfg.at("vessels")) {
        VesselPlan plan;
        std::string name = v.at("name").get<std::string>();
        const auto& seed = v.at("seed");
        std::string stype = seed.at("type").get<std::string>();
        if (stype == "com") {
            plan.seed = center_of_mass(masks, seed.at("label").get<std::string>());
        } else if (stype == "path") {
            auto res = shortest_path_seed(vol, masks, seed.at("from").get<std::string>(),
                                          seed.at("to").get<std::string>());
            plan.seed = res.seed;
        } else if (stype == "manual") {
            auto p = seed.at("point_mm");
            plan.seed.point = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
            plan.seed.provenance = "manual";
        } else {
            throw std::runtime_error("unknown seed type: " + stype);
        }
        plan.seed.vessel = name;
        for (const auto& r : v.at("omega")) plan.omega.regions.push_back(region_from_json(r, masks));
        if (plan.omega.regions.empty())
            throw std::runtime_error("vessel '" + name + "' has an empty omega list");
        plan.delta = v.value("delta_mm", 1.0);
        plan.eta = v.value("eta", 5);
        plans[name] = plan;
    }
    return plans;
}

std::string resolved_plan_to_json(const std::map<std::string, VesselPlan>& plans) {
    json j;
    for (const auto& [name, p] : plans) {
        json omega = json::array();
        for (const auto& r : p.omega.regions) {
            if (auto* lr = std::get_if<LabelRegion>(&r))
                omega.push_back({{"type", "label"}, {"label", lr->name}});
            else {
                const auto& sl = std::get<SlabRegion>(r);
                omega.push_back({{"type", "slab"},
                                 {"axis", sl.axis},
                                 {"threshold_mm", sl.threshold},
                                 {"side", sl.side > 0 ? "above" : "below"},
                                 {"name", sl.name}});
            }
        }
        j[name] = {{"seed",
                    {{"point_mm", {p.seed.point.x, p.seed.point.y, p.seed.point.z}},
                     {"provenance", p.seed.provenance}}},
                   {"omega", omega},
                   {"delta_mm", p.delta},
                   {"eta", p.eta}};
    }
    return j.dump(2);
}

}  // namespace vt
