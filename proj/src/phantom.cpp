#include "vt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vt/rng.hpp"

using json = nlohmann::json;

namespace vt {

// ---- Curve ----------------------------------------------------------------

void Curve::add(const Segment& s) {
    double len = (s.b - s.a).norm();
    if (len < 1e-9) throw std::runtime_error("degenerate curve segment (repeated points)");
    pieces_.push_back(s);
    cum_.push_back(cum_.empty() ? len : cum_.back() + len);
}

void Curve::add(const Arc& a) {
    if (a.radius <= 0 || a.t1 <= a.t0) throw std::runtime_error("degenerate arc");
    double len = a.radius * (a.t1 - a.t0);
    pieces_.push_back(a);
    cum_.push_back(cum_.empty() ? len : cum_.back() + len);
}

namespace {

Vec3 arc_point(const Arc& a, double t) {
    return a.center + a.radius * (std::cos(t) * a.u + std::sin(t) * a.v);
}

Vec3 arc_tangent(const Arc& a, double t) {
    return (-std::sin(t) * a.u + std::cos(t) * a.v);
}

}  // namespace

Vec3 Curve::point(double s) const {
    if (empty()) throw std::runtime_error("empty curve");
    s = std::clamp(s, 0.0, length());
    size_t i = std::lower_bound(cum_.begin(), cum_.end(), s) - cum_.begin();
    if (i >= pieces_.size()) i = pieces_.size() - 1;
    double s0 = i == 0 ? 0.0 : cum_[i - 1];
    double local = s - s0;
    if (auto* seg = std::get_if<Segment>(&pieces_[i])) {
        Vec3 d = seg->b - seg->a;
        return seg->a + d * (local / d.norm());
    }
    const Arc& a = std::get<Arc>(pieces_[i]);
    return arc_point(a, a.t0 + local / a.radius);
}

Direction Curve::tangent(double s) const {
    if (empty()) throw std::runtime_error("empty curve");
    s = std::clamp(s, 0.0, length());
    size_t i = std::lower_bound(cum_.begin(), cum_.end(), s) - cum_.begin();
    if (i >= pieces_.size()) i = pieces_.size() - 1;
    double s0 = i == 0 ? 0.0 : cum_[i - 1];
    if (auto* seg = std::get_if<Segment>(&pieces_[i])) return (seg->b - seg->a).normalized();
    const Arc& a = std::get<Arc>(pieces_[i]);
    return arc_tangent(a, a.t0 + (s - s0) / a.radius).normalized();
}

CurveClosest Curve::closest(const Vec3& p) const {
    if (empty()) throw std::runtime_error("empty curve");
    CurveClosest best{1e300, 0};
    double s0 = 0;
    for (size_t i = 0; i < pieces_.size(); ++i) {
        if (auto* seg = std::get_if<Segment>(&pieces_[i])) {
            Vec3 d = seg->b - seg->a;
            double t = std::clamp((p - seg->a).dot(d) / d.norm2(), 0.0, 1.0);
            Vec3 q = seg->a + d * t;
            double dist = (p - q).norm();
            if (dist < best.dist) best = {dist, s0 + t * d.norm()};
        } else {
            const Arc& a = std::get<Arc>(pieces_[i]);
            Vec3 w = p - a.center;
            double wu = w.dot(a.u), wv = w.dot(a.v);
            double tp = std::atan2(wv, wu);
            // candidate angles: endpoints plus the in-plane projection (2pi-periodic)
            std::vector<double> cand = {a.t0, a.t1};
            for (double t : {tp - 2 * M_PI, tp, tp + 2 * M_PI})
                if (t >= a.t0 - 1e-12 && t <= a.t1 + 1e-12) cand.push_back(t);
            for (double t : cand) {
                double tc = std::clamp(t, a.t0, a.t1);
                Vec3 q = arc_point(a, tc);
                double dist = (p - q).norm();
                if (dist < best.dist) best = {dist, s0 + (tc - a.t0) * a.radius};
            }
        }
        s0 = cum_[i];
    }
    return best;
}

Curve make_polyline(const std::vector<Vec3>& points, double fillet_radius) {
    if (points.size() < 2) throw std::runtime_error("polyline needs at least 2 points");
    for (size_t i = 0; i + 1 < points.size(); ++i)
        if ((points[i + 1] - points[i]).norm() < 1e-9)
            throw std::runtime_error("degenerate curve (repeated points)");
    Curve c;
    if (fillet_radius <= 0 || points.size() == 2) {
        for (size_t i = 0; i + 1 < points.size(); ++i) c.add(Segment{points[i], points[i + 1]});
        return c;
    }
    Vec3 cursor = points[0];
    for (size_t i = 1; i + 1 < points.size(); ++i) {
        Vec3 u1 = (points[i] - points[i - 1]).normalized();
        Vec3 u2 = (points[i + 1] - points[i]).normalized();
        double turn = angle_between(u1, u2);
        if (turn < 1e-6) continue;  // collinear, no fillet needed
        double tlen = fillet_radius * std::tan(turn / 2);
        double l_in = (points[i] - cursor).norm();
        double l_out = (points[i + 1] - points[i]).norm();
        if (tlen > l_in - 1e-9 || tlen > l_out - 1e-9)
            throw std::runtime_error("fillet radius too large for polyline segment");
        Vec3 p_in = points[i] - u1 * tlen;
        Vec3 p_out = points[i] + u2 * tlen;
        c.add(Segment{cursor, p_in});
        // arc center: offset from p_in perpendicular to u1, on the inside of the turn
        Vec3 n = u1.cross(u2).normalized();
        Vec3 inward = n.cross(u1).normalized();
        Vec3 center = p_in + inward * fillet_radius;
        Vec3 au = (p_in - center).normalized();
        Vec3 av = n.cross(au).normalized() * -1.0;
        // pick av so the arc runs from p_in toward p_out
        if ((arc_point(Arc{center, au, av, fillet_radius, 0, turn}, turn) - p_out).norm() >
            1e-6 * fillet_radius)
            av = av * -1.0;
        c.add(Arc{center, au, av, fillet_radius, 0, turn});
        cursor = p_out;
    }
    c.add(Segment{cursor, points.back()});
    return c;
}

// ---- TubeSpec -------------------------------------------------------------

double TubeSpec::radius_at(double s) const {
    if (radius_knots.empty()) throw std::runtime_error("tube has no radius profile");
    if (radius_knots.size() == 1) return radius_knots[0].second;
    if (s <= radius_knots.front().first) return radius_knots.front().second;
    if (s >= radius_knots.back().first) return radius_knots.back().second;
    for (size_t i = 0; i + 1 < radius_knots.size(); ++i) {
        auto [s0, r0] = radius_knots[i];
        auto [s1, r1] = radius_knots[i + 1];
        if (s >= s0 && s <= s1) {
            double t = (s - s0) / (s1 - s0);
            return r0 + t * (r1 - r0);
        }
    }
    return radius_knots.back().second;
}

double TubeSpec::max_radius() const {
    double m = 0;
    for (auto& [s, r] : radius_knots) m = std::max(m, r);
    return m;
}

void TubeSpec::validate() const {
    if (centerline.empty()) throw std::runtime_error("tube has empty centerline");
    if (radius_knots.empty()) throw std::runtime_error("tube has no radius profile");
    for (auto& [s, r] : radius_knots)
        if (r <= 0) throw std::runtime_error("tube radius must be positive everywhere");
    if (edge_smoothness < 0) throw std::runtime_error("edge_smoothness must be >= 0");
    if (centerline.length() <= 4 * max_radius())
        throw std::runtime_error("centerline arclength must exceed 4x max radius");
}

namespace {

double sigmoid_edge(double signed_depth, double width) {
    // signed_depth = r_surface - d: positive inside the tube
    if (width <= 1e-12) return signed_depth > 0 ? 1.0 : (signed_depth == 0 ? 0.5 : 0.0);
    return 1.0 / (1.0 + std::exp(-signed_depth / width));
}

double tube_occupancy(const TubeSpec& spec, const Vec3& p) {
    CurveClosest c = spec.centerline.closest(p);
    return sigmoid_edge(spec.radius_at(c.arclength) - c.dist, spec.edge_smoothness);
}

PhantomTruth build_truth(const TubeSpec& spec, double sample_spacing = 1.0) {
    PhantomTruth t;
    t.name = spec.name;
    t.sample_spacing = sample_spacing;
    t.centerline = spec.centerline;
    double L = spec.centerline.length();
    int n = (int)std::floor(L / sample_spacing) + 1;
    Vec3 prev_e1;
    bool have_prev = false;
    for (int i = 0; i < n; ++i) {
        double s = std::min(i * sample_spacing, L);
        TruthSample ts;
        ts.arclength = s;
        ts.center = spec.centerline.point(s);
        ts.tangent = spec.centerline.tangent(s);
        // transported in-plane gauge along the curve
        Vec3 e1;
        if (have_prev) {
            Vec3 proj = prev_e1 - ts.tangent * prev_e1.dot(ts.tangent);
            if (proj.norm() > 1e-6) e1 = proj.normalized();
        }
        if (e1.norm() < 0.5) {
            double ax = std::abs(ts.tangent.x), ay = std::abs(ts.tangent.y),
                   az = std::abs(ts.tangent.z);
            Vec3 a = ax <= ay && ax <= az ? Vec3{1, 0, 0} : (ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
            e1 = a.cross(ts.tangent).normalized();
        }
        ts.e1 = e1;
        ts.e2 = ts.tangent.cross(e1).normalized();
        ts.radius = spec.radius_at(s);
        t.samples.push_back(ts);
        prev_e1 = e1;
        have_prev = true;
    }
    return t;
}

void check_tube_in_grid(const TubeSpec& spec, const GridInfo& grid) {
    Vec3 lo = grid.voxel_to_world(0, 0, 0);
    Vec3 hi = grid.voxel_to_world(grid.dims[0] - 1, grid.dims[1] - 1, grid.dims[2] - 1);
    double L = spec.centerline.length();
    double margin_scale = 1.0;
    for (double s = 0; s <= L; s += std::max(0.5, L / 400)) {
        Vec3 p = spec.centerline.point(s);
        double m = spec.radius_at(s) * margin_scale + 2 * spec.edge_smoothness;
        if (p.x - m < lo.x || p.y - m < lo.y || p.z - m < lo.z || p.x + m > hi.x ||
            p.y + m > hi.y || p.z + m > hi.z)
            throw std::runtime_error("tube '" + spec.name + "' exits the grid");
    }
}

}  // namespace

double tube_intensity(const TubeSpec& spec, const Vec3& p) {
    return spec.intensity_out +
           (spec.intensity_in - spec.intensity_out) * tube_occupancy(spec, p);
}

double tube_system_intensity(const std::vector<TubeSpec>& specs, const Vec3& p) {
    // smooth union of the per-tube occupancies
    double not_in = 1.0;
    for (const auto& s : specs) not_in *= 1.0 - tube_occupancy(s, p);
    const auto& ref = specs.front();
    return ref.intensity_out + (ref.intensity_in - ref.intensity_out) * (1.0 - not_in);
}

ScalarVolume gen_tube_system(const std::vector<TubeSpec>& specs, const GridInfo& grid,
                             uint64_t rng_seed, std::vector<PhantomTruth>* truths) {
    if (specs.empty()) throw std::runtime_error("no tube specs");
    for (const auto& s : specs) {
        s.validate();
        check_tube_in_grid(s, grid);
    }
    ScalarVolume vol = make_scalar_volume(grid.dims, grid.spacing, grid.origin);
    vol.fill_value = (float)specs.front().intensity_out;
    double sigma = specs.front().noise_sigma;
    const int nz = grid.dims[2], ny = grid.dims[1], nx = grid.dims[0];
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                Vec3 p = grid.voxel_to_world(i, j, k);
                double v = specs.size() == 1 ? tube_intensity(specs[0], p)
                                             : tube_system_intensity(specs, p);
                size_t idx = grid.index(i, j, k);
                if (sigma > 0) v += sigma * hashed_normal(rng_seed, idx);
                vol.data[idx] = (float)v;
            }
    }
    if (truths) {
        truths->clear();
        for (const auto& s : specs) truths->push_back(build_truth(s));
    }
    return vol;
}

ScalarVolume gen_tube_volume(const TubeSpec& spec, const GridInfo& grid, uint64_t rng_seed,
                             PhantomTruth* truth) {
    std::vector<PhantomTruth> ts;
    ScalarVolume v = gen_tube_system({spec}, grid, rng_seed, truth ? &ts : nullptr);
    if (truth) *truth = std::move(ts[0]);
    return v;
}

ScalarVolume gen_bifurcation(const TubeSpec& parent, const TubeSpec& child_a,
                             const TubeSpec& child_b, const GridInfo& grid, uint64_t rng_seed,
                             std::vector<PhantomTruth>* truths) {
    for (const TubeSpec* c : {&child_a, &child_b}) {
        Vec3 start = c->centerline.point(0);
        CurveClosest cc = parent.centerline.closest(start);
        if (cc.dist > 1e-6)
            throw std::runtime_error("child '" + c->name + "' does not start on the parent centerline");
    }
    return gen_tube_system({parent, child_a, child_b}, grid, rng_seed, truths);
}

// ---- controller masks -----------------------------------------------------

LabelVolume gen_controller_masks(const std::vector<PhantomTruth>& truths,
                                 const std::vector<MaskRegionSpec>& regions,
                                 const GridInfo& grid) {
    LabelVolume lv = make_label_volume(grid.dims, grid.spacing, grid.origin);
    uint16_t next_id = 1;
    std::vector<uint16_t> ids;
    for (const auto& r : regions) {
        std::string name = std::visit([](const auto& x) { return x.name; }, r);
        if (name.empty()) throw std::runtime_error("mask region needs a name");
        lv.labels[name] = next_id;
        ids.push_back(next_id);
        ++next_id;
        if (auto* tm = std::get_if<TubeMaskSpec>(&r))
            if (tm->truth_index >= truths.size())
                throw std::runtime_error("tube mask references missing truth");
    }
    const int nz = grid.dims[2], ny = grid.dims[1], nx = grid.dims[0];
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                Vec3 p = grid.voxel_to_world(i, j, k);
                for (size_t ri = 0; ri < regions.size(); ++ri) {
                    bool inside = false;
                    if (auto* tm = std::get_if<TubeMaskSpec>(&regions[ri])) {
                        const auto& tr = truths[tm->truth_index];
                        CurveClosest cc = tr.centerline.closest(p);
                        double r = tr.samples.empty()
                                       ? 0.0
                                       : tr.samples[std::min(
                                             (size_t)(cc.arclength / tr.sample_spacing),
                                             tr.samples.size() - 1)].radius;
                        inside = cc.dist <= tm->dilation * r;
                    } else if (auto* sl = std::get_if<SlabSpec>(&regions[ri])) {
                        double c = p[sl->axis];
                        inside = sl->side > 0 ? c > sl->threshold : c < sl->threshold;
                    } else {
                        const auto& bl = std::get<BlobSpec>(regions[ri]);
                        inside = (p - bl.center).norm() <= bl.radius;
                    }
                    if (inside) {
                        lv.at(i, j, k) = ids[ri];
                        break;  // priority order: first match wins
                    }
                }
            }
    }
    for (size_t ri = 0; ri < regions.size(); ++ri) {
        bool any = false;
        for (uint16_t v : lv.data)
            if (v == ids[ri]) { any = true; break; }
        if (!any) {
            std::string name = std::visit([](const auto& x) { return x.name; }, regions[ri]);
            throw std::runtime_error("mask region '" + name + "' is empty");
        }
    }
    return lv;
}

// ---- serialization --------------------------------------------------------

std::string truth_to_json(const PhantomTruth& t) {
    json j;
    j["name"] = t.name;
    j["sample_spacing_mm"] = t.sample_spacing;
    json samples = json::array();
    for (const auto& s : t.samples) {
        samples.push_back({{"arclength", s.arclength},
                           {"center", {s.center.x, s.center.y, s.center.z}},
                           {"tangent", {s.tangent.x, s.tangent.y, s.tangent.z}},
                           {"e1", {s.e1.x, s.e1.y, s.e1.z}},
                           {"e2", {s.e2.x, s.e2.y, s.e2.z}},
                           {"radius", s.radius}});
    }
    j["samples"] = samples;
    return j.dump(2);
}

void save_truth(const PhantomTruth& t, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write truth file: " + path);
    f << truth_to_json(t) << "\n";
}

PhantomTruth truth_from_json(const std::string& text) {
    json j = json::parse(text);
    PhantomTruth t;
    t.name = j.at("name").get<std::string>();
    t.sample_spacing = j.at("sample_spacing_mm").get<double>();
    auto vec = [](const json& a) {
        return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
    };
    std::vector<Vec3> centers;
    for (const auto& s : j.at("samples")) {
        TruthSample ts;
        ts.arclength = s.at("arclength").get<double>();
        ts.center = vec(s.at("center"));
        ts.tangent = vec(s.at("tangent"));
        ts.e1 = vec(s.at("e1"));
        ts.e2 = vec(s.at("e2"));
        ts.radius = s.at("radius").get<double>();
        t.samples.push_back(ts);
        centers.push_back(ts.center);
    }
    if (centers.size() < 2) throw std::runtime_error("truth file has fewer than 2 samples");
    t.centerline = make_polyline(centers);
    return t;
}

PhantomTruth load_truth(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open truth file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return truth_from_json(text);
}

}  // namespace vt
