#include "vt/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

using json = nlohmann::json;

namespace vt {

// ---- mesh basics -----------------------------------------------------------

double mesh_area(const Mesh& m) {
    double a = 0;
    for (const auto& t : m.triangles) {
        Vec3 e1 = m.vertices[t[1]] - m.vertices[t[0]];
        Vec3 e2 = m.vertices[t[2]] - m.vertices[t[0]];
        a += 0.5 * e1.cross(e2).norm();
    }
    return a;
}

double mesh_signed_volume(const Mesh& m) {
    double v = 0;
    for (const auto& t : m.triangles)
        v += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]])) / 6.0;
    return v;
}

namespace {

uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return ((uint64_t)(uint32_t)a << 32) | (uint32_t)b;
}

struct DSU {
    std::vector<int> parent;
    explicit DSU(size_t n) : parent(n) {
        for (size_t i = 0; i < n; ++i) parent[i] = (int)i;
    }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

WatertightReport mesh_watertight(const Mesh& m) {
    WatertightReport r;
    struct EdgeUse {
        int count = 0;
        int balance = 0;  // +1 per (low->high) use, -1 per (high->low)
    };
    std::unordered_map<uint64_t, EdgeUse> edges;
    edges.reserve(m.triangles.size() * 3);
    DSU dsu(m.vertices.size());
    std::vector<char> used(m.vertices.size(), 0);
    for (const auto& t : m.triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            auto& u = edges[edge_key(a, b)];
            ++u.count;
            u.balance += a < b ? +1 : -1;
            dsu.unite(a, b);
            used[a] = 1;
        }
    }
    for (const auto& [k, u] : edges) {
        if (u.count == 1) ++r.boundary_edges;
        else if (u.count > 2 || u.balance != 0) ++r.non_manifold_edges;
    }
    r.euler = (long)m.vertices.size() - (long)edges.size() + (long)m.triangles.size();
    std::vector<char> seen(m.vertices.size(), 0);
    for (size_t i = 0; i < m.vertices.size(); ++i)
        if (used[i]) {
            int root = dsu.find((int)i);
            if (!seen[root]) { seen[root] = 1; ++r.components; }
        }
    r.is_watertight =
        !m.triangles.empty() && r.boundary_edges == 0 && r.non_manifold_edges == 0;
    return r;
}

std::string watertight_report_to_json(const WatertightReport& r) {
    json j{{"is_watertight", r.is_watertight},
           {"boundary_edges", r.boundary_edges},
           {"non_manifold_edges", r.non_manifold_edges},
           {"euler_characteristic", r.euler},
           {"components", r.components}};
    return j.dump(2);
}

void save_obj(const std::string& path, const Mesh& m) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.precision(9);
    for (const auto& v : m.vertices) f << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& t : m.triangles)
        f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

Mesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    Mesh m;
    std::string tag;
    while (f >> tag) {
        if (tag == "v") {
            Vec3 p;
            f >> p.x >> p.y >> p.z;
            m.vertices.push_back(p);
        } else if (tag == "f") {
            std::array<int, 3> t;
            f >> t[0] >> t[1] >> t[2];
            for (auto& i : t) {
                if (i < 1 || (size_t)i > m.vertices.size())
                    throw std::runtime_error("obj face index out of range in " + path);
                --i;
            }
            m.triangles.push_back(t);
        } else {
            std::string rest;
            std::getline(f, rest);
        }
    }
    if (m.vertices.empty()) throw std::runtime_error("obj has no vertices: " + path);
    return m;
}

// ---- lofting ---------------------------------------------------------------

int align_rings(const std::vector<WorldPoint>& a, const std::vector<WorldPoint>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::runtime_error("align_rings: rings differ in size");
    int n = (int)a.size();
    int best_s = 0;
    double best = std::numeric_limits<double>::max();
    for (int s = 0; s < n; ++s) {
        double cost = 0;
        for (int k = 0; k < n; ++k) cost += (a[k] - b[(k + s) % n]).norm2();
        if (cost < best) { best = cost; best_s = s; }
    }
    return best_s;
}

Mesh loft_contours(const TrackedVessel& v, bool* folded) {
    if (v.contours.size() < 2)
        throw std::runtime_error("loft needs at least 2 contours, got " +
                                 std::to_string(v.contours.size()));
    size_t R = v.contours.size();
    size_t n = v.contours[0].contour.radii.size();
    if (folded) *folded = false;

    std::vector<std::vector<WorldPoint>> rings;
    rings.reserve(R);
    for (size_t i = 0; i < R; ++i) {
        const Contour& c = v.contours[i].contour;
        if (c.radii.size() != n)
            throw std::runtime_error("loft contours have mismatched angular resolution");
        auto pts = c.points();
        if (i == 0) {
            rings.push_back(std::move(pts));
        } else {
            int s = align_rings(rings.back(), pts);
            std::vector<WorldPoint> aligned(n);
            for (size_t k = 0; k < n; ++k) aligned[k] = pts[(k + s) % n];
            rings.push_back(std::move(aligned));
        }
        if (folded && i > 0) {
            Vec3 step = v.contours[i].contour.frame.center -
                        v.contours[i - 1].contour.frame.center;
            if (step.dot(v.contours[i - 1].contour.frame.normal) <= 0) *folded = true;
        }
    }

    Mesh m;
    m.vertices.reserve(R * n + 2);
    for (const auto& ring : rings)
        for (const auto& p : ring) m.vertices.push_back(p);
    Vec3 c0{0, 0, 0}, c1{0, 0, 0};
    for (const auto& p : rings.front()) c0 += p;
    for (const auto& p : rings.back()) c1 += p;
    int start_c = (int)m.vertices.size();
    m.vertices.push_back(c0 / (double)n);
    int end_c = (int)m.vertices.size();
    m.vertices.push_back(c1 / (double)n);

    auto vid = [n](size_t ring, size_t k) { return (int)(ring * n + k % n); };
    for (size_t i = 0; i + 1 < R; ++i)
        for (size_t k = 0; k < n; ++k) {
            m.triangles.push_back({vid(i, k), vid(i, k + 1), vid(i + 1, k + 1)});
            m.triangles.push_back({vid(i, k), vid(i + 1, k + 1), vid(i + 1, k)});
        }
    for (size_t k = 0; k < n; ++k) {
        m.triangles.push_back({start_c, vid(0, k + 1), vid(0, k)});
        m.triangles.push_back({end_c, vid(R - 1, k), vid(R - 1, k + 1)});
    }
    return m;
}

// ---- signed distance oracle ------------------------------------------------

namespace {

// squared distance from p to triangle (a, b, c); Ericson, Real-Time Collision
// Detection, closest-point-on-triangle
double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return ap.norm2();
    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return bp.norm2();
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double t = d1 / (d1 - d3);
        return (ap - ab * t).norm2();
    }
    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return cp.norm2();
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double t = d2 / (d2 - d6);
        return (ap - ac * t).norm2();
    }
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * t).norm2();
    }
    double denom = 1.0 / (va + vb + vc);
    double s = vb * denom, t = vc * denom;
    return (ap - ab * s - ac * t).norm2();
}

enum class RayHit { Miss, Hit, Ambiguous };

RayHit ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                    const Vec3& v2, double scale) {
    constexpr double eps_b = 1e-9;  // barycentric margin flagged as a grazing hit
    Vec3 e1 = v1 - v0, e2 = v2 - v0;
    Vec3 pvec = dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < 1e-12 * scale * scale) {
        // near-parallel: ambiguous only if the ray passes close to the triangle
        Vec3 centroid = (v0 + v1 + v2) / 3.0;
        double r = std::sqrt(std::max({(v0 - centroid).norm2(), (v1 - centroid).norm2(),
                                       (v2 - centroid).norm2()}));
        Vec3 oc = centroid - orig;
        double along = oc.dot(dir);
        double perp2 = oc.norm2() - along * along;
        if (along > -r && perp2 < r * r * 1.0201) return RayHit::Ambiguous;
        return RayHit::Miss;
    }
    double inv = 1.0 / det;
    Vec3 tvec = orig - v0;
    double u = tvec.dot(pvec) * inv;
    if (u < -eps_b || u > 1 + eps_b) return RayHit::Miss;
    Vec3 qvec = tvec.cross(e1);
    double w = dir.dot(qvec) * inv;
    if (w < -eps_b || u + w > 1 + eps_b) return RayHit::Miss;
    double t = e2.dot(qvec) * inv;
    double eps_t = 1e-9 * scale;
    if (t < -eps_t) return RayHit::Miss;
    if (t < eps_t || u < eps_b || w < eps_b || u + w > 1 - eps_b) return RayHit::Ambiguous;
    return RayHit::Hit;
}

}  // namespace

MeshSdf::MeshSdf(const Mesh& mesh) : mesh_(mesh) {
    auto rep = mesh_watertight(mesh_);
    if (!rep.is_watertight)
        throw std::runtime_error("signed distance oracle requires a watertight mesh (" +
                                 std::to_string(rep.boundary_edges) + " boundary edges, " +
                                 std::to_string(rep.non_manifold_edges) + " non-manifold)");
}

double MeshSdf::operator()(const WorldPoint& p) const {
    double best2 = std::numeric_limits<double>::max();
    double scale = 0;
    for (const auto& t : mesh_.triangles) {
        const Vec3 &a = mesh_.vertices[t[0]], &b = mesh_.vertices[t[1]],
                   &c = mesh_.vertices[t[2]];
        best2 = std::min(best2, point_triangle_dist2(p, a, b, c));
    }
    // points on the surface have no meaningful sign, and a ray from one grazes
    // the mesh in every direction
    if (best2 < 1e-20) return 0.0;
    for (const auto& v : mesh_.vertices) scale = std::max(scale, (v - p).norm2());
    scale = std::sqrt(scale);
    if (scale < 1e-12) scale = 1.0;

    Rng rng(0x5df0a11u);
    for (int attempt = 0; attempt < 32; ++attempt) {
        Vec3 dir;
        if (attempt == 0) dir = {1, 0, 0};
        else {
            // random unit direction; deterministic across calls
            do {
                dir = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            } while (dir.norm2() < 1e-4 || dir.norm2() > 1.0);
            dir = dir.normalized();
        }
        int crossings = 0;
        bool ambiguous = false;
        for (const auto& t : mesh_.triangles) {
            RayHit h = ray_triangle(p, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                    mesh_.vertices[t[2]], scale);
            if (h == RayHit::Ambiguous) { ambiguous = true; break; }
            if (h == RayHit::Hit) ++crossings;
        }
        if (ambiguous) continue;
        double d = std::sqrt(best2);
        return (crossings % 2 == 1) ? -d : d;
    }
    throw std::runtime_error("sdf sign ray cast failed: every direction grazed the mesh");
}

double sdf_oracle(const Mesh& mesh, const WorldPoint& p) { return MeshSdf(mesh)(p); }

// ---- neural field ----------------------------------------------------------

NeuralField::NeuralField() {
    W1_.assign(H * 3, 0.0f); b1_.assign(H, 0.0f);
    W2_.assign(H * H, 0.0f); b2_.assign(H, 0.0f);
    W3_.assign(H * H, 0.0f); b3_.assign(H, 0.0f);
    W4_.assign(H, 0.0f); b4_.assign(1, 0.0f);
    gW1_.assign(H * 3, 0.0f); gb1_.assign(H, 0.0f);
    gW2_.assign(H * H, 0.0f); gb2_.assign(H, 0.0f);
    gW3_.assign(H * H, 0.0f); gb3_.assign(H, 0.0f);
    gW4_.assign(H, 0.0f); gb4_.assign(1, 0.0f);
}

NeuralField::NeuralField(uint64_t seed, double omega0) : NeuralField() {
    omega0_ = omega0;
    Rng rng(seed);
    // first layer uniform 1/fan_in (bounded pre-activations for the sine)
    for (auto& w : W1_) w = (float)rng.uniform(-1.0 / 3, 1.0 / 3);
    double he = std::sqrt(2.0 / H);
    for (auto& w : W2_) w = (float)(rng.normal() * he);
    for (auto& w : W3_) w = (float)(rng.normal() * he);
    for (auto& w : W4_) w = (float)(rng.normal() * std::sqrt(1.0 / H));
}

void NeuralField::set_normalization(const Vec3& center, double scale) {
    if (!(scale > 0)) throw std::runtime_error("field normalization scale must be > 0");
    center_ = center;
    scale_ = scale;
}

float NeuralField::eval_normalized(const float x[3]) const {
    float a1[H], a2[H], a3[H];
    for (int i = 0; i < H; ++i) {
        float z = W1_[i * 3] * x[0] + W1_[i * 3 + 1] * x[1] + W1_[i * 3 + 2] * x[2] + b1_[i];
        a1[i] = std::sin((float)omega0_ * z);
    }
    for (int i = 0; i < H; ++i) {
        float z = b2_[i];
        const float* w = &W2_[i * H];
        for (int j = 0; j < H; ++j) z += w[j] * a1[j];
        a2[i] = z > 0 ? z : 0;
    }
    for (int i = 0; i < H; ++i) {
        float z = b3_[i];
        const float* w = &W3_[i * H];
        for (int j = 0; j < H; ++j) z += w[j] * a2[j];
        a3[i] = z > 0 ? z : 0;
    }
    float out = b4_[0];
    for (int j = 0; j < H; ++j) out += W4_[j] * a3[j];
    return out;
}

double NeuralField::operator()(const WorldPoint& p) const {
    float x[3] = {(float)((p.x - center_.x) / scale_), (float)((p.y - center_.y) / scale_),
                  (float)((p.z - center_.z) / scale_)};
    return eval_normalized(x);
}

std::vector<double> NeuralField::forward_batch(const std::vector<WorldPoint>& pts) {
    batch_ = pts.size();
    X_.resize(batch_ * 3);
    Z1_.resize(batch_ * H);
    A1_.resize(batch_ * H);
    A2_.resize(batch_ * H);
    A3_.resize(batch_ * H);
    std::vector<double> out(batch_);
    for (size_t b = 0; b < batch_; ++b) {
        float* x = &X_[b * 3];
        x[0] = (float)((pts[b].x - center_.x) / scale_);
        x[1] = (float)((pts[b].y - center_.y) / scale_);
        x[2] = (float)((pts[b].z - center_.z) / scale_);
        float *z1 = &Z1_[b * H], *a1 = &A1_[b * H], *a2 = &A2_[b * H], *a3 = &A3_[b * H];
        for (int i = 0; i < H; ++i) {
            z1[i] = W1_[i * 3] * x[0] + W1_[i * 3 + 1] * x[1] + W1_[i * 3 + 2] * x[2] + b1_[i];
            a1[i] = std::sin((float)omega0_ * z1[i]);
        }
        for (int i = 0; i < H; ++i) {
            float z = b2_[i];
            const float* w = &W2_[i * H];
            for (int j = 0; j < H; ++j) z += w[j] * a1[j];
            a2[i] = z > 0 ? z : 0;
        }
        for (int i = 0; i < H; ++i) {
            float z = b3_[i];
            const float* w = &W3_[i * H];
            for (int j = 0; j < H; ++j) z += w[j] * a2[j];
            a3[i] = z > 0 ? z : 0;
        }
        float o = b4_[0];
        for (int j = 0; j < H; ++j) o += W4_[j] * a3[j];
        out[b] = o;
    }
    return out;
}

void NeuralField::backward_batch(const std::vector<double>& dout) {
    if (dout.size() != batch_)
        throw std::runtime_error("backward_batch: gradient size does not match last forward");
    float dz2[H], dz3[H], da[H];
    for (size_t b = 0; b < batch_; ++b) {
        const float* x = &X_[b * 3];
        const float *z1 = &Z1_[b * H], *a1 = &A1_[b * H], *a2 = &A2_[b * H], *a3 = &A3_[b * H];
        float g = (float)dout[b];
        gb4_[0] += g;
        for (int j = 0; j < H; ++j) {
            gW4_[j] += g * a3[j];
            dz3[j] = a3[j] > 0 ? g * W4_[j] : 0.0f;
        }
        for (int i = 0; i < H; ++i) {
            if (dz3[i] == 0.0f) continue;
            float* gw = &gW3_[i * H];
            for (int j = 0; j < H; ++j) gw[j] += dz3[i] * a2[j];
            gb3_[i] += dz3[i];
        }
        for (int j = 0; j < H; ++j) {
            float acc = 0;
            for (int i = 0; i < H; ++i) acc += dz3[i] * W3_[i * H + j];
            dz2[j] = a2[j] > 0 ? acc : 0.0f;
        }
        for (int i = 0; i < H; ++i) {
            if (dz2[i] == 0.0f) continue;
            float* gw = &gW2_[i * H];
            for (int j = 0; j < H; ++j) gw[j] += dz2[i] * a1[j];
            gb2_[i] += dz2[i];
        }
        for (int j = 0; j < H; ++j) {
            float acc = 0;
            for (int i = 0; i < H; ++i) acc += dz2[i] * W2_[i * H + j];
            da[j] = acc * (float)omega0_ * std::cos((float)omega0_ * z1[j]);
        }
        for (int i = 0; i < H; ++i) {
            gW1_[i * 3] += da[i] * x[0];
            gW1_[i * 3 + 1] += da[i] * x[1];
            gW1_[i * 3 + 2] += da[i] * x[2];
            gb1_[i] += da[i];
        }
    }
}

std::vector<ParamRef> NeuralField::params() {
    return {{"field.W1", W1_.data(), gW1_.data(), W1_.size()},
            {"field.b1", b1_.data(), gb1_.data(), b1_.size()},
            {"field.W2", W2_.data(), gW2_.data(), W2_.size()},
            {"field.b2", b2_.data(), gb2_.data(), b2_.size()},
            {"field.W3", W3_.data(), gW3_.data(), W3_.size()},
            {"field.b3", b3_.data(), gb3_.data(), b3_.size()},
            {"field.W4", W4_.data(), gW4_.data(), W4_.size()},
            {"field.b4", b4_.data(), gb4_.data(), b4_.size()}};
}

void NeuralField::zero_grad() {
    for (auto* v : {&gW1_, &gb1_, &gW2_, &gb2_, &gW3_, &gb3_, &gW4_, &gb4_})
        std::fill(v->begin(), v->end(), 0.0f);
}

void NeuralField::save(const std::string& path) const {
    json meta{{"kind", "neural_field"},
              {"omega0", omega0_},
              {"center", {center_.x, center_.y, center_.z}},
              {"scale", scale_}};
    auto* self = const_cast<NeuralField*>(this);
    save_checkpoint(path, self->params(), meta.dump());
}

NeuralField NeuralField::load(const std::string& path) {
    NeuralField f;
    std::string meta = load_checkpoint(path, f.params());
    json m = json::parse(meta);
    f.omega0_ = m.at("omega0").get<double>();
    auto c = m.at("center");
    f.center_ = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    f.scale_ = m.at("scale").get<double>();
    return f;
}

// ---- fitting ---------------------------------------------------------------

NeuralField fit_neural_field(const TrackedVessel& v, const FieldTrainConfig& cfg,
                             FieldFitReport* report) {
    bool folded = false;
    Mesh loft = loft_contours(v, &folded);
    MeshSdf oracle(loft);

    struct Sample {
        WorldPoint p;
        double target;
    };
    std::vector<Sample> data;
    std::vector<WorldPoint> holdout;
    size_t idx = 0;
    for (const auto& tc : v.contours)
        for (const auto& p : tc.contour.points()) {
            if (cfg.holdout_stride > 0 && idx % (size_t)cfg.holdout_stride == 0)
                holdout.push_back(p);
            else
                data.push_back({p, 0.0});
            ++idx;
        }

    Vec3 lo = loft.vertices[0], hi = loft.vertices[0];
    for (const auto& p : loft.vertices) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    Vec3 center = (lo + hi) * 0.5;
    Vec3 half = (hi - lo) * (0.5 * cfg.bbox_scale);
    double scale = std::max({half.x, half.y, half.z, 1e-6});

    Rng rng(cfg.seed);
    Rng box_rng = rng.fork("box");
    size_t base = data.size();
    data.resize(base + (size_t)cfg.oracle_samples);
    for (int i = 0; i < cfg.oracle_samples; ++i)
        data[base + i].p = center + Vec3{box_rng.uniform(-half.x, half.x),
                                         box_rng.uniform(-half.y, half.y),
                                         box_rng.uniform(-half.z, half.z)};
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < cfg.oracle_samples; ++i)
        data[base + i].target = oracle(data[base + i].p);

    NeuralField field(rng.fork("init").next_u64(), 12.0);
    field.set_normalization(center, scale);
    Adam opt(cfg.lr);
    opt.register_params(field.params());

    Rng batch_rng = rng.fork("batch");
    Rng eik_rng = rng.fork("eikonal");
    double tail_data = 0, tail_eik = 0;
    int tail_n = 0;
    std::vector<WorldPoint> pts, epts;
    std::vector<double> targets, dout, edout;
    for (int step = 0; step < cfg.steps; ++step) {
        pts.clear();
        targets.clear();
        for (int b = 0; b < cfg.batch; ++b) {
            const Sample& s = data[batch_rng.uniform_index(data.size())];
            pts.push_back(s.p);
            targets.push_back(s.target);
        }
        field.zero_grad();
        auto out = field.forward_batch(pts);
        double loss = 0;
        dout.assign(out.size(), 0.0);
        for (size_t b = 0; b < out.size(); ++b) {
            double r = out[b] - targets[b];
            loss += r * r;
            dout[b] = 2.0 * r / (double)out.size();
        }
        loss /= (double)out.size();
        field.backward_batch(dout);

        double eloss = 0;
        if (cfg.eikonal_batch > 0 && cfg.eikonal_weight > 0) {
            int m = cfg.eikonal_batch;
            double h = cfg.eikonal_h;
            epts.clear();
            for (int b = 0; b < m; ++b) {
                WorldPoint p = center + Vec3{eik_rng.uniform(-half.x, half.x),
                                             eik_rng.uniform(-half.y, half.y),
                                             eik_rng.uniform(-half.z, half.z)};
                for (int ax = 0; ax < 3; ++ax) {
                    Vec3 d = ax == 0 ? Vec3{h, 0, 0} : ax == 1 ? Vec3{0, h, 0} : Vec3{0, 0, h};
                    epts.push_back(p + d);
                    epts.push_back(p - d);
                }
            }
            auto ev = field.forward_batch(epts);
            edout.assign(ev.size(), 0.0);
            for (int b = 0; b < m; ++b) {
                Vec3 g{(ev[b * 6 + 0] - ev[b * 6 + 1]) / (2 * h),
                       (ev[b * 6 + 2] - ev[b * 6 + 3]) / (2 * h),
                       (ev[b * 6 + 4] - ev[b * 6 + 5]) / (2 * h)};
                double gn = g.norm();
                eloss += (gn - 1) * (gn - 1);
                if (gn < 1e-9) continue;
                double c = cfg.eikonal_weight * 2.0 * (gn - 1) / (gn * m * 2 * h);
                for (int ax = 0; ax < 3; ++ax) {
                    edout[b * 6 + ax * 2] = c * g[ax];
                    edout[b * 6 + ax * 2 + 1] = -c * g[ax];
                }
            }
            eloss /= m;
            field.backward_batch(edout);
        }
        if (!std::isfinite(loss) || !std::isfinite(eloss))
            throw std::runtime_error("neural field training diverged at step " +
                                     std::to_string(step));
        opt.step();
        if (step >= cfg.steps - 100) {
            tail_data += loss;
            tail_eik += eloss;
            ++tail_n;
        }
    }

    if (report) {
        report->data_loss = tail_n ? tail_data / tail_n : 0;
        report->eikonal_loss = tail_n ? tail_eik / tail_n : 0;
        report->loft_folded = folded;
        report->holdout_points = holdout.size();
        double acc = 0;
        for (const auto& p : holdout) acc += std::abs(field(p));
        report->holdout_mean_abs_mm = holdout.empty() ? 0 : acc / holdout.size();
    }
    return field;
}

// ---- blending --------------------------------------------------------------

double smooth_min(const std::vector<double>& vals, double k) {
    if (vals.empty()) throw std::runtime_error("smooth_min of an empty list");
    if (!(k > 0)) throw std::runtime_error("smooth_min sharpness k must be > 0");
    double m = *std::min_element(vals.begin(), vals.end());
    double acc = 0;
    for (double v : vals) acc += std::exp(-k * (v - m));
    return m - std::log(acc) / k;
}

SdfFn blend_fields(std::vector<const NeuralField*> fields, double k) {
    if (fields.empty()) throw std::runtime_error("blend_fields needs at least one field");
    if (!(k > 0)) throw std::runtime_error("blend sharpness k must be > 0");
    for (const auto* f : fields)
        if (!f) throw std::runtime_error("blend_fields: null field");
    return [fields = std::move(fields), k](const WorldPoint& p) {
        double m = std::numeric_limits<double>::max();
        for (const auto* f : fields) m = std::min(m, (*f)(p));
        double acc = 0;
        for (const auto* f : fields) acc += std::exp(-k * ((*f)(p)-m));
        return m - std::log(acc) / k;
    };
}

SdfFn clamp_to_domain(const NeuralField& field) {
    const NeuralField* f = &field;
    Vec3 c = field.norm_center();
    double s = field.norm_scale();
    return [f, c, s](const WorldPoint& p) {
        // signed distance to the normalization cube, negative inside
        Vec3 q{std::abs(p.x - c.x) - s, std::abs(p.y - c.y) - s, std::abs(p.z - c.z) - s};
        Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
        double box = qp.norm() + std::min(0.0, std::max({q.x, q.y, q.z}));
        return std::max((*f)(p), box);
    };
}

SdfFn blend_sdfs(std::vector<SdfFn> fns, double k) {
    if (fns.empty()) throw std::runtime_error("blend_sdfs needs at least one evaluator");
    if (!(k > 0)) throw std::runtime_error("blend sharpness k must be > 0");
    for (const auto& f : fns)
        if (!f) throw std::runtime_error("blend_sdfs: empty evaluator");
    return [fns = std::move(fns), k](const WorldPoint& p) {
        double m = std::numeric_limits<double>::max();
        for (const auto& f : fns) m = std::min(m, f(p));
        double acc = 0;
        for (const auto& f : fns) acc += std::exp(-k * (f(p) - m));
        return m - std::log(acc) / k;
    };
}

// ---- marching cubes --------------------------------------------------------

std::vector<double> sample_sdf_grid_serial(const SdfFn& sdf, const Vec3& bmin,
                                           const std::array<int, 3>& dims, double res) {
    std::vector<double> vals((size_t)dims[0] * dims[1] * dims[2]);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i)
                vals[(size_t)k * dims[0] * dims[1] + (size_t)j * dims[0] + i] =
                    sdf({bmin.x + i * res, bmin.y + j * res, bmin.z + k * res});
    return vals;
}

std::vector<double> sample_sdf_grid(const SdfFn& sdf, const Vec3& bmin,
                                    const std::array<int, 3>& dims, double res) {
    std::vector<double> vals((size_t)dims[0] * dims[1] * dims[2]);
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i)
                vals[(size_t)k * dims[0] * dims[1] + (size_t)j * dims[0] + i] =
                    sdf({bmin.x + i * res, bmin.y + j * res, bmin.z + k * res});
    return vals;
}

namespace {

// classic 256-case lookup tables (Lorensen & Cline via P. Bourke's polygonise)
const int kEdgeTable[256] = {
    0x0,   0x109, 0x203, 0x30a, 0x406, 0x50f, 0x605, 0x70c, 0x80c, 0x905, 0xa0f, 0xb06,
    0xc0a, 0xd03, 0xe09, 0xf00, 0x190, 0x99,  0x393, 0x29a, 0x596, 0x49f, 0x795, 0x69c,
    0x99c, 0x895, 0xb9f, 0xa96, 0xd9a, 0xc93, 0xf99, 0xe90, 0x230, 0x339, 0x33,  0x13a,
    0x636, 0x73f, 0x435, 0x53c, 0xa3c, 0xb35, 0x83f, 0x936, 0xe3a, 0xf33, 0xc39, 0xd30,
    0x3a0, 0x2a9, 0x1a3, 0xaa,  0x7a6, 0x6af, 0x5a5, 0x4ac, 0xbac, 0xaa5, 0x9af, 0x8a6,
    0xfaa, 0xea3, 0xda9, 0xca0, 0x460, 0x569, 0x663, 0x76a, 0x66,  0x16f, 0x265, 0x36c,
    0xc6c, 0xd65, 0xe6f, 0xf66, 0x86a, 0x963, 0xa69, 0xb60, 0x5f0, 0x4f9, 0x7f3, 0x6fa,
    0x1f6, 0xff,  0x3f5, 0x2fc, 0xdfc, 0xcf5, 0xfff, 0xef6, 0x9fa, 0x8f3, 0xbf9, 0xaf0,
    0x650, 0x759, 0x453, 0x55a, 0x256, 0x35f, 0x55,  0x15c, 0xe5c, 0xf55, 0xc5f, 0xd56,
    0xa5a, 0xb53, 0x859, 0x950, 0x7c0, 0x6c9, 0x5c3, 0x4ca, 0x3c6, 0x2cf, 0x1c5, 0xcc,
    0xfcc, 0xec5, 0xdcf, 0xcc6, 0xbca, 0xac3, 0x9c9, 0x8c0, 0x8c0, 0x9c9, 0xac3, 0xbca,
    0xcc6, 0xdcf, 0xec5, 0xfcc, 0xcc,  0x1c5, 0x2cf, 0x3c6, 0x4ca, 0x5c3, 0x6c9, 0x7c0,
    0x950, 0x859, 0xb53, 0xa5a, 0xd56, 0xc5f, 0xf55, 0xe5c, 0x15c, 0x55,  0x35f, 0x256,
    0x55a, 0x453, 0x759, 0x650, 0xaf0, 0xbf9, 0x8f3, 0x9fa, 0xef6, 0xfff, 0xcf5, 0xdfc,
    0x2fc, 0x3f5, 0xff,  0x1f6, 0x6fa, 0x7f3, 0x4f9, 0x5f0, 0xb60, 0xa69, 0x963, 0x86a,
    0xf66, 0xe6f, 0xd65, 0xc6c, 0x36c, 0x265, 0x16f, 0x66,  0x76a, 0x663, 0x569, 0x460,
    0xca0, 0xda9, 0xea3, 0xfaa, 0x8a6, 0x9af, 0xaa5, 0xbac, 0x4ac, 0x5a5, 0x6af, 0x7a6,
    0xaa,  0x1a3, 0x2a9, 0x3a0, 0xd30, 0xc39, 0xf33, 0xe3a, 0x936, 0x83f, 0xb35, 0xa3c,
    0x53c, 0x435, 0x73f, 0x636, 0x13a, 0x33,  0x339, 0x230, 0xe90, 0xf99, 0xc93, 0xd9a,
    0xa96, 0xb9f, 0x895, 0x99c, 0x69c, 0x795, 0x49f, 0x596, 0x29a, 0x393, 0x99,  0x190,
    0xf00, 0xe09, 0xd03, 0xc0a, 0xb06, 0xa0f, 0x905, 0x80c, 0x70c, 0x605, 0x50f, 0x406,
    0x30a, 0x203, 0x109, 0x0};

const int kTriTable[256][16] = {
    {-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 1, 9, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 8, 3, 9, 8, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, 1, 2, 10, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 2, 10, 0, 2, 9, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {2, 8, 3, 2, 10, 8, 10, 9, 8, -1, -1, -1, -1, -1, -1, -1},
    {3, 11, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 11, 2, 8, 11, 0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 9, 0, 2, 3, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 11, 2, 1, 9, 11, 9, 8, 11, -1, -1, -1, -1, -1, -1, -1},
    {3, 10, 1, 11, 10, 3, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 10, 1, 0, 8, 10, 8, 11, 10, -1, -1, -1, -1, -1, -1, -1},
    {3, 9, 0, 3, 11, 9, 11, 10, 9, -1, -1, -1, -1, -1, -1, -1},
    {9, 8, 10, 10, 8, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 7, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 3, 0, 7, 3, 4, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 1, 9, 8, 4, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 1, 9, 4, 7, 1, 7, 3, 1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, 8, 4, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 4, 7, 3, 0, 4, 1, 2, 10, -1, -1, -1, -1, -1, -1, -1},
    {9, 2, 10, 9, 0, 2, 8, 4, 7, -1, -1, -1, -1, -1, -1, -1},
    {2, 10, 9, 2, 9, 7, 2, 7, 3, 7, 9, 4, -1, -1, -1, -1},
    {8, 4, 7, 3, 11, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {11, 4, 7, 11, 2, 4, 2, 0, 4, -1, -1, -1, -1, -1, -1, -1},
    {9, 0, 1, 8, 4, 7, 2, 3, 11, -1, -1, -1, -1, -1, -1, -1},
    {4, 7, 11, 9, 4, 11, 9, 11, 2, 9, 2, 1, -1, -1, -1, -1},
    {3, 10, 1, 3, 11, 10, 7, 8, 4, -1, -1, -1, -1, -1, -1, -1},
    {1, 11, 10, 1, 4, 11, 1, 0, 4, 7, 11, 4, -1, -1, -1, -1},
    {4, 7, 8, 9, 0, 11, 9, 11, 10, 11, 0, 3, -1, -1, -1, -1},
    {4, 7, 11, 4, 11, 9, 9, 11, 10, -1, -1, -1, -1, -1, -1, -1},
    {9, 5, 4, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 5, 4, 0, 8, 3, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 5, 4, 1, 5, 0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {8, 5, 4, 8, 3, 5, 3, 1, 5, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, 9, 5, 4, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 0, 8, 1, 2, 10, 4, 9, 5, -1, -1, -1, -1, -1, -1, -1},
    {5, 2, 10, 5, 4, 2, 4, 0, 2, -1, -1, -1, -1, -1, -1, -1},
    {2, 10, 5, 3, 2, 5, 3, 5, 4, 3, 4, 8, -1, -1, -1, -1},
    {9, 5, 4, 2, 3, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 11, 2, 0, 8, 11, 4, 9, 5, -1, -1, -1, -1, -1, -1, -1},
    {0, 5, 4, 0, 1, 5, 2, 3, 11, -1, -1, -1, -1, -1, -1, -1},
    {2, 1, 5, 2, 5, 8, 2, 8, 11, 4, 8, 5, -1, -1, -1, -1},
    {10, 3, 11, 10, 1, 3, 9, 5, 4, -1, -1, -1, -1, -1, -1, -1},
    {4, 9, 5, 0, 8, 1, 8, 10, 1, 8, 11, 10, -1, -1, -1, -1},
    {5, 4, 0, 5, 0, 11, 5, 11, 10, 11, 0, 3, -1, -1, -1, -1},
    {5, 4, 8, 5, 8, 10, 10, 8, 11, -1, -1, -1, -1, -1, -1, -1},
    {9, 7, 8, 5, 7, 9, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 3, 0, 9, 5, 3, 5, 7, 3, -1, -1, -1, -1, -1, -1, -1},
    {0, 7, 8, 0, 1, 7, 1, 5, 7, -1, -1, -1, -1, -1, -1, -1},
    {1, 5, 3, 3, 5, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 7, 8, 9, 5, 7, 10, 1, 2, -1, -1, -1, -1, -1, -1, -1},
    {10, 1, 2, 9, 5, 0, 5, 3, 0, 5, 7, 3, -1, -1, -1, -1},
    {8, 0, 2, 8, 2, 5, 8, 5, 7, 10, 5, 2, -1, -1, -1, -1},
    {2, 10, 5, 2, 5, 3, 3, 5, 7, -1, -1, -1, -1, -1, -1, -1},
    {7, 9, 5, 7, 8, 9, 3, 11, 2, -1, -1, -1, -1, -1, -1, -1},
    {9, 5, 7, 9, 7, 2, 9, 2, 0, 2, 7, 11, -1, -1, -1, -1},
    {2, 3, 11, 0, 1, 8, 1, 7, 8, 1, 5, 7, -1, -1, -1, -1},
    {11, 2, 1, 11, 1, 7, 7, 1, 5, -1, -1, -1, -1, -1, -1, -1},
    {9, 5, 8, 8, 5, 7, 10, 1, 3, 10, 3, 11, -1, -1, -1, -1},
    {5, 7, 0, 5, 0, 9, 7, 11, 0, 1, 0, 10, 11, 10, 0, -1},
    {11, 10, 0, 11, 0, 3, 10, 5, 0, 8, 0, 7, 5, 7, 0, -1},
    {11, 10, 5, 7, 11, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {10, 6, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, 5, 10, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 0, 1, 5, 10, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 8, 3, 1, 9, 8, 5, 10, 6, -1, -1, -1, -1, -1, -1, -1},
    {1, 6, 5, 2, 6, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 6, 5, 1, 2, 6, 3, 0, 8, -1, -1, -1, -1, -1, -1, -1},
    {9, 6, 5, 9, 0, 6, 0, 2, 6, -1, -1, -1, -1, -1, -1, -1},
    {5, 9, 8, 5, 8, 2, 5, 2, 6, 3, 2, 8, -1, -1, -1, -1},
    {2, 3, 11, 10, 6, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {11, 0, 8, 11, 2, 0, 10, 6, 5, -1, -1, -1, -1, -1, -1, -1},
    {0, 1, 9, 2, 3, 11, 5, 10, 6, -1, -1, -1, -1, -1, -1, -1},
    {5, 10, 6, 1, 9, 2, 9, 11, 2, 9, 8, 11, -1, -1, -1, -1},
    {6, 3, 11, 6, 5, 3, 5, 1, 3, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 11, 0, 11, 5, 0, 5, 1, 5, 11, 6, -1, -1, -1, -1},
    {3, 11, 6, 0, 3, 6, 0, 6, 5, 0, 5, 9, -1, -1, -1, -1},
    {6, 5, 9, 6, 9, 11, 11, 9, 8, -1, -1, -1, -1, -1, -1, -1},
    {5, 10, 6, 4, 7, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 3, 0, 4, 7, 3, 6, 5, 10, -1, -1, -1, -1, -1, -1, -1},
    {1, 9, 0, 5, 10, 6, 8, 4, 7, -1, -1, -1, -1, -1, -1, -1},
    {10, 6, 5, 1, 9, 7, 1, 7, 3, 7, 9, 4, -1, -1, -1, -1},
    {6, 1, 2, 6, 5, 1, 4, 7, 8, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 5, 5, 2, 6, 3, 0, 4, 3, 4, 7, -1, -1, -1, -1},
    {8, 4, 7, 9, 0, 5, 0, 6, 5, 0, 2, 6, -1, -1, -1, -1},
    {7, 3, 9, 7, 9, 4, 3, 2, 9, 5, 9, 6, 2, 6, 9, -1},
    {3, 11, 2, 7, 8, 4, 10, 6, 5, -1, -1, -1, -1, -1, -1, -1},
    {5, 10, 6, 4, 7, 2, 4, 2, 0, 2, 7, 11, -1, -1, -1, -1},
    {0, 1, 9, 4, 7, 8, 2, 3, 11, 5, 10, 6, -1, -1, -1, -1},
    {9, 2, 1, 9, 11, 2, 9, 4, 11, 7, 11, 4, 5, 10, 6, -1},
    {8, 4, 7, 3, 11, 5, 3, 5, 1, 5, 11, 6, -1, -1, -1, -1},
    {5, 1, 11, 5, 11, 6, 1, 0, 11, 7, 11, 4, 0, 4, 11, -1},
    {0, 5, 9, 0, 6, 5, 0, 3, 6, 11, 6, 3, 8, 4, 7, -1},
    {6, 5, 9, 6, 9, 11, 4, 7, 9, 7, 11, 9, -1, -1, -1, -1},
    {10, 4, 9, 6, 4, 10, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 10, 6, 4, 9, 10, 0, 8, 3, -1, -1, -1, -1, -1, -1, -1},
    {10, 0, 1, 10, 6, 0, 6, 4, 0, -1, -1, -1, -1, -1, -1, -1},
    {8, 3, 1, 8, 1, 6, 8, 6, 4, 6, 1, 10, -1, -1, -1, -1},
    {1, 4, 9, 1, 2, 4, 2, 6, 4, -1, -1, -1, -1, -1, -1, -1},
    {3, 0, 8, 1, 2, 9, 2, 4, 9, 2, 6, 4, -1, -1, -1, -1},
    {0, 2, 4, 4, 2, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {8, 3, 2, 8, 2, 4, 4, 2, 6, -1, -1, -1, -1, -1, -1, -1},
    {10, 4, 9, 10, 6, 4, 11, 2, 3, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 2, 2, 8, 11, 4, 9, 10, 4, 10, 6, -1, -1, -1, -1},
    {3, 11, 2, 0, 1, 6, 0, 6, 4, 6, 1, 10, -1, -1, -1, -1},
    {6, 4, 1, 6, 1, 10, 4, 8, 1, 2, 1, 11, 8, 11, 1, -1},
    {9, 6, 4, 9, 3, 6, 9, 1, 3, 11, 6, 3, -1, -1, -1, -1},
    {8, 11, 1, 8, 1, 0, 11, 6, 1, 9, 1, 4, 6, 4, 1, -1},
    {3, 11, 6, 3, 6, 0, 0, 6, 4, -1, -1, -1, -1, -1, -1, -1},
    {6, 4, 8, 11, 6, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {7, 10, 6, 7, 8, 10, 8, 9, 10, -1, -1, -1, -1, -1, -1, -1},
    {0, 7, 3, 0, 10, 7, 0, 9, 10, 6, 7, 10, -1, -1, -1, -1},
    {10, 6, 7, 1, 10, 7, 1, 7, 8, 1, 8, 0, -1, -1, -1, -1},
    {10, 6, 7, 10, 7, 1, 1, 7, 3, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 6, 1, 6, 8, 1, 8, 9, 8, 6, 7, -1, -1, -1, -1},
    {2, 6, 9, 2, 9, 1, 6, 7, 9, 0, 9, 3, 7, 3, 9, -1},
    {7, 8, 0, 7, 0, 6, 6, 0, 2, -1, -1, -1, -1, -1, -1, -1},
    {7, 3, 2, 6, 7, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {2, 3, 11, 10, 6, 8, 10, 8, 9, 8, 6, 7, -1, -1, -1, -1},
    {2, 0, 7, 2, 7, 11, 0, 9, 7, 6, 7, 10, 9, 10, 7, -1},
    {1, 8, 0, 1, 7, 8, 1, 10, 7, 6, 7, 10, 2, 3, 11, -1},
    {11, 2, 1, 11, 1, 7, 10, 6, 1, 6, 7, 1, -1, -1, -1, -1},
    {8, 9, 6, 8, 6, 7, 9, 1, 6, 11, 6, 3, 1, 3, 6, -1},
    {0, 9, 1, 11, 6, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {7, 8, 0, 7, 0, 6, 3, 11, 0, 11, 6, 0, -1, -1, -1, -1},
    {7, 11, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {7, 6, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 0, 8, 11, 7, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 1, 9, 11, 7, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {8, 1, 9, 8, 3, 1, 11, 7, 6, -1, -1, -1, -1, -1, -1, -1},
    {10, 1, 2, 6, 11, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, 3, 0, 8, 6, 11, 7, -1, -1, -1, -1, -1, -1, -1},
    {2, 9, 0, 2, 10, 9, 6, 11, 7, -1, -1, -1, -1, -1, -1, -1},
    {6, 11, 7, 2, 10, 3, 10, 8, 3, 10, 9, 8, -1, -1, -1, -1},
    {7, 2, 3, 6, 2, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {7, 0, 8, 7, 6, 0, 6, 2, 0, -1, -1, -1, -1, -1, -1, -1},
    {2, 7, 6, 2, 3, 7, 0, 1, 9, -1, -1, -1, -1, -1, -1, -1},
    {1, 6, 2, 1, 8, 6, 1, 9, 8, 8, 7, 6, -1, -1, -1, -1},
    {10, 7, 6, 10, 1, 7, 1, 3, 7, -1, -1, -1, -1, -1, -1, -1},
    {10, 7, 6, 1, 7, 10, 1, 8, 7, 1, 0, 8, -1, -1, -1, -1},
    {0, 3, 7, 0, 7, 10, 0, 10, 9, 6, 10, 7, -1, -1, -1, -1},
    {7, 6, 10, 7, 10, 8, 8, 10, 9, -1, -1, -1, -1, -1, -1, -1},
    {6, 8, 4, 11, 8, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 6, 11, 3, 0, 6, 0, 4, 6, -1, -1, -1, -1, -1, -1, -1},
    {8, 6, 11, 8, 4, 6, 9, 0, 1, -1, -1, -1, -1, -1, -1, -1},
    {9, 4, 6, 9, 6, 3, 9, 3, 1, 11, 3, 6, -1, -1, -1, -1},
    {6, 8, 4, 6, 11, 8, 2, 10, 1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, 3, 0, 11, 0, 6, 11, 0, 4, 6, -1, -1, -1, -1},
    {4, 11, 8, 4, 6, 11, 0, 2, 9, 2, 10, 9, -1, -1, -1, -1},
    {10, 9, 3, 10, 3, 2, 9, 4, 3, 11, 3, 6, 4, 6, 3, -1},
    {8, 2, 3, 8, 4, 2, 4, 6, 2, -1, -1, -1, -1, -1, -1, -1},
    {0, 4, 2, 4, 6, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 9, 0, 2, 3, 4, 2, 4, 6, 4, 3, 8, -1, -1, -1, -1},
    {1, 9, 4, 1, 4, 2, 2, 4, 6, -1, -1, -1, -1, -1, -1, -1},
    {8, 1, 3, 8, 6, 1, 8, 4, 6, 6, 10, 1, -1, -1, -1, -1},
    {10, 1, 0, 10, 0, 6, 6, 0, 4, -1, -1, -1, -1, -1, -1, -1},
    {4, 6, 3, 4, 3, 8, 6, 10, 3, 0, 3, 9, 10, 9, 3, -1},
    {10, 9, 4, 6, 10, 4, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 9, 5, 7, 6, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, 4, 9, 5, 11, 7, 6, -1, -1, -1, -1, -1, -1, -1},
    {5, 0, 1, 5, 4, 0, 7, 6, 11, -1, -1, -1, -1, -1, -1, -1},
    {11, 7, 6, 8, 3, 4, 3, 5, 4, 3, 1, 5, -1, -1, -1, -1},
    {9, 5, 4, 10, 1, 2, 7, 6, 11, -1, -1, -1, -1, -1, -1, -1},
    {6, 11, 7, 1, 2, 10, 0, 8, 3, 4, 9, 5, -1, -1, -1, -1},
    {7, 6, 11, 5, 4, 10, 4, 2, 10, 4, 0, 2, -1, -1, -1, -1},
    {3, 4, 8, 3, 5, 4, 3, 2, 5, 10, 5, 2, 11, 7, 6, -1},
    {7, 2, 3, 7, 6, 2, 5, 4, 9, -1, -1, -1, -1, -1, -1, -1},
    {9, 5, 4, 0, 8, 6, 0, 6, 2, 6, 8, 7, -1, -1, -1, -1},
    {3, 6, 2, 3, 7, 6, 1, 5, 0, 5, 4, 0, -1, -1, -1, -1},
    {6, 2, 8, 6, 8, 7, 2, 1, 8, 4, 8, 5, 1, 5, 8, -1},
    {9, 5, 4, 10, 1, 6, 1, 7, 6, 1, 3, 7, -1, -1, -1, -1},
    {1, 6, 10, 1, 7, 6, 1, 0, 7, 8, 7, 0, 9, 5, 4, -1},
    {4, 0, 10, 4, 10, 5, 0, 3, 10, 6, 10, 7, 3, 7, 10, -1},
    {7, 6, 10, 7, 10, 8, 5, 4, 10, 4, 8, 10, -1, -1, -1, -1},
    {6, 9, 5, 6, 11, 9, 11, 8, 9, -1, -1, -1, -1, -1, -1, -1},
    {3, 6, 11, 0, 6, 3, 0, 5, 6, 0, 9, 5, -1, -1, -1, -1},
    {0, 11, 8, 0, 5, 11, 0, 1, 5, 5, 6, 11, -1, -1, -1, -1},
    {6, 11, 3, 6, 3, 5, 5, 3, 1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 10, 9, 5, 11, 9, 11, 8, 11, 5, 6, -1, -1, -1, -1},
    {0, 11, 3, 0, 6, 11, 0, 9, 6, 5, 6, 9, 1, 2, 10, -1},
    {11, 8, 5, 11, 5, 6, 8, 0, 5, 10, 5, 2, 0, 2, 5, -1},
    {6, 11, 3, 6, 3, 5, 2, 10, 3, 10, 5, 3, -1, -1, -1, -1},
    {5, 8, 9, 5, 2, 8, 5, 6, 2, 3, 8, 2, -1, -1, -1, -1},
    {9, 5, 6, 9, 6, 0, 0, 6, 2, -1, -1, -1, -1, -1, -1, -1},
    {1, 5, 8, 1, 8, 0, 5, 6, 8, 3, 8, 2, 6, 2, 8, -1},
    {1, 5, 6, 2, 1, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 3, 6, 1, 6, 10, 3, 8, 6, 5, 6, 9, 8, 9, 6, -1},
    {10, 1, 0, 10, 0, 6, 9, 5, 0, 5, 6, 0, -1, -1, -1, -1},
    {0, 3, 8, 5, 6, 10, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {10, 5, 6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {11, 5, 10, 7, 5, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {11, 5, 10, 11, 7, 5, 8, 3, 0, -1, -1, -1, -1, -1, -1, -1},
    {5, 11, 7, 5, 10, 11, 1, 9, 0, -1, -1, -1, -1, -1, -1, -1},
    {10, 7, 5, 10, 11, 7, 9, 8, 1, 8, 3, 1, -1, -1, -1, -1},
    {11, 1, 2, 11, 7, 1, 7, 5, 1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, 1, 2, 7, 1, 7, 5, 7, 2, 11, -1, -1, -1, -1},
    {9, 7, 5, 9, 2, 7, 9, 0, 2, 2, 11, 7, -1, -1, -1, -1},
    {7, 5, 2, 7, 2, 11, 5, 9, 2, 3, 2, 8, 9, 8, 2, -1},
    {2, 5, 10, 2, 3, 5, 3, 7, 5, -1, -1, -1, -1, -1, -1, -1},
    {8, 2, 0, 8, 5, 2, 8, 7, 5, 10, 2, 5, -1, -1, -1, -1},
    {9, 0, 1, 5, 10, 3, 5, 3, 7, 3, 10, 2, -1, -1, -1, -1},
    {9, 8, 2, 9, 2, 1, 8, 7, 2, 10, 2, 5, 7, 5, 2, -1},
    {1, 3, 5, 3, 7, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 7, 0, 7, 1, 1, 7, 5, -1, -1, -1, -1, -1, -1, -1},
    {9, 0, 3, 9, 3, 5, 5, 3, 7, -1, -1, -1, -1, -1, -1, -1},
    {9, 8, 7, 5, 9, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {5, 8, 4, 5, 10, 8, 10, 11, 8, -1, -1, -1, -1, -1, -1, -1},
    {5, 0, 4, 5, 11, 0, 5, 10, 11, 11, 3, 0, -1, -1, -1, -1},
    {0, 1, 9, 8, 4, 10, 8, 10, 11, 10, 4, 5, -1, -1, -1, -1},
    {10, 11, 4, 10, 4, 5, 11, 3, 4, 9, 4, 1, 3, 1, 4, -1},
    {2, 5, 1, 2, 8, 5, 2, 11, 8, 4, 5, 8, -1, -1, -1, -1},
    {0, 4, 11, 0, 11, 3, 4, 5, 11, 2, 11, 1, 5, 1, 11, -1},
    {0, 2, 5, 0, 5, 9, 2, 11, 5, 4, 5, 8, 11, 8, 5, -1},
    {9, 4, 5, 2, 11, 3, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {2, 5, 10, 3, 5, 2, 3, 4, 5, 3, 8, 4, -1, -1, -1, -1},
    {5, 10, 2, 5, 2, 4, 4, 2, 0, -1, -1, -1, -1, -1, -1, -1},
    {3, 10, 2, 3, 5, 10, 3, 8, 5, 4, 5, 8, 0, 1, 9, -1},
    {5, 10, 2, 5, 2, 4, 1, 9, 2, 9, 4, 2, -1, -1, -1, -1},
    {8, 4, 5, 8, 5, 3, 3, 5, 1, -1, -1, -1, -1, -1, -1, -1},
    {0, 4, 5, 1, 0, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {8, 4, 5, 8, 5, 3, 9, 0, 5, 0, 3, 5, -1, -1, -1, -1},
    {9, 4, 5, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 11, 7, 4, 9, 11, 9, 10, 11, -1, -1, -1, -1, -1, -1, -1},
    {0, 8, 3, 4, 9, 7, 9, 11, 7, 9, 10, 11, -1, -1, -1, -1},
    {1, 10, 11, 1, 11, 4, 1, 4, 0, 7, 4, 11, -1, -1, -1, -1},
    {3, 1, 4, 3, 4, 8, 1, 10, 4, 7, 4, 11, 10, 11, 4, -1},
    {4, 11, 7, 9, 11, 4, 9, 2, 11, 9, 1, 2, -1, -1, -1, -1},
    {9, 7, 4, 9, 11, 7, 9, 1, 11, 2, 11, 1, 0, 8, 3, -1},
    {11, 7, 4, 11, 4, 2, 2, 4, 0, -1, -1, -1, -1, -1, -1, -1},
    {11, 7, 4, 11, 4, 2, 8, 3, 4, 3, 2, 4, -1, -1, -1, -1},
    {2, 9, 10, 2, 7, 9, 2, 3, 7, 7, 4, 9, -1, -1, -1, -1},
    {9, 10, 7, 9, 7, 4, 10, 2, 7, 8, 7, 0, 2, 0, 7, -1},
    {3, 7, 10, 3, 10, 2, 7, 4, 10, 1, 10, 0, 4, 0, 10, -1},
    {1, 10, 2, 8, 7, 4, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 9, 1, 4, 1, 7, 7, 1, 3, -1, -1, -1, -1, -1, -1, -1},
    {4, 9, 1, 4, 1, 7, 0, 8, 1, 8, 7, 1, -1, -1, -1, -1},
    {4, 0, 3, 7, 4, 3, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {4, 8, 7, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {9, 10, 8, 10, 11, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 0, 9, 3, 9, 11, 11, 9, 10, -1, -1, -1, -1, -1, -1, -1},
    {0, 1, 10, 0, 10, 8, 8, 10, 11, -1, -1, -1, -1, -1, -1, -1},
    {3, 1, 10, 11, 3, 10, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 2, 11, 1, 11, 9, 9, 11, 8, -1, -1, -1, -1, -1, -1, -1},
    {3, 0, 9, 3, 9, 11, 1, 2, 9, 2, 11, 9, -1, -1, -1, -1},
    {0, 2, 11, 8, 0, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {3, 2, 11, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {2, 3, 8, 2, 8, 10, 10, 8, 9, -1, -1, -1, -1, -1, -1, -1},
    {9, 10, 2, 0, 9, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {2, 3, 8, 2, 8, 10, 0, 1, 8, 1, 10, 8, -1, -1, -1, -1},
    {1, 10, 2, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {1, 3, 8, 9, 1, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 9, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {0, 3, 8, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1},
    {-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1}};

// corner offsets and the (corner, corner) pair per cube edge, Bourke layout
const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
                           {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
const int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

Mesh marching_cubes(const SdfFn& sdf, const Vec3& bmin, const Vec3& bmax, double resolution_mm,
                    double iso) {
    if (!(resolution_mm > 0)) throw std::runtime_error("marching cubes resolution must be > 0");
    std::array<int, 3> dims;
    for (int a = 0; a < 3; ++a) {
        double extent = (a == 0 ? bmax.x - bmin.x : a == 1 ? bmax.y - bmin.y : bmax.z - bmin.z);
        dims[a] = std::max(2, (int)std::floor(extent / resolution_mm) + 1);
    }
    std::vector<double> vals = sample_sdf_grid(sdf, bmin, dims, resolution_mm);
    for (auto& v : vals)
        if (v == iso) v += 1e-6;  // avoids zero-valued samples (degenerate cases)

    const int nx = dims[0], ny = dims[1], nz = dims[2];
    auto gidx = [&](int i, int j, int k) {
        return (size_t)k * nx * ny + (size_t)j * nx + i;
    };
    auto gpos = [&](int i, int j, int k) {
        return Vec3{bmin.x + i * resolution_mm, bmin.y + j * resolution_mm,
                    bmin.z + k * resolution_mm};
    };

    Mesh m;
    std::unordered_map<uint64_t, int> weld;  // grid-edge key -> mesh vertex

    for (int k = 0; k + 1 < nz; ++k)
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) {
                double cv[8];
                int ci[8][3];
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    ci[c][0] = i + kCorner[c][0];
                    ci[c][1] = j + kCorner[c][1];
                    ci[c][2] = k + kCorner[c][2];
                    cv[c] = vals[gidx(ci[c][0], ci[c][1], ci[c][2])];
                    if (cv[c] < iso) cube |= 1 << c;
                }
                int edges = kEdgeTable[cube];
                if (!edges) continue;
                int ev[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = kEdgeEnds[e][0], b = kEdgeEnds[e][1];
                    // canonical key: lower grid corner of the edge + its axis
                    int axis = ci[a][0] != ci[b][0] ? 0 : ci[a][1] != ci[b][1] ? 1 : 2;
                    const int* low = ci[a][axis] < ci[b][axis] ? ci[a] : ci[b];
                    uint64_t key = (uint64_t)gidx(low[0], low[1], low[2]) * 3 + axis;
                    auto it = weld.find(key);
                    if (it != weld.end()) { ev[e] = it->second; continue; }
                    double t = (iso - cv[a]) / (cv[b] - cv[a]);
                    Vec3 pa = gpos(ci[a][0], ci[a][1], ci[a][2]);
                    Vec3 pb = gpos(ci[b][0], ci[b][1], ci[b][2]);
                    ev[e] = (int)m.vertices.size();
                    m.vertices.push_back(pa + (pb - pa) * t);
                    weld.emplace(key, ev[e]);
                }
                for (int n = 0; kTriTable[cube][n] != -1; n += 3)
                    m.triangles.push_back({ev[kTriTable[cube][n]], ev[kTriTable[cube][n + 1]],
                                           ev[kTriTable[cube][n + 2]]});
            }
    if (m.triangles.empty())
        throw std::runtime_error("marching cubes found no isosurface in the given bounds");
    return m;
}

}  // namespace vt
