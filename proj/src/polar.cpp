#include "vt/polar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;

namespace vt {

void PlaneFrame::validate() const {
    double tol = 1e-9;
    if (std::abs(e1.dot(e2)) > tol || std::abs(e1.dot(normal)) > tol ||
        std::abs(e2.dot(normal)) > tol)
        throw std::runtime_error("plane frame is not orthogonal");
    for (const Vec3* v : {&e1, &e2, &normal})
        if (std::abs(v->norm() - 1.0) > tol) throw std::runtime_error("plane frame not unit norm");
    if (e1.cross(e2).dot(normal) < 1.0 - 1e-9)
        throw std::runtime_error("plane frame is not right-handed");
}

PlaneFrame plane_basis(const WorldPoint& center, const Direction& d,
                       const std::optional<PlaneFrame>& prev) {
    PlaneFrame f;
    f.center = center;
    f.normal = d.normalized();
    Vec3 e1;
    bool have = false;
    if (prev) {
        Vec3 proj = prev->e1 - f.normal * prev->e1.dot(f.normal);
        if (proj.norm() >= 1e-6) {
            e1 = proj.normalized();
            have = true;
        }
    }
    if (!have) {
        double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
        Vec3 a = (ax <= ay && ax <= az) ? Vec3{1, 0, 0}
                                        : (ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
        e1 = a.cross(f.normal).normalized();
    }
    f.e1 = e1;
    f.e2 = f.normal.cross(f.e1).normalized();
    f.validate();
    return f;
}

PolarImage extract_polar_image(const ScalarVolume& vol, const PlaneFrame& frame, double r_tilde,
                               int n_r, int n_phi) {
    if (r_tilde <= 0) throw std::runtime_error("polar image radius must be positive");
    if (n_r < 4 || n_phi < 4) throw std::runtime_error("polar image needs N_r, N_phi >= 4");
    PolarImage img;
    img.frame = frame;
    img.r_tilde = r_tilde;
    img.pixels = TensorF({n_r, n_phi});
    for (int i = 0; i < n_r; ++i) {
        double rho = (i + 0.5) * r_tilde / n_r;
        for (int k = 0; k < n_phi; ++k) {
            double phi = 2.0 * M_PI * k / n_phi;
            Vec3 p = frame.center + rho * (std::cos(phi) * frame.e1 + std::sin(phi) * frame.e2);
            img.pixels.data[(size_t)i * n_phi + k] = sample_trilinear(vol, p);
        }
    }
    return img;
}

std::vector<WorldPoint> Contour::points() const {
    std::vector<WorldPoint> ps(radii.size());
    for (size_t k = 0; k < radii.size(); ++k) {
        double phi = 2.0 * M_PI * k / radii.size();
        ps[k] = frame.center + radii[k] * (std::cos(phi) * frame.e1 + std::sin(phi) * frame.e2);
    }
    return ps;
}

Contour flip_contour(const Contour& c) {
    Contour out = c;
    out.frame.normal = -c.frame.normal;
    out.frame.e2 = -c.frame.e2;
    // same plane points, angle parameter reflected: phi -> -phi
    size_t n = c.radii.size();
    for (size_t k = 0; k < n; ++k) out.radii[k] = c.radii[(n - k) % n];
    return out;
}

std::vector<double> heatmap_to_radii(const TensorF& heatmap, double r_tilde) {
    int n_r = heatmap.shape[0], n_phi = heatmap.shape[1];
    std::vector<double> radii(n_phi, 0.0);
    for (int k = 0; k < n_phi; ++k) {
        double acc = 0;
        for (int i = 0; i < n_r; ++i)
            acc += (double)heatmap.data[(size_t)i * n_phi + k] * ((i + 0.5) * r_tilde / n_r);
        radii[k] = acc;
    }
    return radii;
}

// ---- ContourNet ------------------------------------------------------------

ContourNet::ContourNet(uint64_t seed) {
    Rng rng(seed);
    c1_ = Conv2dCircular(1, 16, true);
    c2_ = Conv2dCircular(16, 16, true);
    c3_ = Conv2dCircular(16, 16, true);
    c4_ = Conv2dCircular(16, 1, false);
    c1_.init(rng);
    c2_.init(rng);
    c3_.init(rng);
    c4_.init(rng);
}

namespace {

TensorF normalize_image(const TensorF& px) {
    TensorF y({1, px.shape[0], px.shape[1]});
    double mean = 0;
    for (float v : px.data) mean += v;
    mean /= px.numel();
    double var = 0;
    for (float v : px.data) var += (v - mean) * (v - mean);
    double inv = 1.0 / (std::sqrt(var / px.numel()) + 1e-6);
    for (size_t i = 0; i < px.numel(); ++i) y.data[i] = (float)((px.data[i] - mean) * inv);
    return y;
}

}  // namespace

TensorF ContourNet::forward(const PolarImage& img) {
    TensorF h = normalize_image(img.pixels);
    h = c1_.forward(h);
    h = c2_.forward(h);
    h = c3_.forward(h);
    h = c4_.forward(h);  // [1, N_r, N_phi]
    int n_r = h.shape[1], n_phi = h.shape[2];
    TensorF out({n_r, n_phi});
    for (int k = 0; k < n_phi; ++k) {
        double mx = -1e300;
        for (int i = 0; i < n_r; ++i) mx = std::max(mx, (double)h.data[(size_t)i * n_phi + k]);
        double sum = 0;
        for (int i = 0; i < n_r; ++i) {
            double e = std::exp((double)h.data[(size_t)i * n_phi + k] - mx);
            out.data[(size_t)i * n_phi + k] = (float)e;
            sum += e;
        }
        for (int i = 0; i < n_r; ++i) out.data[(size_t)i * n_phi + k] /= (float)sum;
    }
    softmax_ = out;
    return out;
}

void ContourNet::backward(const TensorF& d_heatmap) {
    int n_r = softmax_.shape[0], n_phi = softmax_.shape[1];
    TensorF dpre({1, n_r, n_phi});
    for (int k = 0; k < n_phi; ++k) {
        double dot = 0;
        for (int i = 0; i < n_r; ++i)
            dot += (double)softmax_.data[(size_t)i * n_phi + k] *
                   d_heatmap.data[(size_t)i * n_phi + k];
        for (int i = 0; i < n_r; ++i) {
            size_t idx = (size_t)i * n_phi + k;
            dpre.data[idx] = (float)(softmax_.data[idx] * ((double)d_heatmap.data[idx] - dot));
        }
    }
    TensorF g = c4_.backward(dpre);
    g = c3_.backward(g);
    g = c2_.backward(g);
    c1_.backward(g);
}

std::vector<ParamRef> ContourNet::params() {
    std::vector<ParamRef> ps;
    for (auto& group : {c1_.params("c1"), c2_.params("c2"), c3_.params("c3"), c4_.params("c4")})
        for (auto& p : group) ps.push_back(p);
    return ps;
}

void ContourNet::zero_grad() {
    c1_.zero_grad();
    c2_.zero_grad();
    c3_.zero_grad();
    c4_.zero_grad();
}

void ContourNet::save(const std::string& path) const {
    auto* self = const_cast<ContourNet*>(this);
    save_checkpoint(path, self->params(), "{\"arch\":\"contour_cnn\"}");
}

ContourNet ContourNet::load(const std::string& path) {
    ContourNet net(0);
    load_checkpoint(path, net.params());
    return net;
}

Contour predict_contour(ContourNet& net, const PolarImage& img) {
    TensorF heat = net.forward(img);
    Contour c;
    c.frame = img.frame;
    c.r_tilde = img.r_tilde;
    c.radii = heatmap_to_radii(heat, img.r_tilde);
    return c;
}

// ---- training --------------------------------------------------------------

std::vector<double> train_contour(ContourNet& net, const std::vector<ContourSample>& dataset,
                                  const ContourTrainConfig& cfg) {
    if (dataset.empty()) throw std::runtime_error("contour training set is empty");
    Rng rng = Rng(cfg.seed).fork("train_contour");
    Adam opt(cfg.lr);
    opt.register_params(net.params());
    std::vector<double> losses;
    for (int step = 0; step < cfg.steps; ++step) {
        net.zero_grad();
        double step_loss = 0;
        for (int b = 0; b < cfg.batch; ++b) {
            const ContourSample& s = dataset[rng.uniform_index(dataset.size())];
            PolarImage img;
            img.r_tilde = s.r_tilde;
            img.pixels = s.pixels;
            TensorF heat = net.forward(img);
            std::vector<double> pred = heatmap_to_radii(heat, s.r_tilde);
            int n_r = heat.shape[0], n_phi = heat.shape[1];
            TensorF dheat({n_r, n_phi});
            double loss = 0;
            for (int k = 0; k < n_phi; ++k) {
                double e = pred[k] - s.radii[k];
                loss += e * e;
                double d = 2.0 * e / (n_phi * cfg.batch);
                for (int i = 0; i < n_r; ++i)
                    dheat.data[(size_t)i * n_phi + k] = (float)(d * ((i + 0.5) * s.r_tilde / n_r));
            }
            loss /= n_phi;
            step_loss += loss / cfg.batch;
            net.backward(dheat);
        }
        if (!std::isfinite(step_loss)) throw std::runtime_error("contour training diverged");
        opt.step();
        losses.push_back(step_loss);
    }
    return losses;
}

// ---- DSC -------------------------------------------------------------------

namespace {

struct Poly2D {
    std::vector<double> xs, ys;
};

Poly2D project_to_frame(const Contour& c, const PlaneFrame& ref) {
    Poly2D p;
    for (const auto& w : c.points()) {
        Vec3 d = w - ref.center;
        p.xs.push_back(d.dot(ref.e1));
        p.ys.push_back(d.dot(ref.e2));
    }
    return p;
}

// even-odd scanline rasterization at cell centers
void rasterize(const Poly2D& poly, double x0, double y0, int nx, int ny, double pitch,
               std::vector<uint8_t>& mask) {
    size_t n = poly.xs.size();
    for (int row = 0; row < ny; ++row) {
        double y = y0 + (row + 0.5) * pitch;
        std::vector<double> xs;
        for (size_t i = 0; i < n; ++i) {
            size_t j = (i + 1) % n;
            double ya = poly.ys[i], yb = poly.ys[j];
            if ((ya <= y) == (yb <= y)) continue;
            double t = (y - ya) / (yb - ya);
            xs.push_back(poly.xs[i] + t * (poly.xs[j] - poly.xs[i]));
        }
        std::sort(xs.begin(), xs.end());
        for (size_t i = 0; i + 1 < xs.size(); i += 2) {
            int ca = (int)std::ceil((xs[i] - x0) / pitch - 0.5);
            int cb = (int)std::floor((xs[i + 1] - x0) / pitch - 0.5);
            for (int c = std::max(ca, 0); c <= std::min(cb, nx - 1); ++c)
                mask[(size_t)row * nx + c] = 1;
        }
    }
}

}  // namespace

double contour_dsc(const Contour& a, const Contour& b, double pitch) {
    // coplanarity: parallel normals and no offset along the normal
    double ndot = std::abs(a.frame.normal.dot(b.frame.normal));
    if (std::abs(ndot - 1.0) > 1e-6) throw std::runtime_error("contour_dsc: contours not coplanar");
    if (std::abs((b.frame.center - a.frame.center).dot(a.frame.normal)) > 1e-6)
        throw std::runtime_error("contour_dsc: contours not coplanar");

    Poly2D pa = project_to_frame(a, a.frame);
    Poly2D pb = project_to_frame(b, a.frame);
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Poly2D* p : {&pa, &pb})
        for (size_t i = 0; i < p->xs.size(); ++i) {
            xmin = std::min(xmin, p->xs[i]);
            xmax = std::max(xmax, p->xs[i]);
            ymin = std::min(ymin, p->ys[i]);
            ymax = std::max(ymax, p->ys[i]);
        }
    xmin -= pitch; ymin -= pitch; xmax += pitch; ymax += pitch;
    int nx = (int)std::ceil((xmax - xmin) / pitch);
    int ny = (int)std::ceil((ymax - ymin) / pitch);
    std::vector<uint8_t> ma((size_t)nx * ny, 0), mb((size_t)nx * ny, 0);
    rasterize(pa, xmin, ymin, nx, ny, pitch, ma);
    rasterize(pb, xmin, ymin, nx, ny, pitch, mb);
    size_t na = 0, nb = 0, ni = 0;
    for (size_t i = 0; i < ma.size(); ++i) {
        na += ma[i];
        nb += mb[i];
        ni += ma[i] & mb[i];
    }
    if (na + nb == 0) return 0.0;
    return 2.0 * (double)ni / (double)(na + nb);
}

std::string contour_to_json(const Contour& c) {
    json j;
    j["center"] = {c.frame.center.x, c.frame.center.y, c.frame.center.z};
    j["normal"] = {c.frame.normal.x, c.frame.normal.y, c.frame.normal.z};
    j["e1"] = {c.frame.e1.x, c.frame.e1.y, c.frame.e1.z};
    j["r_tilde"] = c.r_tilde;
    j["radii"] = c.radii;
    json pts = json::array();
    for (const auto& p : c.points()) pts.push_back({p.x, p.y, p.z});
    j["points"] = pts;
    return j.dump();
}

}  // namespace vt
