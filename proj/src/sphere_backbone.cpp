#include "vt/sphere_backbone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vt {

void ScaleSet::validate() const {
    if (radii.empty()) throw std::runtime_error("scale set is empty");
    for (size_t i = 0; i < radii.size(); ++i) {
        if (radii[i] <= 0) throw std::runtime_error("scales must be positive");
        if (i > 0 && radii[i] <= radii[i - 1])
            throw std::runtime_error("scales must be strictly increasing");
    }
}

ScaleSet default_scale_set() {
    ScaleSet s;
    for (int r = 5; r <= 80; r += 5) s.radii.push_back(r);
    return s;
}

SphericalFeature project_features(const ScalarVolume& vol, const WorldPoint& x, double r,
                                  const Icosphere& sphere, int n_samples) {
    if (r <= 0) throw std::runtime_error("projection radius must be positive");
    if (n_samples < 2) throw std::runtime_error("need at least 2 radial samples");
    int V = (int)sphere.vertices.size();
    SphericalFeature f;
    f.center = x;
    f.scale = r;
    f.samples = TensorF({V, n_samples});
    for (int v = 0; v < V; ++v) {
        const Direction& dir = sphere.vertices[v];
        float* row = &f.samples.data[(size_t)v * n_samples];
        for (int k = 0; k < n_samples; ++k) {
            double t = (double)(k + 1) * r / n_samples;  // starts at r/N_s, not 0
            row[k] = sample_trilinear(vol, x + dir * t);
        }
    }
    return f;
}

// ---- GcnNet ----------------------------------------------------------------

GcnNet::GcnNet(int n_samples, uint64_t seed) : n_samples_(n_samples) {
    Rng rng(seed);
    enc1_ = Dense(n_samples, 32, true);
    enc2_ = Dense(32, 32, true);
    g1_ = GraphConv(32, 32, true);
    g2_ = GraphConv(32, 32, true);
    g3_ = GraphConv(32, 32, true);
    head_ = Dense(32, 1, false);
    enc1_.init(rng);
    enc2_.init(rng);
    g1_.init(rng);
    g2_.init(rng);
    g3_.init(rng);
    head_.init(rng);
}

namespace {

// per-ray intensity normalization: subtract mean, divide by std + 1e-6
TensorF normalize_rays(const TensorF& x) {
    TensorF y = x;
    int V = x.shape[0], N = x.shape[1];
    for (int v = 0; v < V; ++v) {
        float* row = &y.data[(size_t)v * N];
        double mean = 0;
        for (int k = 0; k < N; ++k) mean += row[k];
        mean /= N;
        double var = 0;
        for (int k = 0; k < N; ++k) var += (row[k] - mean) * (row[k] - mean);
        double inv = 1.0 / (std::sqrt(var / N) + 1e-6);
        for (int k = 0; k < N; ++k) row[k] = (float)((row[k] - mean) * inv);
    }
    return y;
}

}  // namespace

SphericalResponse GcnNet::forward(const SphericalFeature& feat, const Icosphere& sphere) {
    if (feat.samples.shape[1] != n_samples_)
        throw std::runtime_error("feature width does not match network input width");
    TensorF h = normalize_rays(feat.samples);
    h = enc1_.forward(h);
    h = enc2_.forward(h);
    h = g1_.forward(h, sphere.adjacency);
    h = g2_.forward(h, sphere.adjacency);
    h = g3_.forward(h, sphere.adjacency);
    h = head_.forward(h);
    SphericalResponse out(h.data.begin(), h.data.end());
    return out;
}

void GcnNet::backward(const std::vector<float>& d_response) {
    TensorF dy({(int)d_response.size(), 1});
    dy.data = d_response;
    TensorF g = head_.backward(dy);
    g = g3_.backward(g);
    g = g2_.backward(g);
    g = g1_.backward(g);
    g = enc2_.backward(g);
    enc1_.backward(g);
}

std::vector<ParamRef> GcnNet::params() {
    std::vector<ParamRef> ps;
    for (auto& group : {enc1_.params("enc1"), enc2_.params("enc2"), g1_.params("g1"),
                        g2_.params("g2"), g3_.params("g3"), head_.params("head")})
        for (auto& p : group) ps.push_back(p);
    return ps;
}

void GcnNet::zero_grad() {
    enc1_.zero_grad();
    enc2_.zero_grad();
    g1_.zero_grad();
    g2_.zero_grad();
    g3_.zero_grad();
    head_.zero_grad();
}

void GcnNet::save(const std::string& path) const {
    auto* self = const_cast<GcnNet*>(this);
    save_checkpoint(path, self->params(), "{\"arch\":\"gcn\",\"n_samples\":" +
                                              std::to_string(n_samples_) + "}");
}

GcnNet GcnNet::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open backbone checkpoint: " + path);
    nlohmann::json j;
    f >> j;
    int n_samples = j.at("meta").at("n_samples").get<int>();
    GcnNet net(n_samples, 0);
    load_checkpoint(path, net.params());
    return net;
}

std::vector<SphericalResponse> multi_scale_forward(GcnNet& net, const ScalarVolume& vol,
                                                   const WorldPoint& x, const ScaleSet& R,
                                                   const Icosphere& sphere) {
    R.validate();
    std::vector<SphericalResponse> out(R.radii.size());
#pragma omp parallel for schedule(static) firstprivate(net)
    for (size_t j = 0; j < R.radii.size(); ++j) {
        SphericalFeature f = project_features(vol, x, R.radii[j], sphere, net.n_samples());
        out[j] = net.forward(f, sphere);
    }
    return out;
}

// ---- training --------------------------------------------------------------

std::vector<float> orientation_target(const Icosphere& sphere, const Direction& d1,
                                      const Direction& d2, double exponent) {
    std::vector<float> t(sphere.vertices.size());
    for (size_t v = 0; v < t.size(); ++v) {
        double c1 = std::max(0.0, sphere.vertices[v].dot(d1));
        double c2 = std::max(0.0, sphere.vertices[v].dot(d2));
        t[v] = (float)(std::pow(c1, exponent) + std::pow(c2, exponent));
    }
    return t;
}

std::vector<double> train_orientation(GcnNet& net, const std::vector<OrientSample>& dataset,
                                      const ScaleSet& R, const Icosphere& sphere,
                                      const OrientTrainConfig& cfg) {
    if (dataset.empty()) throw std::runtime_error("orientation training set is empty");
    R.validate();
    Rng rng = Rng(cfg.seed).fork("train_orient");
    Adam opt(cfg.lr);
    opt.register_params(net.params());
    std::vector<double> losses;
    int V = (int)sphere.vertices.size();

    for (int step = 0; step < cfg.steps; ++step) {
        net.zero_grad();
        double step_loss = 0;
        for (int b = 0; b < cfg.batch; ++b) {
            const OrientSample& s = dataset[rng.uniform_index(dataset.size())];
            // pick the supervised scale
            std::vector<size_t> valid, invalid;
            for (size_t j = 0; j < R.radii.size(); ++j) {
                double q = R.radii[j] / s.radius;
                (q >= cfg.q_lo && q <= cfg.q_hi ? valid : invalid).push_back(j);
            }
            bool zero_target = !invalid.empty() &&
                               (valid.empty() || rng.uniform() < cfg.zero_target_prob);
            size_t j = zero_target ? invalid[rng.uniform_index(invalid.size())]
                                   : (valid.empty() ? R.radii.size() - 1
                                                    : valid[rng.uniform_index(valid.size())]);
            // off-axis jitter with recentering target
            WorldPoint x = s.point;
            Direction d1 = s.tangent, d2 = -s.tangent;
            if (cfg.jitter_frac > 0) {
                Vec3 u{rng.normal(), rng.normal(), rng.normal()};
                if (u.norm() > 1e-9) {
                    u = u.normalized() * (rng.uniform() * cfg.jitter_frac * s.radius);
                    x = s.point + u;
                    if (s.truth) {
                        CurveClosest cc = s.truth->centerline.closest(x);
                        Vec3 back = s.truth->centerline.point(cc.arclength) - x;
                        Vec3 corr = back * (cfg.recenter_gain / s.radius);
                        d1 = (s.tangent + corr).normalized();
                        d2 = (-s.tangent + corr).normalized();
                    }
                }
            }
            std::vector<float> target(V, 0.0f);
            if (!zero_target) {
                target = orientation_target(sphere, d1, d2, cfg.target_exponent);
                double lq = std::log((R.radii[j] / s.radius) / cfg.q_ref);
                float h = (float)std::exp(-lq * lq / (2 * cfg.height_sigma * cfg.height_sigma));
                for (auto& t : target) t *= h;
            }

            SphericalFeature f = project_features(*s.vol, x, R.radii[j], sphere, net.n_samples());
            SphericalResponse out = net.forward(f, sphere);
            std::vector<float> grad(V);
            double loss = 0;
            for (int v = 0; v < V; ++v) {
                double e = out[v] - target[v];
                loss += e * e;
                grad[v] = (float)(2.0 * e / (V * cfg.batch));
            }
            loss /= V;
            step_loss += loss / cfg.batch;
            net.backward(grad);
        }
        if (!std::isfinite(step_loss)) throw std::runtime_error("orientation training diverged");
        opt.step();
        losses.push_back(step_loss);
    }
    return losses;
}

}  // namespace vt
