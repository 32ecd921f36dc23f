#include "vt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace vt {

namespace {

void he_init(std::vector<float>& w, int fan_in, Rng& rng) {
    double s = std::sqrt(2.0 / fan_in);
    for (auto& x : w) x = (float)rng.normal(0.0, s);
}

}  // namespace

// ---- Dense -----------------------------------------------------------------

void Dense::init(Rng& rng) {
    W_.assign((size_t)in_ * out_, 0);
    b_.assign(out_, 0);
    gW_.assign(W_.size(), 0);
    gb_.assign(b_.size(), 0);
    he_init(W_, in_, rng);
}

TensorF Dense::forward(const TensorF& x) {
    if (x.shape.size() != 2 || x.shape[1] != in_)
        throw std::runtime_error("dense: input shape mismatch");
    int rows = x.shape[0];
    x_ = x;
    TensorF y({rows, out_});
    for (int r = 0; r < rows; ++r) {
        const float* xr = &x.data[(size_t)r * in_];
        float* yr = &y.data[(size_t)r * out_];
        for (int o = 0; o < out_; ++o) {
            const float* w = &W_[(size_t)o * in_];
            double acc = b_[o];
            for (int i = 0; i < in_; ++i) acc += (double)w[i] * xr[i];
            yr[o] = (float)acc;
        }
    }
    pre_ = y;
    if (relu_)
        for (auto& v : y.data) v = std::max(v, 0.0f);
    return y;
}

TensorF Dense::backward(const TensorF& dy) {
    int rows = x_.shape[0];
    if (dy.shape.size() != 2 || dy.shape[0] != rows || dy.shape[1] != out_)
        throw std::runtime_error("dense: grad shape mismatch");
    TensorF dx({rows, in_});
    for (int r = 0; r < rows; ++r) {
        const float* xr = &x_.data[(size_t)r * in_];
        float* dxr = &dx.data[(size_t)r * in_];
        for (int o = 0; o < out_; ++o) {
            float g = dy.data[(size_t)r * out_ + o];
            if (relu_ && pre_.data[(size_t)r * out_ + o] <= 0) g = 0;
            if (g == 0) continue;
            float* gw = &gW_[(size_t)o * in_];
            const float* w = &W_[(size_t)o * in_];
            gb_[o] += g;
            for (int i = 0; i < in_; ++i) {
                gw[i] += g * xr[i];
                dxr[i] += g * w[i];
            }
        }
    }
    return dx;
}

void Dense::zero_grad() {
    std::fill(gW_.begin(), gW_.end(), 0.0f);
    std::fill(gb_.begin(), gb_.end(), 0.0f);
}

std::vector<ParamRef> Dense::params(const std::string& prefix) {
    return {{prefix + ".W", W_.data(), gW_.data(), W_.size()},
            {prefix + ".b", b_.data(), gb_.data(), b_.size()}};
}

// ---- Conv2dCircular --------------------------------------------------------

void Conv2dCircular::init(Rng& rng) {
    W_.assign((size_t)cout_ * cin_ * 9, 0);
    b_.assign(cout_, 0);
    gW_.assign(W_.size(), 0);
    gb_.assign(b_.size(), 0);
    he_init(W_, cin_ * 9, rng);
}

TensorF Conv2dCircular::forward(const TensorF& x) {
    if (x.shape.size() != 3 || x.shape[0] != cin_)
        throw std::runtime_error("conv2d_circular: input shape mismatch");
    int H = x.shape[1], W = x.shape[2];
    x_ = x;
    TensorF y({cout_, H, W});
    for (int co = 0; co < cout_; ++co) {
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                double acc = b_[co];
                for (int ci = 0; ci < cin_; ++ci) {
                    const float* ker = &W_[((size_t)co * cin_ + ci) * 9];
                    for (int dh = -1; dh <= 1; ++dh) {
                        int hh = h + dh;
                        if (hh < 0 || hh >= H) continue;  // zero pad on radial axis
                        for (int dw = -1; dw <= 1; ++dw) {
                            int ww = (w + dw + W) % W;  // circular on angular axis
                            acc += (double)ker[(dh + 1) * 3 + (dw + 1)] *
                                   x.data[((size_t)ci * H + hh) * W + ww];
                        }
                    }
                }
                y.data[((size_t)co * H + h) * W + w] = (float)acc;
            }
        }
    }
    pre_ = y;
    if (relu_)
        for (auto& v : y.data) v = std::max(v, 0.0f);
    return y;
}

TensorF Conv2dCircular::backward(const TensorF& dy) {
    int H = x_.shape[1], W = x_.shape[2];
    TensorF dx({cin_, H, W});
    for (int co = 0; co < cout_; ++co) {
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                float g = dy.data[((size_t)co * H + h) * W + w];
                if (relu_ && pre_.data[((size_t)co * H + h) * W + w] <= 0) g = 0;
                if (g == 0) continue;
                gb_[co] += g;
                for (int ci = 0; ci < cin_; ++ci) {
                    float* gker = &gW_[((size_t)co * cin_ + ci) * 9];
                    const float* ker = &W_[((size_t)co * cin_ + ci) * 9];
                    for (int dh = -1; dh <= 1; ++dh) {
                        int hh = h + dh;
                        if (hh < 0 || hh >= H) continue;
                        for (int dw = -1; dw <= 1; ++dw) {
                            int ww = (w + dw + W) % W;
                            size_t xi = ((size_t)ci * H + hh) * W + ww;
                            gker[(dh + 1) * 3 + (dw + 1)] += g * x_.data[xi];
                            dx.data[xi] += g * ker[(dh + 1) * 3 + (dw + 1)];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2dCircular::zero_grad() {
    std::fill(gW_.begin(), gW_.end(), 0.0f);
    std::fill(gb_.begin(), gb_.end(), 0.0f);
}

std::vector<ParamRef> Conv2dCircular::params(const std::string& prefix) {
    return {{prefix + ".W", W_.data(), gW_.data(), W_.size()},
            {prefix + ".b", b_.data(), gb_.data(), b_.size()}};
}

// ---- GraphConv -------------------------------------------------------------

void GraphConv::init(Rng& rng) {
    Wself_.assign((size_t)in_ * out_, 0);
    Wneigh_.assign((size_t)in_ * out_, 0);
    b_.assign(out_, 0);
    gWself_.assign(Wself_.size(), 0);
    gWneigh_.assign(Wneigh_.size(), 0);
    gb_.assign(b_.size(), 0);
    he_init(Wself_, in_, rng);
    he_init(Wneigh_, in_, rng);
}

TensorF GraphConv::forward(const TensorF& x, const std::vector<std::vector<int>>& adj) {
    if (x.shape.size() != 2 || x.shape[1] != in_)
        throw std::runtime_error("graph_conv: input shape mismatch");
    int V = x.shape[0];
    if ((size_t)V != adj.size()) throw std::runtime_error("graph_conv: adjacency size mismatch");
    x_ = x;
    adj_ = &adj;
    mean_ = TensorF({V, in_});
    for (int v = 0; v < V; ++v) {
        const auto& nb = adj[v];
        float inv = nb.empty() ? 0.0f : 1.0f / (float)nb.size();
        float* mv = &mean_.data[(size_t)v * in_];
        for (int u : nb) {
            const float* xu = &x.data[(size_t)u * in_];
            for (int i = 0; i < in_; ++i) mv[i] += xu[i];
        }
        for (int i = 0; i < in_; ++i) mv[i] *= inv;
    }
    TensorF y({V, out_});
    for (int v = 0; v < V; ++v) {
        const float* xv = &x.data[(size_t)v * in_];
        const float* mv = &mean_.data[(size_t)v * in_];
        float* yv = &y.data[(size_t)v * out_];
        for (int o = 0; o < out_; ++o) {
            const float* ws = &Wself_[(size_t)o * in_];
            const float* wn = &Wneigh_[(size_t)o * in_];
            double acc = b_[o];
            for (int i = 0; i < in_; ++i) acc += (double)ws[i] * xv[i] + (double)wn[i] * mv[i];
            yv[o] = (float)acc;
        }
    }
    pre_ = y;
    if (relu_)
        for (auto& v : y.data) v = std::max(v, 0.0f);
    return y;
}

TensorF GraphConv::backward(const TensorF& dy) {
    int V = x_.shape[0];
    const auto& adj = *adj_;
    TensorF dmean({V, in_});
    TensorF dx({V, in_});
    for (int v = 0; v < V; ++v) {
        const float* xv = &x_.data[(size_t)v * in_];
        const float* mv = &mean_.data[(size_t)v * in_];
        float* dxv = &dx.data[(size_t)v * in_];
        float* dmv = &dmean.data[(size_t)v * in_];
        for (int o = 0; o < out_; ++o) {
            float g = dy.data[(size_t)v * out_ + o];
            if (relu_ && pre_.data[(size_t)v * out_ + o] <= 0) g = 0;
            if (g == 0) continue;
            gb_[o] += g;
            float* gws = &gWself_[(size_t)o * in_];
            float* gwn = &gWneigh_[(size_t)o * in_];
            const float* ws = &Wself_[(size_t)o * in_];
            const float* wn = &Wneigh_[(size_t)o * in_];
            for (int i = 0; i < in_; ++i) {
                gws[i] += g * xv[i];
                gwn[i] += g * mv[i];
                dxv[i] += g * ws[i];
                dmv[i] += g * wn[i];
            }
        }
    }
    // route mean gradients back to neighbors
    for (int v = 0; v < V; ++v) {
        const auto& nb = adj[v];
        if (nb.empty()) continue;
        float inv = 1.0f / (float)nb.size();
        const float* dmv = &dmean.data[(size_t)v * in_];
        for (int u : nb) {
            float* dxu = &dx.data[(size_t)u * in_];
            for (int i = 0; i < in_; ++i) dxu[i] += inv * dmv[i];
        }
    }
    return dx;
}

void GraphConv::zero_grad() {
    std::fill(gWself_.begin(), gWself_.end(), 0.0f);
    std::fill(gWneigh_.begin(), gWneigh_.end(), 0.0f);
    std::fill(gb_.begin(), gb_.end(), 0.0f);
}

std::vector<ParamRef> GraphConv::params(const std::string& prefix) {
    return {{prefix + ".Wself", Wself_.data(), gWself_.data(), Wself_.size()},
            {prefix + ".Wneigh", Wneigh_.data(), gWneigh_.data(), Wneigh_.size()},
            {prefix + ".b", b_.data(), gb_.data(), b_.size()}};
}

// ---- Adam ------------------------------------------------------------------

void Adam::register_params(const std::vector<ParamRef>& ps) {
    for (const auto& p : ps) {
        Slot s;
        s.p = p;
        s.m.assign(p.n, 0);
        s.v.assign(p.n, 0);
        slots_.push_back(std::move(s));
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& s : slots_) {
        for (size_t i = 0; i < s.p.n; ++i) {
            double g = s.p.grad[i];
            if (!std::isfinite(g))
                throw std::runtime_error("non-finite gradient in parameter " + s.p.name);
            s.m[i] = (float)(beta1_ * s.m[i] + (1 - beta1_) * g);
            s.v[i] = (float)(beta2_ * s.v[i] + (1 - beta2_) * g * g);
            double mhat = s.m[i] / bc1;
            double vhat = s.v[i] / bc2;
            s.p.data[i] -= (float)(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) std::fill(s.p.grad, s.p.grad + s.p.n, 0.0f);
}

// ---- grad_check ------------------------------------------------------------

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& run_backward,
                           std::vector<ParamRef> params, double h, size_t max_entries,
                           uint64_t seed) {
    run_backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad, p.grad + p.n);

    GradCheckReport rep;
    Rng rng(seed ^ 0x67726164u);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        std::vector<size_t> idx(p.n);
        for (size_t i = 0; i < p.n; ++i) idx[i] = i;
        if (p.n > max_entries) {
            for (size_t i = 0; i < max_entries; ++i)
                std::swap(idx[i], idx[i + rng.uniform_index(p.n - i)]);
            idx.resize(max_entries);
        }
        for (size_t i : idx) {
            float save = p.data[i];
            p.data[i] = (float)(save + h);
            double lp = loss();
            p.data[i] = (float)(save - h);
            double lm = loss();
            p.data[i] = save;
            double num = (lp - lm) / (2 * h);
            double ana = analytic[pi][i];
            double denom = std::max({1.0, std::abs(num), std::abs(ana)});
            double rel = std::abs(num - ana) / denom;
            if (rel > rep.max_rel_err) rep.max_rel_err = rel;
            if (rel > 1e-3) rep.worst.push_back({p.name, i, ana, num, rel});
        }
    }
    return rep;
}

// ---- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params,
                     const std::string& meta_json) {
    json j;
    j["format"] = "vt-checkpoint-v1";
    j["meta"] = json::parse(meta_json);
    json plist = json::array();
    size_t total = 0;
    for (const auto& p : params) {
        plist.push_back({{"name", p.name}, {"size", p.n}});
        total += p.n;
    }
    j["params"] = plist;
    fs::path raw = fs::path(path).parent_path() / (fs::path(path).stem().string() + ".weights");
    j["payload"] = raw.filename().string();
    std::ofstream hf(path);
    if (!hf) throw std::runtime_error("cannot write checkpoint: " + path);
    hf << j.dump(2) << "\n";
    std::ofstream rf(raw, std::ios::binary);
    if (!rf) throw std::runtime_error("cannot write checkpoint payload: " + raw.string());
    for (const auto& p : params)
        rf.write((const char*)p.data, (std::streamsize)(p.n * sizeof(float)));
    (void)total;
}

std::string load_checkpoint(const std::string& path, const std::vector<ParamRef>& params) {
    std::ifstream hf(path);
    if (!hf) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    hf >> j;
    auto plist = j.at("params");
    if (plist.size() != params.size())
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    fs::path raw = fs::path(path).parent_path() / j.at("payload").get<std::string>();
    std::ifstream rf(raw, std::ios::binary);
    if (!rf) throw std::runtime_error("cannot open checkpoint payload: " + raw.string());
    for (size_t i = 0; i < params.size(); ++i) {
        auto name = plist[i].at("name").get<std::string>();
        auto size = plist[i].at("size").get<size_t>();
        if (name != params[i].name || size != params[i].n)
            throw std::runtime_error("checkpoint layout mismatch at " + name);
        rf.read((char*)params[i].data, (std::streamsize)(size * sizeof(float)));
        if (!rf) throw std::runtime_error("checkpoint payload truncated: " + raw.string());
    }
    return j.at("meta").dump();
}

}  // namespace vt
