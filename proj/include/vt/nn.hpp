#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vt/rng.hpp"

namespace vt {

struct TensorF {
    std::vector<int> shape;
    std::vector<float> data;

    TensorF() = default;
    explicit TensorF(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= (size_t)d;
        data.assign(n, 0.0f);
    }
    size_t numel() const { return data.size(); }
    float& operator[](size_t i) { return data[i]; }
    float operator[](size_t i) const { return data[i]; }
};

struct ParamRef {
    std::string name;
    float* data = nullptr;
    float* grad = nullptr;
    size_t n = 0;
};

// ---- layers ----------------------------------------------------------------
// Each layer caches its forward input; backward(dy) accumulates parameter
// gradients and returns the input gradient. Single-threaded per instance.

class Dense {
  public:
    Dense() = default;
    Dense(int in, int out, bool relu) : in_(in), out_(out), relu_(relu) {}
    void init(Rng& rng);
    // x: [rows, in] -> [rows, out]
    TensorF forward(const TensorF& x);
    TensorF backward(const TensorF& dy);
    void zero_grad();
    std::vector<ParamRef> params(const std::string& prefix);
    int in() const { return in_; }
    int out() const { return out_; }

  private:
    int in_ = 0, out_ = 0;
    bool relu_ = false;
    std::vector<float> W_, b_, gW_, gb_;
    TensorF x_, pre_;
    friend class Checkpoint;
};

// 3x3 convolution on [C, H, W] tensors, zero-padded along H (radial axis),
// circularly padded along W (angular axis).
class Conv2dCircular {
  public:
    Conv2dCircular() = default;
    Conv2dCircular(int cin, int cout, bool relu) : cin_(cin), cout_(cout), relu_(relu) {}
    void init(Rng& rng);
    TensorF forward(const TensorF& x);
    TensorF backward(const TensorF& dy);
    void zero_grad();
    std::vector<ParamRef> params(const std::string& prefix);

  private:
    int cin_ = 0, cout_ = 0;
    bool relu_ = false;
    std::vector<float> W_, b_, gW_, gb_;  // W: [cout, cin, 3, 3]
    TensorF x_, pre_;
};

// Isotropic graph convolution on per-vertex features [V, F]:
// y_v = act(W_self x_v + W_neigh mean_{u in N(v)} x_u + b).
class GraphConv {
  public:
    GraphConv() = default;
    GraphConv(int in, int out, bool relu) : in_(in), out_(out), relu_(relu) {}
    void init(Rng& rng);
    TensorF forward(const TensorF& x, const std::vector<std::vector<int>>& adj);
    TensorF backward(const TensorF& dy);
    void zero_grad();
    std::vector<ParamRef> params(const std::string& prefix);

  private:
    int in_ = 0, out_ = 0;
    bool relu_ = false;
    std::vector<float> Wself_, Wneigh_, b_, gWself_, gWneigh_, gb_;
    TensorF x_, mean_, pre_;
    const std::vector<std::vector<int>>* adj_ = nullptr;
};

// ---- optimizer -------------------------------------------------------------

class Adam {
  public:
    explicit Adam(double lr) : lr_(lr) {}
    void register_params(const std::vector<ParamRef>& ps);
    // Standard bias-corrected update. Throws naming the parameter on a
    // non-finite gradient.
    void step();
    void zero_grad();
    int step_count() const { return t_; }
    void set_lr(double v) { lr_ = v; }

  private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int t_ = 0;
    struct Slot {
        ParamRef p;
        std::vector<float> m, v;
    };
    std::vector<Slot> slots_;
};

// ---- gradient checking -----------------------------------------------------

struct GradCheckEntry {
    std::string param;
    size_t index = 0;
    double analytic = 0, numeric = 0, rel_err = 0;
};

struct GradCheckReport {
    double max_rel_err = 0;
    std::vector<GradCheckEntry> worst;  // entries exceeding tolerance
    bool ok(double tol) const { return max_rel_err < tol; }
};

// Central finite differences (h on f32 params, f64 loss accumulation) against
// the analytic gradients left in `params` by run_backward. Checks at most
// max_entries randomly chosen coordinates per parameter buffer.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& run_backward,
                           std::vector<ParamRef> params, double h = 1e-3,
                           size_t max_entries = 64, uint64_t seed = 0);

// ---- checkpoints -----------------------------------------------------------
// JSON manifest (parameter names, sizes, metadata) + raw little-endian f32 payload.

void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params,
                     const std::string& meta_json = "{}");
// Loads into matching (name, size) buffers; throws on mismatch. Returns meta.
std::string load_checkpoint(const std::string& path, const std::vector<ParamRef>& params);

}  // namespace vt
