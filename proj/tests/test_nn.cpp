#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "vt/nn.hpp"

using namespace vt;
namespace fs = std::filesystem;

namespace {

TensorF random_tensor(std::vector<int> shape, Rng& rng) {
    TensorF t(std::move(shape));
    for (auto& v : t.data) v = (float)rng.uniform(-1, 1);
    return t;
}

double sum_squares(const TensorF& t) {
    double s = 0;
    for (float v : t.data) s += (double)v * v;
    return s;
}

TensorF two_x(const TensorF& t) {
    TensorF d = t;
    for (auto& v : d.data) v *= 2;
    return d;
}

}  // namespace

TEST_CASE("Adam matches the closed-form update for a constant gradient") {
    // With g = 1 every step, m_hat = v_hat = 1 exactly, so each step moves the
    // parameter by -lr / (1 + eps) regardless of step count.
    float w = 0.0f, g = 1.0f;
    Adam opt(0.1);
    opt.register_params({{"w", &w, &g, 1}});

    double m = 0, v = 0, ref = 0;
    for (int t = 1; t <= 3; ++t) {
        g = 1.0f;
        opt.step();
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(w == doctest::Approx(ref).epsilon(1e-6));
    }
    CHECK(opt.step_count() == 3);
}

TEST_CASE("Adam rejects non-finite gradients, naming the parameter") {
    float w = 0.0f, g = std::numeric_limits<float>::quiet_NaN();
    Adam opt(0.1);
    opt.register_params({{"enc.W", &w, &g, 1}});
    CHECK_THROWS_AS(opt.step(), std::exception);
    try {
        g = std::numeric_limits<float>::quiet_NaN();
        opt.step();
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("enc.W") != std::string::npos);
    }
}

TEST_CASE("Dense finite-difference gradient check") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        Dense layer(4, 3, /*relu=*/true);
        layer.init(rng);
        TensorF x = random_tensor({5, 4}, rng);

        auto loss = [&] { return sum_squares(layer.forward(x)); };
        auto back = [&] {
            layer.zero_grad();
            layer.backward(two_x(layer.forward(x)));
        };
        auto rep = grad_check(loss, back, layer.params("dense"), 1e-3, 64, seed);
        CAPTURE(seed);
        CHECK(rep.ok(1e-3));
    }
}

TEST_CASE("Conv2dCircular finite-difference gradient check") {
    Rng rng(11);
    Conv2dCircular layer(2, 3, /*relu=*/true);
    layer.init(rng);
    TensorF x = random_tensor({2, 5, 6}, rng);

    auto loss = [&] { return sum_squares(layer.forward(x)); };
    auto back = [&] {
        layer.zero_grad();
        layer.backward(two_x(layer.forward(x)));
    };
    auto rep = grad_check(loss, back, layer.params("conv"), 1e-3, 64, 11);
    CHECK(rep.ok(1e-3));
}

TEST_CASE("Conv2dCircular is equivariant to circular shifts along the angular axis") {
    Rng rng(5);
    Conv2dCircular layer(1, 2, /*relu=*/false);
    layer.init(rng);
    const int H = 4, W = 6, shift = 2;
    TensorF x = random_tensor({1, H, W}, rng);
    TensorF xs({1, H, W});
    for (int i = 0; i < H; ++i)
        for (int k = 0; k < W; ++k) xs.data[i * W + (k + shift) % W] = x.data[i * W + k];

    TensorF y = layer.forward(x);
    TensorF ys = layer.forward(xs);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < H; ++i)
            for (int k = 0; k < W; ++k)
                CHECK(ys.data[(c * H + i) * W + (k + shift) % W] ==
                      doctest::Approx(y.data[(c * H + i) * W + k]).epsilon(1e-5));
}

TEST_CASE("GraphConv finite-difference gradient check") {
    Rng rng(13);
    GraphConv layer(3, 4, /*relu=*/true);
    layer.init(rng);
    // 5-cycle graph
    std::vector<std::vector<int>> adj{{1, 4}, {0, 2}, {1, 3}, {2, 4}, {0, 3}};
    TensorF x = random_tensor({5, 3}, rng);

    auto loss = [&] { return sum_squares(layer.forward(x, adj)); };
    auto back = [&] {
        layer.zero_grad();
        layer.backward(two_x(layer.forward(x, adj)));
    };
    auto rep = grad_check(loss, back, layer.params("gc"), 1e-3, 64, 13);
    CHECK(rep.ok(1e-3));
}

TEST_CASE("GraphConv on a vertex-transitive graph maps constant fields to constant fields") {
    Rng rng(17);
    GraphConv layer(2, 2, /*relu=*/true);
    layer.init(rng);
    std::vector<std::vector<int>> adj{{1, 3}, {0, 2}, {1, 3}, {0, 2}};  // 4-cycle
    TensorF x({4, 2});
    for (int v = 0; v < 4; ++v) {
        x.data[v * 2 + 0] = 0.3f;
        x.data[v * 2 + 1] = -0.7f;
    }
    TensorF y = layer.forward(x, adj);
    for (int v = 1; v < 4; ++v)
        for (int f = 0; f < 2; ++f)
            CHECK(y.data[v * 2 + f] == doctest::Approx(y.data[f]).epsilon(1e-6));
}

TEST_CASE("checkpoint round trip preserves parameters and metadata") {
    fs::path dir = fs::temp_directory_path() / "vt_test_nn";
    fs::create_directories(dir);
    std::string path = (dir / "dense.ckpt").string();

    Rng rng(23);
    Dense a(3, 2, false), b(3, 2, false);
    a.init(rng);
    b.init(rng);  // different draws than a
    save_checkpoint(path, a.params("layer"), "{\"note\":42}");
    std::string meta = load_checkpoint(path, b.params("layer"));
    CHECK(meta.find("42") != std::string::npos);

    TensorF x = random_tensor({2, 3}, rng);
    TensorF ya = a.forward(x), yb = b.forward(x);
    for (size_t i = 0; i < ya.numel(); ++i) CHECK(ya.data[i] == yb.data[i]);

    // shape mismatch is rejected
    Dense wrong(3, 4, false);
    wrong.init(rng);
    CHECK_THROWS_AS(load_checkpoint(path, wrong.params("layer")), std::exception);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string(), b.params("layer")),
                    std::exception);
}

TEST_CASE("grad_check flags a deliberately wrong gradient") {
    float w = 0.5f, g = 0.0f;
    auto loss = [&] { return (double)w * w; };
    auto back = [&] { g = 3.0f * w; };  // true gradient is 2w
    auto rep = grad_check(loss, back, {{"w", &w, &g, 1}});
    CHECK_FALSE(rep.ok(1e-3));
    REQUIRE(!rep.worst.empty());
    CHECK(rep.worst[0].param == "w");
}
