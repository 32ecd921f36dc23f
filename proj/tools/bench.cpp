// Benchmarks the OpenMP kernels against their serial counterparts and checks
// that both produce identical results.

#include <chrono>
#include <cmath>
#include <cstdio>

#include <omp.h>

#include "vt/phantom.hpp"
#include "vt/surface.hpp"

using namespace vt;

namespace {

double now_ms() {
    using clk = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clk::now().time_since_epoch()).count();
}

template <typename F>
double time_ms(F&& f) {
    double t0 = now_ms();
    f();
    return now_ms() - t0;
}

}  // namespace

int main() {
    int max_threads = omp_get_max_threads();
    std::printf("max OpenMP threads: %d\n\n", max_threads);

    // phantom voxel fill: the per-voxel noise is counter-hashed, so thread
    // count must not change the output
    {
        TubeSpec spec;
        spec.centerline = make_polyline({{13, 60, 60}, {106, 60, 60}});
        spec.radius_knots = {{0, 10.0}};
        spec.noise_sigma = 0.05;
        GridInfo grid;
        grid.dims = {120, 120, 120};
        grid.spacing = {1, 1, 1};

        omp_set_num_threads(1);
        ScalarVolume serial;
        double t_serial = time_ms([&] { serial = gen_tube_volume(spec, grid, 7); });
        omp_set_num_threads(max_threads);
        ScalarVolume parallel;
        double t_parallel = time_ms([&] { parallel = gen_tube_volume(spec, grid, 7); });

        bool same = serial.data == parallel.data;
        std::printf("phantom fill %dx%dx%d: serial %.1f ms, %d threads %.1f ms (x%.2f), %s\n",
                    grid.dims[0], grid.dims[1], grid.dims[2], t_serial, max_threads, t_parallel,
                    t_serial / t_parallel, same ? "identical" : "MISMATCH");
        if (!same) return 1;
    }

    // SDF grid sampling (the marching-cubes inner loop)
    {
        SdfFn sphere = [](const WorldPoint& p) {
            return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) - 10.0;
        };
        std::array<int, 3> dims{96, 96, 96};
        omp_set_num_threads(max_threads);
        std::vector<double> a, b;
        double t_serial =
            time_ms([&] { a = sample_sdf_grid_serial(sphere, {-12, -12, -12}, dims, 0.25); });
        double t_parallel =
            time_ms([&] { b = sample_sdf_grid(sphere, {-12, -12, -12}, dims, 0.25); });
        bool same = a == b;
        std::printf("sdf grid %dx%dx%d:    serial %.1f ms, %d threads %.1f ms (x%.2f), %s\n",
                    dims[0], dims[1], dims[2], t_serial, max_threads, t_parallel,
                    t_serial / t_parallel, same ? "identical" : "MISMATCH");
        if (!same) return 1;
    }

    return 0;
}
