// Kernel benchmark: parallel production kernels vs the serial reference
// implementations, with a correctness cross-check on every case.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hseg/ops.hpp"
#include "hseg/rng.hpp"
#include "reference_ops.hpp"

using namespace hseg;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i)
        fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<float> random_weights(int64_t count, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> w(static_cast<size_t>(count));
    for (float& v : w)
        v = rng.uniform(-1.0f, 1.0f);
    return w;
}

struct Case {
    std::string name;
    std::function<LogicalTensor()> parallel;
    std::function<ref::Tensor4()> serial;
    int reps = 3;
};

void run_case(const Case& c) {
    const LogicalTensor out_p = c.parallel();
    const ref::Tensor4 out_s = c.serial();
    const double diff = ref::max_abs_diff(out_p, out_s);
    const double par_ms = time_ms([&] { c.parallel(); }, c.reps);
    const double ser_ms = time_ms([&] { c.serial(); }, c.reps);
    std::printf("%-28s %10.2f %10.2f %8.2fx   max|diff| %.2e\n", c.name.c_str(), ser_ms, par_ms,
                ser_ms / par_ms, diff);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial_ms", "omp_ms", "speedup");

    const Shape in_shape{1, 128, 128, 32};
    const LogicalTensor x = make_random(in_shape, Layout::Interleaved, 7);
    const ref::Tensor4 xr = ref::from_logical(x);

    {
        ConvSpec spec;
        spec.kh = spec.kw = 3;
        spec.cin = 32;
        spec.cout = 32;
        const auto w = random_weights(spec.weight_count(), 1);
        const auto b = random_weights(spec.cout, 2);
        run_case({"conv3x3 standard",
                  [&] { return conv2d(x, w, b, spec); },
                  [&] { return ref::conv2d(xr, w, b, spec); }});
    }
    {
        ConvSpec spec;
        spec.kh = spec.kw = 3;
        spec.cin = spec.cout = spec.groups = 32;
        const auto w = random_weights(spec.weight_count(), 3);
        const auto b = random_weights(spec.cout, 4);
        run_case({"conv3x3 depthwise",
                  [&] { return conv2d(x, w, b, spec); },
                  [&] { return ref::conv2d(xr, w, b, spec); }});
    }
    {
        ConvSpec spec;
        spec.kh = spec.kw = 3;
        spec.cin = spec.cout = 32;
        spec.groups = 4;
        const auto w = random_weights(spec.weight_count(), 5);
        const auto b = random_weights(spec.cout, 6);
        run_case({"conv3x3 group(4)",
                  [&] { return conv2d(x, w, b, spec); },
                  [&] { return ref::conv2d(xr, w, b, spec); }});
    }
    {
        ConvSpec spec;
        spec.cin = 32;
        spec.cout = 64;
        const auto w = random_weights(spec.weight_count(), 7);
        const auto b = random_weights(spec.cout, 8);
        run_case({"conv1x1 32->64",
                  [&] { return conv2d(x, w, b, spec); },
                  [&] { return ref::conv2d(xr, w, b, spec); }});
    }
    run_case({"bilinear_upsample x2",
              [&] { return bilinear_upsample(x, 2); },
              [&] { return ref::bilinear_upsample(xr, 2); }});
    run_case({"global_avg_pool",
              [&] { return global_avg_pool(x); },
              [&] { return ref::global_avg_pool(xr); },
              10});
    {
        const int c = 32, r = 4;
        const auto w1 = random_weights(static_cast<int64_t>(c) * (c / r), 9);
        const auto b1 = random_weights(c / r, 10);
        const auto w2 = random_weights(static_cast<int64_t>(c) * (c / r), 11);
        const auto b2 = random_weights(c, 12);
        run_case({"squeeze_excite r=4",
                  [&] { return squeeze_excite(x, w1, b1, w2, b2, r); },
                  [&] { return ref::squeeze_excite(xr, w1, b1, w2, b2, r); }});
    }
    {
        const LogicalTensor y = make_random(in_shape, Layout::Interleaved, 8);
        const ref::Tensor4 yr = ref::from_logical(y);
        run_case({"add", [&] { return add(x, y); }, [&] { return ref::add(xr, yr); }, 10});
    }
    run_case({"relu6",
              [&] { return activation(x, ActKind::ReLU6); },
              [&] { return ref::activation(xr, ActKind::ReLU6); },
              10});
    return 0;
}
