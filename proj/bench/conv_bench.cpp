// Timing comparison between the OpenMP convolution kernels and the serial
// reference they are tested against, on layer shapes from the full-scale
// network. Also reports the worst elementwise deviation per case.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wavebeat/nn/kernels.hpp"
#include "wavebeat/nn/reference.hpp"
#include "wavebeat/rng.hpp"

using namespace wavebeat;

namespace {

struct Case {
    const char* name;
    std::size_t c_in, c_out, t_in, kernel, stride, dilation;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void fill_random(std::vector<float>& v, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
}

} // namespace

int main() {
    // Layer shapes from the published configuration at batch 1, shortened
    // input so the serial reference finishes in reasonable time.
    const std::vector<Case> cases = {
        {"layer1   1->32   d1", 1, 32, std::size_t(1) << 18, 15, 2, 1},
        {"layer2  32->64   d8", 32, 64, std::size_t(1) << 17, 15, 2, 8},
        {"layer4  96->128 d512", 96, 128, std::size_t(1) << 15, 15, 2, 512},
        {"layer8 224->256 d512", 224, 256, std::size_t(1) << 13, 15, 2, 512},
    };

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
    std::printf("OpenMP not enabled\n\n");
#endif
    std::printf("%-22s %12s %12s %9s %12s\n", "case", "serial ms", "parallel ms", "speedup",
                "max |diff|");

    Rng rng(1);
    for (const auto& c : cases) {
        const std::size_t padding = c.dilation * (c.kernel - 1) / 2;
        const std::size_t t_out =
            nn::ref::conv1d_output_length(c.t_in, c.kernel, c.stride, c.dilation, padding);
        std::vector<float> input(c.c_in * c.t_in), weight(c.c_out * c.c_in * c.kernel),
            bias(c.c_out), out_ref(c.c_out * t_out), out_fast(c.c_out * t_out);
        fill_random(input, rng);
        fill_random(weight, rng);
        fill_random(bias, rng);

        auto t0 = std::chrono::steady_clock::now();
        nn::ref::conv1d_forward(input.data(), weight.data(), bias.data(), out_ref.data(), 1,
                                c.c_in, c.t_in, c.c_out, c.kernel, c.stride, c.dilation, padding,
                                t_out);
        const double serial = seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        nn::kernels::conv1d_forward(input.data(), weight.data(), bias.data(), out_fast.data(),
                                    1, c.c_in, c.t_in, c.c_out, c.kernel, c.stride, c.dilation,
                                    padding, t_out);
        const double parallel = seconds_since(t0);

        float max_diff = 0.0f;
        for (std::size_t i = 0; i < out_ref.size(); ++i)
            max_diff = std::max(max_diff, std::abs(out_ref[i] - out_fast[i]));
        std::printf("%-22s %12.1f %12.1f %8.1fx %12.3g\n", c.name, serial * 1e3, parallel * 1e3,
                    serial / parallel, static_cast<double>(max_diff));
    }

    // Backward pass on one mid-network shape.
    {
        const Case c{"layer3 backward", 64, 96, std::size_t(1) << 14, 15, 2, 64};
        const std::size_t padding = c.dilation * (c.kernel - 1) / 2;
        const std::size_t t_out =
            nn::ref::conv1d_output_length(c.t_in, c.kernel, c.stride, c.dilation, padding);
        std::vector<float> input(c.c_in * c.t_in), weight(c.c_out * c.c_in * c.kernel),
            grad_out(c.c_out * t_out);
        std::vector<float> gi_ref(input.size()), gw_ref(weight.size()), gb_ref(c.c_out);
        std::vector<float> gi(input.size()), gw(weight.size()), gb(c.c_out);
        fill_random(input, rng);
        fill_random(weight, rng);
        fill_random(grad_out, rng);

        auto t0 = std::chrono::steady_clock::now();
        nn::ref::conv1d_backward(grad_out.data(), input.data(), weight.data(), gi_ref.data(),
                                 gw_ref.data(), gb_ref.data(), 1, c.c_in, c.t_in, c.c_out,
                                 c.kernel, c.stride, c.dilation, padding, t_out);
        const double serial = seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        nn::kernels::conv1d_backward(grad_out.data(), input.data(), weight.data(), gi.data(),
                                     gw.data(), gb.data(), 1, c.c_in, c.t_in, c.c_out, c.kernel,
                                     c.stride, c.dilation, padding, t_out);
        const double parallel = seconds_since(t0);

        float max_diff = 0.0f;
        for (std::size_t i = 0; i < gi.size(); ++i)
            max_diff = std::max(max_diff, std::abs(gi[i] - gi_ref[i]));
        for (std::size_t i = 0; i < gw.size(); ++i)
            max_diff = std::max(max_diff, std::abs(gw[i] - gw_ref[i]));
        std::printf("%-22s %12.1f %12.1f %8.1fx %12.3g\n", c.name, serial * 1e3, parallel * 1e3,
                    serial / parallel, static_cast<double>(max_diff));
    }
    return 0;
}
