#pragma once

#include <cstddef>

namespace wavebeat::nn::ref {

// Serial reference convolution, written as the direct definition:
//   out[b,o,t] = bias[o] + sum_{i,k} weight[o,i,k] * input[b,i, t*stride + k*dilation - padding]
// with out-of-range input taps reading as zero.
//
// This is the oracle the OpenMP kernels are tested and benchmarked against.
// Keep it obviously correct; do not optimize it.

inline std::size_t conv1d_output_length(std::size_t t_in, std::size_t kernel,
                                        std::size_t stride, std::size_t dilation,
                                        std::size_t padding) {
    const std::size_t span = dilation * (kernel - 1) + 1;
    return (t_in + 2 * padding - span) / stride + 1;
}

template <typename S>
void conv1d_forward(const S* input, const S* weight, const S* bias, S* out,
                    std::size_t batch, std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t kernel,
                    std::size_t stride, std::size_t dilation, std::size_t padding,
                    std::size_t t_out) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t t = 0; t < t_out; ++t) {
                double acc = static_cast<double>(bias[o]);
                for (std::size_t i = 0; i < c_in; ++i)
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const std::ptrdiff_t src =
                            static_cast<std::ptrdiff_t>(t * stride + k * dilation) -
                            static_cast<std::ptrdiff_t>(padding);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
                        acc += static_cast<double>(weight[(o * c_in + i) * kernel + k]) *
                               static_cast<double>(input[(b * c_in + i) * t_in + src]);
                    }
                out[(b * c_out + o) * t_out + t] = static_cast<S>(acc);
            }
}

template <typename S>
void conv1d_backward(const S* grad_out, const S* input, const S* weight,
                     S* grad_input, S* grad_weight, S* grad_bias,
                     std::size_t batch, std::size_t c_in, std::size_t t_in,
                     std::size_t c_out, std::size_t kernel,
                     std::size_t stride, std::size_t dilation, std::size_t padding,
                     std::size_t t_out) {
    for (std::size_t i = 0; i < batch * c_in * t_in; ++i) grad_input[i] = S(0);
    for (std::size_t i = 0; i < c_out * c_in * kernel; ++i) grad_weight[i] = S(0);
    for (std::size_t o = 0; o < c_out; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < t_out; ++t)
                acc += static_cast<double>(grad_out[(b * c_out + o) * t_out + t]);
        grad_bias[o] = static_cast<S>(acc);
    }
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t t = 0; t < t_out; ++t) {
                const double g = static_cast<double>(grad_out[(b * c_out + o) * t_out + t]);
                for (std::size_t i = 0; i < c_in; ++i)
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const std::ptrdiff_t src =
                            static_cast<std::ptrdiff_t>(t * stride + k * dilation) -
                            static_cast<std::ptrdiff_t>(padding);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
                        grad_weight[(o * c_in + i) * kernel + k] += static_cast<S>(
                            g * static_cast<double>(input[(b * c_in + i) * t_in + src]));
                        grad_input[(b * c_in + i) * t_in + src] += static_cast<S>(
                            g * static_cast<double>(weight[(o * c_in + i) * kernel + k]));
                    }
            }
}

} // namespace wavebeat::nn::ref
