#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wavebeat::nn::kernels {

// OpenMP convolution kernels. Work is partitioned so every output element is
// written by exactly one thread with a fixed serial reduction order, which
// keeps results bit-identical for any thread count (and identical to the
// serial reference in nn/reference.hpp, which accumulates the same way).
//
// For strided convolutions the input is de-interleaved into `stride` phase
// rows once per call, turning every tap's inner loop into a unit-stride
// multiply-accumulate the compiler can vectorize. Accumulation is double
// precision, storage is S.

namespace detail {

// Valid output range [t_lo, t_hi) for tap offset `off`: 0 <= t*stride + off < t_in.
inline void tap_range(std::ptrdiff_t off, std::size_t stride, std::size_t t_in,
                      std::size_t t_out, std::size_t& t_lo, std::size_t& t_hi) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    const auto n = static_cast<std::ptrdiff_t>(t_out);
    std::ptrdiff_t lo = 0;
    if (off < 0) lo = (-off + s - 1) / s;
    std::ptrdiff_t hi = 0;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(t_in) - 1 - off;
    if (last >= 0) hi = last / s + 1;
    if (lo > n) lo = n;
    if (hi > n) hi = n;
    if (hi < lo) hi = lo;
    t_lo = static_cast<std::size_t>(lo);
    t_hi = static_cast<std::size_t>(hi);
}

inline std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Phase-major copy: out[phase * phase_len + j] = row[j * stride + phase].
// A tap offset c then reads out[(c mod stride) * phase_len + t + floor(c / stride)]
// at output index t, i.e. unit stride in t.
template <typename S>
void deinterleave_row(const S* row, std::size_t t_in, std::size_t stride,
                      std::size_t phase_len, S* out) {
    std::fill(out, out + stride * phase_len, S(0));
    for (std::size_t t = 0; t < t_in; ++t)
        out[(t % stride) * phase_len + t / stride] = row[t];
}

} // namespace detail

template <typename S>
void conv1d_forward(const S* input, const S* weight, const S* bias, S* out,
                    std::size_t batch, std::size_t c_in, std::size_t t_in,
                    std::size_t c_out, std::size_t kernel,
                    std::size_t stride, std::size_t dilation, std::size_t padding,
                    std::size_t t_out) {
    const bool split = stride > 1;
    const std::size_t phase_len = (t_in + stride - 1) / stride;
    std::vector<S> phases;
    if (split) {
        phases.resize(batch * c_in * stride * phase_len);
#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < c_in; ++i)
                detail::deinterleave_row(input + (b * c_in + i) * t_in, t_in, stride, phase_len,
                                         phases.data() + (b * c_in + i) * stride * phase_len);
    }

    // Time-axis tiles keep the accumulator in L1 across the c_in * kernel
    // passes.
    constexpr std::size_t kTile = 2048;
#pragma omp parallel
    {
        std::vector<double> acc(std::min(kTile, t_out));
#pragma omp for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < c_out; ++o) {
                S* out_row = out + (b * c_out + o) * t_out;
                for (std::size_t tile_lo = 0; tile_lo < t_out; tile_lo += kTile) {
                    const std::size_t tile_hi = std::min(tile_lo + kTile, t_out);
                    std::fill(acc.begin(), acc.begin() + (tile_hi - tile_lo),
                              static_cast<double>(bias[o]));
                    for (std::size_t i = 0; i < c_in; ++i) {
                        const S* row = split ? phases.data() + (b * c_in + i) * stride * phase_len
                                             : input + (b * c_in + i) * t_in;
                        for (std::size_t k = 0; k < kernel; ++k) {
                            const double w =
                                static_cast<double>(weight[(o * c_in + i) * kernel + k]);
                            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k * dilation) -
                                                       static_cast<std::ptrdiff_t>(padding);
                            std::size_t t_lo, t_hi;
                            detail::tap_range(off, stride, t_in, t_out, t_lo, t_hi);
                            t_lo = std::max(t_lo, tile_lo);
                            t_hi = std::min(t_hi, tile_hi);
                            if (t_lo >= t_hi) continue;
                            const S* src;
                            if (split) {
                                const std::ptrdiff_t q = detail::floor_div(
                                    off, static_cast<std::ptrdiff_t>(stride));
                                const std::size_t phase = static_cast<std::size_t>(
                                    off - q * static_cast<std::ptrdiff_t>(stride));
                                src = row + phase * phase_len + q;
                            } else {
                                src = row + off;
                            }
                            const std::size_t n = t_hi - t_lo;
                            const S* __restrict s = src + t_lo;
                            double* __restrict a = acc.data() + (t_lo - tile_lo);
                            for (std::size_t j = 0; j < n; ++j)
                                a[j] += w * static_cast<double>(s[j]);
                        }
                    }
                    for (std::size_t t = tile_lo; t < tile_hi; ++t)
                        out_row[t] = static_cast<S>(acc[t - tile_lo]);
                }
            }
    }
}

template <typename S>
void conv1d_backward(const S* grad_out, const S* input, const S* weight,
                     S* grad_input, S* grad_weight, S* grad_bias,
                     std::size_t batch, std::size_t c_in, std::size_t t_in,
                     std::size_t c_out, std::size_t kernel,
                     std::size_t stride, std::size_t dilation, std::size_t padding,
                     std::size_t t_out) {
    const bool split = stride > 1;
    const std::size_t phase_len = (t_in + stride - 1) / stride;
    const auto s_stride = static_cast<std::ptrdiff_t>(stride);

    auto tap_src = [&](const S* row, std::ptrdiff_t off) {
        if (!split) return row + off;
        const std::ptrdiff_t q = detail::floor_div(off, s_stride);
        const std::size_t phase = static_cast<std::size_t>(off - q * s_stride);
        return row + phase * phase_len + q;
    };

    std::vector<S> phases;
    if (split) {
        phases.resize(batch * c_in * stride * phase_len);
#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < c_in; ++i)
                detail::deinterleave_row(input + (b * c_in + i) * t_in, t_in, stride, phase_len,
                                         phases.data() + (b * c_in + i) * stride * phase_len);
    }

    // grad_bias: one output channel per iteration.
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < c_out; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const S* g = grad_out + (b * c_out + o) * t_out;
            for (std::size_t t = 0; t < t_out; ++t) acc += static_cast<double>(g[t]);
        }
        grad_bias[o] = static_cast<S>(acc);
    }

    // grad_weight: each (o, i) row owned by one thread.
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t o = 0; o < c_out; ++o)
        for (std::size_t i = 0; i < c_in; ++i)
            for (std::size_t k = 0; k < kernel; ++k) {
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k * dilation) -
                                           static_cast<std::ptrdiff_t>(padding);
                std::size_t t_lo, t_hi;
                detail::tap_range(off, stride, t_in, t_out, t_lo, t_hi);
                double acc = 0.0;
                for (std::size_t b = 0; t_lo < t_hi && b < batch; ++b) {
                    const S* g = grad_out + (b * c_out + o) * t_out;
                    const S* row = split ? phases.data() + (b * c_in + i) * stride * phase_len
                                         : input + (b * c_in + i) * t_in;
                    const S* src = tap_src(row, off);
                    for (std::size_t t = t_lo; t < t_hi; ++t)
                        acc += static_cast<double>(g[t]) * static_cast<double>(src[t]);
                }
                grad_weight[(o * c_in + i) * kernel + k] = static_cast<S>(acc);
            }

    // grad_input: each (b, i) row owned by one thread, accumulated in
    // phase-major layout and interleaved back at the end.
#pragma omp parallel
    {
        std::vector<double> acc(split ? stride * phase_len : t_in);
#pragma omp for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < c_in; ++i) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t o = 0; o < c_out; ++o) {
                    const S* g = grad_out + (b * c_out + o) * t_out;
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const double w = static_cast<double>(weight[(o * c_in + i) * kernel + k]);
                        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k * dilation) -
                                                   static_cast<std::ptrdiff_t>(padding);
                        std::size_t t_lo, t_hi;
                        detail::tap_range(off, stride, t_in, t_out, t_lo, t_hi);
                        if (t_lo >= t_hi) continue;
                        double* dst;
                        if (split) {
                            const std::ptrdiff_t q = detail::floor_div(off, s_stride);
                            const std::size_t phase =
                                static_cast<std::size_t>(off - q * s_stride);
                            dst = acc.data() + phase * phase_len + q;
                        } else {
                            dst = acc.data() + off;
                        }
                        for (std::size_t t = t_lo; t < t_hi; ++t)
                            dst[t] += w * static_cast<double>(g[t]);
                    }
                }
                S* out_row = grad_input + (b * c_in + i) * t_in;
                if (split) {
                    for (std::size_t t = 0; t < t_in; ++t)
                        out_row[t] = static_cast<S>(acc[(t % stride) * phase_len + t / stride]);
                } else {
                    for (std::size_t t = 0; t < t_in; ++t) out_row[t] = static_cast<S>(acc[t]);
                }
            }
    }
}

} // namespace wavebeat::nn::kernels
