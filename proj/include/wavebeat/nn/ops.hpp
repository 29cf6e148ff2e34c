#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wavebeat/nn/kernels.hpp"
#include "wavebeat/tensor.hpp"

namespace wavebeat::nn {

struct Conv1dSpec {
    std::size_t stride{1};
    std::size_t dilation{1};
    std::size_t padding{0};
};

inline void check_conv_args(const std::vector<std::size_t>& input_shape,
                            const std::vector<std::size_t>& weight_shape,
                            const std::vector<std::size_t>& bias_shape,
                            const Conv1dSpec& spec) {
    if (input_shape.size() != 3 || weight_shape.size() != 3 || bias_shape.size() != 1)
        throw std::invalid_argument("conv1d expects input [B,C,T], weight [O,C,K], bias [O]");
    if (input_shape[1] != weight_shape[1])
        throw std::invalid_argument("conv1d channel mismatch: input " + shape_string(input_shape) +
                                    " vs weight " + shape_string(weight_shape));
    if (bias_shape[0] != weight_shape[0])
        throw std::invalid_argument("conv1d bias size mismatch");
    if (spec.stride < 1 || spec.dilation < 1)
        throw std::invalid_argument("conv1d stride and dilation must be >= 1");
    const std::size_t span = spec.dilation * (weight_shape[2] - 1) + 1;
    if (input_shape[2] + 2 * spec.padding < span)
        throw std::invalid_argument("conv1d input too short for kernel span");
}

template <typename S>
TensorT<S> conv1d_forward(const TensorT<S>& input, const TensorT<S>& weight,
                          const TensorT<S>& bias, const Conv1dSpec& spec) {
    check_conv_args(input.shape(), weight.shape(), bias.shape(), spec);
    const std::size_t batch = input.dim(0), c_in = input.dim(1), t_in = input.dim(2);
    const std::size_t c_out = weight.dim(0), kernel = weight.dim(2);
    const std::size_t t_out =
        (t_in + 2 * spec.padding - (spec.dilation * (kernel - 1) + 1)) / spec.stride + 1;
    TensorT<S> out({batch, c_out, t_out});
    kernels::conv1d_forward(input.data(), weight.data(), bias.data(), out.data(), batch, c_in,
                            t_in, c_out, kernel, spec.stride, spec.dilation, spec.padding, t_out);
    return out;
}

template <typename S>
struct Conv1dGrads {
    TensorT<S> input;
    TensorT<S> weight;
    TensorT<S> bias;
};

template <typename S>
Conv1dGrads<S> conv1d_backward(const TensorT<S>& grad_out, const TensorT<S>& input,
                               const TensorT<S>& weight, const Conv1dSpec& spec) {
    if (grad_out.rank() != 3 || grad_out.dim(0) != input.dim(0) ||
        grad_out.dim(1) != weight.dim(0))
        throw std::invalid_argument("conv1d_backward shape mismatch");
    Conv1dGrads<S> g{TensorT<S>(input.shape()), TensorT<S>(weight.shape()),
                     TensorT<S>({weight.dim(0)})};
    kernels::conv1d_backward(grad_out.data(), input.data(), weight.data(), g.input.data(),
                             g.weight.data(), g.bias.data(), input.dim(0), input.dim(1),
                             input.dim(2), weight.dim(0), weight.dim(2), spec.stride,
                             spec.dilation, spec.padding, grad_out.dim(2));
    return g;
}

// ---------------------------------------------------------------------------
// Batch normalization over [B, C, T], statistics per channel across B and T.

template <typename S>
struct BatchNormState {
    TensorT<S> running_mean;
    TensorT<S> running_var;
    bool initialized{false};

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean({channels}), running_var(TensorT<S>::full({channels}, S(1))) {}
};

template <typename S>
struct BatchNormContext {
    TensorT<S> x_hat;            // normalized input, saved for backward
    std::vector<double> inv_std; // per channel
};

template <typename S>
TensorT<S> batchnorm1d_forward(const TensorT<S>& input, const TensorT<S>& gamma,
                               const TensorT<S>& beta, BatchNormState<S>& state, bool training,
                               double momentum, double eps,
                               BatchNormContext<S>* ctx = nullptr) {
    if (input.rank() != 3) throw std::invalid_argument("batchnorm expects [B,C,T]");
    const std::size_t batch = input.dim(0), channels = input.dim(1), t_len = input.dim(2);
    if (gamma.numel() != channels || beta.numel() != channels ||
        state.running_mean.numel() != channels)
        throw std::invalid_argument("batchnorm channel mismatch");
    if (eps <= 0) throw std::invalid_argument("batchnorm eps must be positive");
    if (!training && !state.initialized)
        throw std::logic_error("batchnorm eval mode requires initialized running statistics");

    TensorT<S> out(input.shape());
    if (ctx) {
        ctx->x_hat = TensorT<S>(input.shape());
        ctx->inv_std.assign(channels, 0.0);
    }
    const std::size_t count = batch * t_len;

#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < channels; ++c) {
        double mean, var;
        if (training) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const S* row = input.data() + (b * channels + c) * t_len;
                for (std::size_t t = 0; t < t_len; ++t) {
                    const double x = static_cast<double>(row[t]);
                    sum += x;
                    sum_sq += x * x;
                }
            }
            mean = sum / static_cast<double>(count);
            var = sum_sq / static_cast<double>(count) - mean * mean;
            if (var < 0) var = 0; // guard tiny negative from cancellation
            // Exponential moving average; running variance uses the unbiased
            // estimate when possible.
            const double unbiased =
                count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
            state.running_mean[c] = static_cast<S>((1.0 - momentum) *
                                                       static_cast<double>(state.running_mean[c]) +
                                                   momentum * mean);
            state.running_var[c] = static_cast<S>(
                (1.0 - momentum) * static_cast<double>(state.running_var[c]) + momentum * unbiased);
        } else {
            mean = static_cast<double>(state.running_mean[c]);
            var = static_cast<double>(state.running_var[c]);
        }
        const double inv_std = 1.0 / std::sqrt(var + eps);
        const double g = static_cast<double>(gamma[c]);
        const double b0 = static_cast<double>(beta[c]);
        if (ctx) ctx->inv_std[c] = inv_std;
        for (std::size_t b = 0; b < batch; ++b) {
            const S* row = input.data() + (b * channels + c) * t_len;
            S* out_row = out.data() + (b * channels + c) * t_len;
            S* hat_row = ctx ? ctx->x_hat.data() + (b * channels + c) * t_len : nullptr;
            for (std::size_t t = 0; t < t_len; ++t) {
                const double x_hat = (static_cast<double>(row[t]) - mean) * inv_std;
                if (hat_row) hat_row[t] = static_cast<S>(x_hat);
                out_row[t] = static_cast<S>(g * x_hat + b0);
            }
        }
    }
    if (training) state.initialized = true;
    return out;
}

template <typename S>
struct BatchNormGrads {
    TensorT<S> input;
    TensorT<S> gamma;
    TensorT<S> beta;
};

// Backward through the training-mode path (batch statistics).
template <typename S>
BatchNormGrads<S> batchnorm1d_backward(const TensorT<S>& grad_out, const BatchNormContext<S>& ctx,
                                       const TensorT<S>& gamma) {
    const std::size_t batch = grad_out.dim(0), channels = grad_out.dim(1),
                      t_len = grad_out.dim(2);
    BatchNormGrads<S> g{TensorT<S>(grad_out.shape()), TensorT<S>({channels}),
                        TensorT<S>({channels})};
    const double count = static_cast<double>(batch * t_len);

#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const S* dy = grad_out.data() + (b * channels + c) * t_len;
            const S* xh = ctx.x_hat.data() + (b * channels + c) * t_len;
            for (std::size_t t = 0; t < t_len; ++t) {
                sum_dy += static_cast<double>(dy[t]);
                sum_dy_xhat += static_cast<double>(dy[t]) * static_cast<double>(xh[t]);
            }
        }
        g.beta[c] = static_cast<S>(sum_dy);
        g.gamma[c] = static_cast<S>(sum_dy_xhat);
        const double gam = static_cast<double>(gamma[c]);
        const double inv_std = ctx.inv_std[c];
        const double mean_dy = sum_dy / count;
        const double mean_dy_xhat = sum_dy_xhat / count;
        for (std::size_t b = 0; b < batch; ++b) {
            const S* dy = grad_out.data() + (b * channels + c) * t_len;
            const S* xh = ctx.x_hat.data() + (b * channels + c) * t_len;
            S* dx = g.input.data() + (b * channels + c) * t_len;
            for (std::size_t t = 0; t < t_len; ++t) {
                const double d = static_cast<double>(dy[t]) - mean_dy -
                                 static_cast<double>(xh[t]) * mean_dy_xhat;
                dx[t] = static_cast<S>(gam * inv_std * d);
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// PReLU with one learnable slope per channel. x == 0 takes the identity branch.

template <typename S>
TensorT<S> prelu_forward(const TensorT<S>& input, const TensorT<S>& alpha) {
    if (input.rank() != 3 || alpha.numel() != input.dim(1))
        throw std::invalid_argument("prelu expects [B,C,T] input and per-channel alpha");
    const std::size_t batch = input.dim(0), channels = input.dim(1), t_len = input.dim(2);
    TensorT<S> out(input.shape());
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c) {
            const S a = alpha[c];
            const S* row = input.data() + (b * channels + c) * t_len;
            S* out_row = out.data() + (b * channels + c) * t_len;
            for (std::size_t t = 0; t < t_len; ++t)
                out_row[t] = row[t] >= S(0) ? row[t] : a * row[t];
        }
    return out;
}

template <typename S>
struct PreluGrads {
    TensorT<S> input;
    TensorT<S> alpha;
};

template <typename S>
PreluGrads<S> prelu_backward(const TensorT<S>& grad_out, const TensorT<S>& input,
                             const TensorT<S>& alpha) {
    const std::size_t batch = input.dim(0), channels = input.dim(1), t_len = input.dim(2);
    PreluGrads<S> g{TensorT<S>(input.shape()), TensorT<S>({channels})};
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < channels; ++c) {
        const S a = alpha[c];
        double da = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const S* dy = grad_out.data() + (b * channels + c) * t_len;
            const S* x = input.data() + (b * channels + c) * t_len;
            S* dx = g.input.data() + (b * channels + c) * t_len;
            for (std::size_t t = 0; t < t_len; ++t) {
                if (x[t] >= S(0)) {
                    dx[t] = dy[t];
                } else {
                    dx[t] = a * dy[t];
                    da += static_cast<double>(dy[t]) * static_cast<double>(x[t]);
                }
            }
        }
        g.alpha[c] = static_cast<S>(da);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Numerically stable sigmoid.

template <typename S>
inline S sigmoid_scalar(S x) {
    if (x >= S(0)) {
        const S e = std::exp(-x);
        return S(1) / (S(1) + e);
    }
    const S e = std::exp(x);
    return e / (S(1) + e);
}

template <typename S>
TensorT<S> sigmoid_forward(const TensorT<S>& input) {
    TensorT<S> out(input.shape());
    const std::size_t n = input.numel();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(input[i]);
    return out;
}

template <typename S>
TensorT<S> sigmoid_backward(const TensorT<S>& grad_out, const TensorT<S>& output) {
    TensorT<S> dx(grad_out.shape());
    const std::size_t n = grad_out.numel();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) dx[i] = grad_out[i] * output[i] * (S(1) - output[i]);
    return dx;
}

// ---------------------------------------------------------------------------

template <typename S>
void add_inplace(TensorT<S>& a, const TensorT<S>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_inplace shape mismatch");
    const std::size_t n = a.numel();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
}

} // namespace wavebeat::nn
