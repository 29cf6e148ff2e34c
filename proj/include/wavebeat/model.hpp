#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavebeat/nn/ops.hpp"
#include "wavebeat/rng.hpp"
#include "wavebeat/tensor.hpp"

namespace wavebeat {

// Architecture hyperparameters. Defaults give the full-scale network: two
// stacks of four residual blocks, kernel 15, stride 2, dilations 8^(l-1)
// repeating per stack, channels growing by 32 per layer, 256x downsampling.
struct ModelConfig {
    int input_channels{1};
    int output_channels{2};
    int n_stacks{2};
    int blocks_per_stack{4};
    int kernel_size{15};
    int stride{2};
    int dilation_base{8};
    int channel_growth{32};
    double sample_rate{22050.0};

    int layers() const { return n_stacks * blocks_per_stack; }

    std::int64_t downsample_factor() const {
        std::int64_t f = 1;
        for (int l = 0; l < layers(); ++l) f *= stride;
        return f;
    }

    double frame_rate() const { return sample_rate / static_cast<double>(downsample_factor()); }

    // 1-based global layer index.
    std::int64_t dilation_at(int layer) const {
        std::int64_t d = 1;
        for (int i = 0; i < (layer - 1) % blocks_per_stack; ++i) d *= dilation_base;
        return d;
    }

    int channels_at(int layer) const { return channel_growth * layer; }

    void validate() const {
        if (input_channels < 1 || output_channels < 1 || n_stacks < 1 || blocks_per_stack < 1 ||
            kernel_size < 1 || stride < 1 || dilation_base < 1 || channel_growth < 1 ||
            sample_rate <= 0)
            throw std::invalid_argument("model config fields must be positive");
        if (kernel_size % 2 == 0)
            throw std::invalid_argument("kernel_size must be odd for centered padding");
    }
};

ModelConfig model_config_from_file(const std::string& path);
void model_config_to_file(const ModelConfig& cfg, const std::string& path);

struct ReceptiveField {
    std::int64_t samples{1};
    double seconds{0.0};
};

// RF = 1 + sum_l (K-1) * d_l * prod_{j<l} stride, the span of input samples
// feeding one output frame.
inline ReceptiveField receptive_field(const ModelConfig& cfg) {
    cfg.validate();
    std::int64_t rf = 1;
    std::int64_t cumulative_stride = 1;
    for (int l = 1; l <= cfg.layers(); ++l) {
        rf += static_cast<std::int64_t>(cfg.kernel_size - 1) * cfg.dilation_at(l) *
              cumulative_stride;
        cumulative_stride *= cfg.stride;
    }
    return {rf, static_cast<double>(rf) / cfg.sample_rate};
}

// The WaveBeat network: residual blocks of (strided dilated conv -> batchnorm
// -> PReLU) with a strided 1x1 skip convolution, then a 1x1 head and sigmoid.
template <typename S>
class WaveBeatModelT {
public:
    struct Block {
        ParameterT<S> conv_w, conv_b;
        ParameterT<S> bn_gamma, bn_beta;
        ParameterT<S> prelu_alpha;
        ParameterT<S> skip_w, skip_b;
        nn::BatchNormState<S> bn_state;
        nn::Conv1dSpec main_spec;
        nn::Conv1dSpec skip_spec;
    };

    struct BlockContext {
        TensorT<S> input;
        nn::BatchNormContext<S> bn;
        TensorT<S> bn_out;
    };

    struct ForwardContext {
        std::vector<BlockContext> blocks;
        TensorT<S> head_input;
        TensorT<S> output;
    };

    static WaveBeatModelT build(const ModelConfig& cfg, std::uint64_t init_seed) {
        cfg.validate();
        WaveBeatModelT model;
        model.cfg_ = cfg;
        Rng rng(splitmix64(init_seed ^ 0x57415645u));
        int c_prev = cfg.input_channels;
        for (int l = 1; l <= cfg.layers(); ++l) {
            Block blk;
            const int c_out = cfg.channels_at(l);
            const auto dilation = static_cast<std::size_t>(cfg.dilation_at(l));
            const std::string prefix = "blocks." + std::to_string(l - 1) + ".";
            blk.main_spec = {static_cast<std::size_t>(cfg.stride), dilation,
                             dilation * static_cast<std::size_t>(cfg.kernel_size - 1) / 2};
            blk.skip_spec = {static_cast<std::size_t>(cfg.stride), 1, 0};
            blk.conv_w = kaiming_conv(prefix + "conv.weight", c_out, c_prev, cfg.kernel_size, rng);
            blk.conv_b = ParameterT<S>(prefix + "conv.bias",
                                       TensorT<S>({static_cast<std::size_t>(c_out)}));
            blk.bn_gamma = ParameterT<S>(
                prefix + "bn.gamma",
                TensorT<S>::full({static_cast<std::size_t>(c_out)}, S(1)));
            blk.bn_beta = ParameterT<S>(prefix + "bn.beta",
                                        TensorT<S>({static_cast<std::size_t>(c_out)}));
            blk.prelu_alpha = ParameterT<S>(
                prefix + "prelu.alpha",
                TensorT<S>::full({static_cast<std::size_t>(c_out)}, S(0.25)));
            blk.skip_w = kaiming_conv(prefix + "skip.weight", c_out, c_prev, 1, rng);
            blk.skip_b = ParameterT<S>(prefix + "skip.bias",
                                       TensorT<S>({static_cast<std::size_t>(c_out)}));
            blk.bn_state = nn::BatchNormState<S>(static_cast<std::size_t>(c_out));
            model.blocks_.push_back(std::move(blk));
            c_prev = c_out;
        }
        model.head_w_ = kaiming_conv("head.weight", cfg.output_channels, c_prev, 1, rng);
        model.head_b_ = ParameterT<S>(
            "head.bias", TensorT<S>({static_cast<std::size_t>(cfg.output_channels)}));
        return model;
    }

    const ModelConfig& config() const { return cfg_; }
    void train() { training_ = true; }
    void eval() { training_ = false; }
    bool is_training() const { return training_; }

    // Inference-style forward; in train mode batch statistics are used and
    // running statistics updated, but nothing is kept for backward.
    TensorT<S> forward(const TensorT<S>& input) {
        check_input(input);
        TensorT<S> x = input;
        for (auto& blk : blocks_) {
            TensorT<S> main = nn::conv1d_forward(x, blk.conv_w.value, blk.conv_b.value,
                                                 blk.main_spec);
            main = nn::batchnorm1d_forward(main, blk.bn_gamma.value, blk.bn_beta.value,
                                           blk.bn_state, training_, kBnMomentum, kBnEps);
            main = nn::prelu_forward(main, blk.prelu_alpha.value);
            TensorT<S> skip = nn::conv1d_forward(x, blk.skip_w.value, blk.skip_b.value,
                                                 blk.skip_spec);
            nn::add_inplace(main, skip);
            x = std::move(main);
        }
        TensorT<S> head = nn::conv1d_forward(x, head_w_.value, head_b_.value, nn::Conv1dSpec{});
        return nn::sigmoid_forward(head);
    }

    // Forward pass that records everything backward() needs.
    TensorT<S> forward_train(const TensorT<S>& input, ForwardContext& ctx) {
        check_input(input);
        ctx.blocks.clear();
        ctx.blocks.resize(blocks_.size());
        TensorT<S> x = input;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            Block& blk = blocks_[i];
            BlockContext& bctx = ctx.blocks[i];
            bctx.input = x;
            TensorT<S> main = nn::conv1d_forward(x, blk.conv_w.value, blk.conv_b.value,
                                                 blk.main_spec);
            main = nn::batchnorm1d_forward(main, blk.bn_gamma.value, blk.bn_beta.value,
                                           blk.bn_state, true, kBnMomentum, kBnEps, &bctx.bn);
            bctx.bn_out = main;
            main = nn::prelu_forward(main, blk.prelu_alpha.value);
            TensorT<S> skip = nn::conv1d_forward(x, blk.skip_w.value, blk.skip_b.value,
                                                 blk.skip_spec);
            nn::add_inplace(main, skip);
            x = std::move(main);
        }
        ctx.head_input = x;
        TensorT<S> head = nn::conv1d_forward(x, head_w_.value, head_b_.value, nn::Conv1dSpec{});
        ctx.output = nn::sigmoid_forward(head);
        return ctx.output;
    }

    // Accumulates parameter gradients; returns the gradient w.r.t. the input.
    TensorT<S> backward(const ForwardContext& ctx, const TensorT<S>& grad_output) {
        TensorT<S> dh = nn::sigmoid_backward(grad_output, ctx.output);
        auto head_grads = nn::conv1d_backward(dh, ctx.head_input, head_w_.value,
                                              nn::Conv1dSpec{});
        accumulate(head_w_.grad, head_grads.weight);
        accumulate(head_b_.grad, head_grads.bias);
        TensorT<S> dx = std::move(head_grads.input);
        for (std::size_t i = blocks_.size(); i-- > 0;) {
            Block& blk = blocks_[i];
            const BlockContext& bctx = ctx.blocks[i];
            auto prelu_grads = nn::prelu_backward(dx, bctx.bn_out, blk.prelu_alpha.value);
            accumulate(blk.prelu_alpha.grad, prelu_grads.alpha);
            auto bn_grads = nn::batchnorm1d_backward(prelu_grads.input, bctx.bn,
                                                     blk.bn_gamma.value);
            accumulate(blk.bn_gamma.grad, bn_grads.gamma);
            accumulate(blk.bn_beta.grad, bn_grads.beta);
            auto main_grads = nn::conv1d_backward(bn_grads.input, bctx.input, blk.conv_w.value,
                                                  blk.main_spec);
            accumulate(blk.conv_w.grad, main_grads.weight);
            accumulate(blk.conv_b.grad, main_grads.bias);
            auto skip_grads = nn::conv1d_backward(dx, bctx.input, blk.skip_w.value,
                                                  blk.skip_spec);
            accumulate(blk.skip_w.grad, skip_grads.weight);
            accumulate(blk.skip_b.grad, skip_grads.bias);
            nn::add_inplace(main_grads.input, skip_grads.input);
            dx = std::move(main_grads.input);
        }
        return dx;
    }

    std::vector<ParameterT<S>*> parameters() {
        std::vector<ParameterT<S>*> out;
        for (auto& blk : blocks_)
            for (ParameterT<S>* p : {&blk.conv_w, &blk.conv_b, &blk.bn_gamma, &blk.bn_beta,
                                     &blk.prelu_alpha, &blk.skip_w, &blk.skip_b})
                out.push_back(p);
        out.push_back(&head_w_);
        out.push_back(&head_b_);
        return out;
    }

    // Parameters plus batchnorm running statistics, for checkpointing.
    std::vector<std::pair<std::string, TensorT<S>*>> state_tensors() {
        std::vector<std::pair<std::string, TensorT<S>*>> out;
        for (auto* p : parameters()) out.emplace_back(p->name, &p->value);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const std::string prefix = "blocks." + std::to_string(i) + ".bn.";
            out.emplace_back(prefix + "running_mean", &blocks_[i].bn_state.running_mean);
            out.emplace_back(prefix + "running_var", &blocks_[i].bn_state.running_var);
        }
        return out;
    }

    void mark_stats_initialized() {
        for (auto& blk : blocks_) blk.bn_state.initialized = true;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (const auto* p : parameters())
            if (p->trainable) n += static_cast<std::int64_t>(p->value.numel());
        return n;
    }

    void zero_grad() {
        for (auto* p : parameters()) p->zero_grad();
    }

    std::vector<Block>& blocks() { return blocks_; }
    ParameterT<S>& head_weight() { return head_w_; }
    ParameterT<S>& head_bias() { return head_b_; }

    static constexpr double kBnMomentum = 0.1;
    static constexpr double kBnEps = 1e-5;

private:
    void check_input(const TensorT<S>& input) const {
        if (input.rank() != 3 || input.dim(1) != static_cast<std::size_t>(cfg_.input_channels))
            throw std::invalid_argument("model input must be [B, " +
                                        std::to_string(cfg_.input_channels) + ", T]");
        const std::size_t t = input.dim(2);
        if (t == 0) throw std::invalid_argument("model input is empty");
        if (t % static_cast<std::size_t>(cfg_.downsample_factor()) != 0)
            throw std::invalid_argument(
                "model input length must be a multiple of " +
                std::to_string(cfg_.downsample_factor()) + ", got " + std::to_string(t));
    }

    static ParameterT<S> kaiming_conv(const std::string& name, int c_out, int c_in, int kernel,
                                      Rng& rng) {
        TensorT<S> w({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in),
                      static_cast<std::size_t>(kernel)});
        const double fan_in = static_cast<double>(c_in) * kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < w.numel(); ++i)
            w[i] = static_cast<S>(rng.uniform(-bound, bound));
        return ParameterT<S>(name, std::move(w));
    }

    static void accumulate(TensorT<S>& grad, const TensorT<S>& delta) {
        for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] += delta[i];
    }

    ModelConfig cfg_;
    std::vector<Block> blocks_;
    ParameterT<S> head_w_, head_b_;
    bool training_{true};
};

using WaveBeatModel = WaveBeatModelT<float>;

} // namespace wavebeat
