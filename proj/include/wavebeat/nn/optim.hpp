#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wavebeat/tensor.hpp"

namespace wavebeat::nn {

template <typename S>
struct AdamConfig {
    double lr{1e-3};
    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};
};

// Adam with bias correction. First and second moments live here, one pair per
// registered parameter; a single trainer thread owns the instance.
template <typename S>
class AdamT {
public:
    AdamT(std::vector<ParameterT<S>*> params, AdamConfig<S> cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            ParameterT<S>* p = params_[pi];
            if (!p->trainable) continue;
            auto& m = m_[pi];
            auto& v = v_[pi];
            const std::size_t n = p->value.numel();
            for (std::size_t i = 0; i < n; ++i) {
                const double g = static_cast<double>(p->grad[i]);
                const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
                const double vi =
                    cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
                m[i] = static_cast<S>(mi);
                v[i] = static_cast<S>(vi);
                const double m_hat = mi / bc1;
                const double v_hat = vi / bc2;
                p->value[i] = static_cast<S>(static_cast<double>(p->value[i]) -
                                             cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    std::size_t step_count() const { return step_count_; }

private:
    std::vector<ParameterT<S>*> params_;
    AdamConfig<S> cfg_;
    std::vector<TensorT<S>> m_, v_;
    std::size_t step_count_{0};
};

using Adam = AdamT<float>;

// Global L2-norm gradient clipping across all trainable parameters.
// Returns the applied scale (1.0 when no clipping happened).
template <typename S>
double clip_grad_norm(const std::vector<ParameterT<S>*>& params, double max_norm) {
    if (max_norm <= 0) throw std::invalid_argument("clip_grad_norm requires max_norm > 0");
    double sum_sq = 0.0;
    for (const auto* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->grad.numel(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            sum_sq += g * g;
        }
    }
    const double norm = std::sqrt(sum_sq);
    if (norm <= max_norm) return 1.0;
    const double scale = max_norm / norm;
    for (auto* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->grad.numel(); ++i)
            p->grad[i] = static_cast<S>(static_cast<double>(p->grad[i]) * scale);
    }
    return scale;
}

} // namespace wavebeat::nn
