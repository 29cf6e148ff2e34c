#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "wavebeat/tensor.hpp"

namespace wavebeat {

// Losses over frame matrices. The last axis is time; every leading axis is
// treated as an independent row (so a [B, 2, N] batch contributes 2B rows).
// Predictions are clamped to [kProbClamp, 1 - kProbClamp] before the logs;
// gradients are zero where the clamp is active.

inline constexpr double kProbClamp = 1e-7;

namespace detail_loss {

inline double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

template <typename S>
void check_pair(const TensorT<S>& pred, const TensorT<S>& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("loss shape mismatch: " + shape_string(pred.shape()) +
                                    " vs " + shape_string(target.shape()));
    if (pred.rank() < 1 || pred.numel() == 0)
        throw std::invalid_argument("loss requires a non-empty matrix");
}

template <typename S>
std::size_t frames_per_row(const TensorT<S>& t) {
    return t.dim(t.rank() - 1);
}

} // namespace detail_loss

// Standard binary cross-entropy, averaged over every entry.
template <typename S>
double bce(const TensorT<S>& pred, const TensorT<S>& target) {
    detail_loss::check_pair(pred, target);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double p = detail_loss::clamp_prob(static_cast<double>(pred[i]));
        const double y = static_cast<double>(target[i]);
        sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred.numel());
}

template <typename S>
TensorT<S> bce_grad(const TensorT<S>& pred, const TensorT<S>& target) {
    detail_loss::check_pair(pred, target);
    TensorT<S> g(pred.shape());
    const double inv_n = 1.0 / static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double raw = static_cast<double>(pred[i]);
        if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue; // clamped: no gradient
        const double y = static_cast<double>(target[i]);
        g[i] = static_cast<S>(inv_n * (-y / raw + (1.0 - y) / (1.0 - raw)));
    }
    return g;
}

struct MfeParts {
    double total{0.0};
    double fpe{0.0};
    double fne{0.0};
};

// Mean false error: per row, the mean BCE over negative frames (false-positive
// error) plus the mean BCE over positive frames (false-negative error), each
// averaged across rows. Rows with no positives (or no negatives) contribute 0
// to the corresponding term.
template <typename S>
MfeParts mfe(const TensorT<S>& pred, const TensorT<S>& target) {
    detail_loss::check_pair(pred, target);
    const std::size_t n = detail_loss::frames_per_row(pred);
    const std::size_t rows = pred.numel() / n;
    double fpe = 0.0, fne = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const S* p_row = pred.data() + r * n;
        const S* y_row = target.data() + r * n;
        double neg_sum = 0.0, pos_sum = 0.0;
        std::size_t neg_count = 0, pos_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = detail_loss::clamp_prob(static_cast<double>(p_row[i]));
            if (static_cast<double>(y_row[i]) < 0.5) {
                neg_sum -= std::log(1.0 - p);
                ++neg_count;
            } else {
                pos_sum -= std::log(p);
                ++pos_count;
            }
        }
        if (neg_count) fpe += neg_sum / static_cast<double>(neg_count);
        if (pos_count) fne += pos_sum / static_cast<double>(pos_count);
    }
    fpe /= static_cast<double>(rows);
    fne /= static_cast<double>(rows);
    return {fpe + fne, fpe, fne};
}

template <typename S>
TensorT<S> mfe_grad(const TensorT<S>& pred, const TensorT<S>& target) {
    detail_loss::check_pair(pred, target);
    const std::size_t n = detail_loss::frames_per_row(pred);
    const std::size_t rows = pred.numel() / n;
    TensorT<S> g(pred.shape());
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const S* y_row = target.data() + r * n;
        std::size_t neg_count = 0, pos_count = 0;
        for (std::size_t i = 0; i < n; ++i)
            (static_cast<double>(y_row[i]) < 0.5 ? neg_count : pos_count)++;
        const S* p_row = pred.data() + r * n;
        S* g_row = g.data() + r * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double raw = static_cast<double>(p_row[i]);
            if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
            if (static_cast<double>(y_row[i]) < 0.5)
                g_row[i] = static_cast<S>(inv_rows / (1.0 - raw) /
                                          static_cast<double>(neg_count));
            else
                g_row[i] = static_cast<S>(-inv_rows / raw / static_cast<double>(pos_count));
        }
    }
    return g;
}

} // namespace wavebeat
