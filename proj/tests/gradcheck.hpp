#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "wavebeat/rng.hpp"
#include "wavebeat/tensor.hpp"

// Central finite differences with step 1e-4 on double-precision data, the
// oracle for every analytic gradient in the test suites. Stays independent of
// the backward implementations it checks.

namespace gradcheck {

inline constexpr double kStep = 1e-4;
inline constexpr double kTolerance = 1e-4;

// Maximum normalized error between the analytic gradient of `x` and central
// differences of `loss` over up to `max_coords` sampled coordinates.
inline double max_error(wavebeat::TensorT<double>& x,
                        const wavebeat::TensorT<double>& analytic,
                        const std::function<double()>& loss, wavebeat::Rng& rng,
                        std::size_t max_coords = 24) {
    std::vector<std::size_t> coords;
    if (x.numel() <= max_coords) {
        for (std::size_t i = 0; i < x.numel(); ++i) coords.push_back(i);
    } else {
        for (std::size_t i = 0; i < max_coords; ++i)
            coords.push_back(static_cast<std::size_t>(rng.uniform_int(x.numel())));
    }
    double worst = 0.0;
    for (std::size_t i : coords) {
        const double saved = x[i];
        x[i] = saved + kStep;
        const double f_plus = loss();
        x[i] = saved - kStep;
        const double f_minus = loss();
        x[i] = saved;
        const double fd = (f_plus - f_minus) / (2.0 * kStep);
        const double a = analytic[i];
        const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

inline wavebeat::TensorT<double> random_tensor(std::vector<std::size_t> shape, wavebeat::Rng& rng,
                                               double lo = -1.0, double hi = 1.0) {
    wavebeat::TensorT<double> t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace gradcheck
