#pragma once

#include <cmath>
#include <vector>

namespace wavebeat {

// Second-order IIR section with RBJ cookbook designs. Q = 1/sqrt(2) for the
// Butterworth low/high-pass responses.
struct Biquad {
    double b0{1}, b1{0}, b2{0}, a1{0}, a2{0};

    static Biquad lowpass(double cutoff_hz, double sample_rate, double q = 0.7071067811865476) {
        const double w0 = 2.0 * M_PI * cutoff_hz / sample_rate;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double c = std::cos(w0);
        const double a0 = 1.0 + alpha;
        return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
                (1.0 - alpha) / a0};
    }

    static Biquad highpass(double cutoff_hz, double sample_rate, double q = 0.7071067811865476) {
        const double w0 = 2.0 * M_PI * cutoff_hz / sample_rate;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double c = std::cos(w0);
        const double a0 = 1.0 + alpha;
        return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
                (1.0 - alpha) / a0};
    }

    // Constant 0 dB peak gain bandpass.
    static Biquad bandpass(double center_hz, double sample_rate, double q) {
        const double w0 = 2.0 * M_PI * center_hz / sample_rate;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double c = std::cos(w0);
        const double a0 = 1.0 + alpha;
        return {alpha / a0, 0.0, -alpha / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
    }

    void process(std::vector<float>& samples) const {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (auto& s : samples) {
            const double x0 = static_cast<double>(s);
            const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            s = static_cast<float>(y0);
        }
    }
};

} // namespace wavebeat
