#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

/// inf over splits of ||phi1||_{L^q} + ||phi - phi1||_{L^2} on a weighted point cloud,
/// by nested grid refinement over the split magnitudes (phi1 parallel to phi).
inline double sum_norm_grid(const std::vector<double>& weights, const std::vector<double>& magnitudes, double q,
                            int points = 21, int levels = 28) {
    const std::size_t n = weights.size();
    auto objective = [&](const std::vector<double>& x) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            a += weights[i] * std::pow(x[i], q);
            b += weights[i] * (magnitudes[i] - x[i]) * (magnitudes[i] - x[i]);
        }
        return std::pow(a, 1.0 / q) + std::sqrt(b);
    };
    std::vector<double> center(n), half(n);
    for (std::size_t i = 0; i < n; ++i) {
        center[i] = 0.5 * magnitudes[i];
        half[i] = 0.5 * magnitudes[i];
    }
    double best = objective(center);
    std::vector<double> best_x = center, x(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(points);
    for (int level = 0; level < levels; ++level) {
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t rest = idx;
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = static_cast<double>(rest % static_cast<std::size_t>(points));
                rest /= static_cast<std::size_t>(points);
                const double v = center[i] - half[i] + 2.0 * half[i] * k / (points - 1);
                x[i] = std::clamp(v, 0.0, magnitudes[i]);
            }
            const double f = objective(x);
            if (f < best) {
                best = f;
                best_x = x;
            }
        }
        center = best_x;
        for (auto& h : half) h *= 0.3;
    }
    return best;
}

/// E[N^e] for N ~ Poisson(rate).
inline double poisson_power_moment(double rate, double e) {
    double total = 0.0;
    for (int k = 1; k < 400; ++k)
        total += std::exp(e * std::log(static_cast<double>(k)) + k * std::log(rate) - rate - std::lgamma(k + 1.0));
    return total;
}

}  // namespace oracle
