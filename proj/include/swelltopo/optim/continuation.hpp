#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "swelltopo/optim/projection.hpp"

namespace swelltopo {

/// Per-iteration schedules: SIMP exponent, grayness slack, barrier sharpness.
struct ContinuationSettings {
    double p_start = 1.0, p_step = 0.05, p_max = 3.0;
    double xi_start = 2.0, xi_step = 0.05, xi_min = 0.05;
    double tau0 = 3.0, nu = 1.03;

    double p_at(int k) const { return std::min(p_start + p_step * k, p_max); }
    double xi_at(int k) const { return std::max(xi_start - xi_step * k, xi_min); }
    double tau_at(int k) const { return tau0 * std::pow(nu, k); }

    /// True once p and xi have reached their caps.
    bool settled(int k) const { return p_at(k) >= p_max && xi_at(k) <= xi_min; }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(p_start >= 1) || !(p_max >= p_start) || !(p_step >= 0))
            v.push_back("continuation needs 1 <= p_start <= p_max and p_step >= 0");
        if (!(xi_min > 0) || !(xi_start >= xi_min) || !(xi_step >= 0))
            v.push_back("continuation needs 0 < xi_min <= xi_start and xi_step >= 0");
        if (!(tau0 > 0) || !(nu > 1)) v.push_back("barrier schedule needs tau0 > 0 and nu > 1");
        return v;
    }
    bool operator==(const ContinuationSettings&) const = default;
};

struct StopSettings {
    int max_iterations = 250;
    double delta_loss = 1e-3;
    int window = 5; // moving-average length of |L_k - L_(k-1)|, 1 recovers the bare criterion

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (max_iterations < 1) v.push_back("max_iterations must be at least 1");
        if (!(delta_loss >= 0)) v.push_back("delta_loss must be non-negative");
        if (window < 1) v.push_back("stop window must be at least 1");
        return v;
    }
    bool operator==(const StopSettings&) const = default;
};

/// Moving average of the last `window` loss changes; negative until enough history exists.
inline double loss_change(const std::vector<double>& losses, int window) {
    if (static_cast<int>(losses.size()) < window + 1) return -1.0;
    double s = 0;
    for (std::size_t i = losses.size() - window; i < losses.size(); ++i) s += std::abs(losses[i] - losses[i - 1]);
    return s / window;
}

} // namespace swelltopo
