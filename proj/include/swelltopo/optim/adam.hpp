#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "swelltopo/error.hpp"

namespace swelltopo {

struct AdamSettings {
    double learning_rate = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 1.0; // global gradient norm cap, <= 0 disables clipping

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(learning_rate > 0)) v.push_back("adam learning rate must be positive");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) v.push_back("adam betas must lie in [0, 1)");
        if (!(epsilon > 0)) v.push_back("adam epsilon must be positive");
        return v;
    }
    bool operator==(const AdamSettings&) const = default;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

/// Scales g in place so its Euclidean norm is at most clip; returns the norm before clipping.
inline double clip_gradient(std::vector<double>& g, double clip) {
    double n2 = 0;
    for (double x : g) n2 += x * x;
    const double n = std::sqrt(n2);
    if (clip > 0 && n > clip)
        for (double& x : g) x *= clip / n;
    return n;
}

/// One bias-corrected Adam update of w. Returns the pre-clip gradient norm.
inline double adam_step(std::vector<double>& w, std::vector<double> g, AdamState& st, const AdamSettings& cfg) {
    for (double x : g)
        if (!std::isfinite(x)) throw AdjointError("non-finite gradient component; iteration aborted");
    if (g.size() != w.size()) throw ContractError("gradient and weight vectors differ in length");
    if (st.m.size() != w.size()) {
        st.m.assign(w.size(), 0.0);
        st.v.assign(w.size(), 0.0);
        st.step = 0;
    }
    const double norm = clip_gradient(g, cfg.clip_norm);
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < w.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        w[i] -= cfg.learning_rate * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.epsilon);
    }
    return norm;
}

} // namespace swelltopo
