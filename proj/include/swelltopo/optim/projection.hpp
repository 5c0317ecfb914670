#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace swelltopo {

/// Smooth threshold ramp applied per phase, followed by renormalization to
/// the simplex. Off by default.
struct ProjectionSettings {
    bool enabled = false;
    double beta = 1.0;        // sharpness at iteration 0
    double beta_growth = 0.0; // added per iteration
    double beta_max = 1.0;
    double eta = 0.5;

    double beta_at(int iteration) const { return std::min(beta + beta_growth * iteration, beta_max); }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!enabled) return v;
        if (!(beta > 0) || !(beta_max >= beta) || !(beta_growth >= 0))
            v.push_back("projection needs beta > 0, beta_growth >= 0 and beta_max >= beta");
        if (!(eta > 0 && eta < 1)) v.push_back("projection eta must lie in (0, 1)");
        return v;
    }
    bool operator==(const ProjectionSettings&) const = default;
};

inline double threshold_ramp(double rho, double beta, double eta) {
    const double a = std::tanh(beta * eta);
    return (a + std::tanh(beta * (rho - eta))) / (a + std::tanh(beta * (1.0 - eta)));
}

inline double threshold_ramp_derivative(double rho, double beta, double eta) {
    const double t = std::tanh(beta * (rho - eta));
    return beta * (1.0 - t * t) / (std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta)));
}

/// Row-wise projection of a pseudodensity matrix (n x phases).
template <class Matrix>
Matrix threshold_projection(const Matrix& rho, double beta, double eta) {
    Matrix out(rho.rows(), rho.cols());
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        double sum = 0;
        for (Eigen::Index k = 0; k < rho.cols(); ++k) sum += out(i, k) = threshold_ramp(rho(i, k), beta, eta);
        out.row(i) /= sum;
    }
    return out;
}

/// Chain rule through threshold_projection: maps dL/d(projected) to dL/d(rho).
template <class Matrix>
Matrix threshold_projection_pullback(const Matrix& rho, double beta, double eta, const Matrix& d_projected) {
    Matrix out(rho.rows(), rho.cols());
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        double sum = 0;
        for (Eigen::Index k = 0; k < rho.cols(); ++k) sum += threshold_ramp(rho(i, k), beta, eta);
        double dot = 0;
        for (Eigen::Index k = 0; k < rho.cols(); ++k)
            dot += d_projected(i, k) * threshold_ramp(rho(i, k), beta, eta) / sum;
        for (Eigen::Index k = 0; k < rho.cols(); ++k)
            out(i, k) = (d_projected(i, k) - dot) / sum * threshold_ramp_derivative(rho(i, k), beta, eta);
    }
    return out;
}

} // namespace swelltopo
