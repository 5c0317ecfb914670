#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/mesh.hpp"
#include "swelltopo/neural/network.hpp"

namespace swelltopo {

/// Bilinear interpolation stencil of one point inside the mesh.
struct PointStencil {
    std::array<int, 4> nodes{};
    std::array<double, 4> weights{};
};

/// Finds the element containing x and its shape-function weights. Points on
/// a node collapse to that node.
inline PointStencil locate_point(const QuadMesh& mesh, const Vec2& x, double tol = 1e-9) {
    const double h = mesh.min_edge_length();
    for (int n = 0; n < mesh.num_nodes(); ++n)
        if ((mesh.nodes[n] - x).norm() <= tol * h) return {{n, n, n, n}, {1.0, 0.0, 0.0, 0.0}};
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto X = detail::element_coords(mesh, e);
        if (x.x() < X.col(0).minCoeff() - tol * h || x.x() > X.col(0).maxCoeff() + tol * h ||
            x.y() < X.col(1).minCoeff() - tol * h || x.y() > X.col(1).maxCoeff() + tol * h)
            continue;
        Vec2 xi = Vec2::Zero();
        for (int it = 0; it < 30; ++it) {
            const Eigen::Vector4d N = detail::shape_values(xi.x(), xi.y());
            const Vec2 r = X.transpose() * N - x;
            if (r.norm() < 1e-14 * h) break;
            const Mat2 Jm = X.transpose() * detail::shape_gradients_xi(xi.x(), xi.y());
            xi -= Jm.inverse() * r;
        }
        if (std::abs(xi.x()) <= 1.0 + 1e-9 && std::abs(xi.y()) <= 1.0 + 1e-9) {
            PointStencil s;
            const Eigen::Vector4d N = detail::shape_values(xi.x(), xi.y());
            for (int a = 0; a < 4; ++a) {
                s.nodes[a] = mesh.elements[e][a];
                s.weights[a] = N(a);
            }
            return s;
        }
    }
    throw ConfigError("shape target point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) +
                      ") lies outside the mesh");
}

/// Target displacements at sample points (rows), metres.
struct ShapeTarget {
    RowMatrix points;
    RowMatrix displacements;

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (points.rows() < 1) v.push_back("shape target needs at least one sample point");
        if (points.cols() != 2 || displacements.cols() != 2 || displacements.rows() != points.rows())
            v.push_back("shape target points and displacements must be n x 2 with matching n");
        return v;
    }
};

struct ScalarWithGradient {
    double value = 0;
    Eigen::VectorXd gradient; // with respect to all displacement dofs
};

class ShapeObjective {
public:
    ShapeObjective(const QuadMesh& mesh, ShapeTarget target) : target_(std::move(target)) {
        if (auto v = target_.violations(); !v.empty()) throw ConfigError(v);
        for (Eigen::Index k = 0; k < target_.points.rows(); ++k)
            stencils_.push_back(locate_point(mesh, target_.points.row(k).transpose()));
        num_dofs_ = mesh.num_dofs();
    }

    const ShapeTarget& target() const { return target_; }

    Vec2 displacement_at(const Eigen::VectorXd& u, int k) const {
        Vec2 out = Vec2::Zero();
        for (int a = 0; a < 4; ++a) out += stencils_[k].weights[a] * Vec2(u(2 * stencils_[k].nodes[a]), u(2 * stencils_[k].nodes[a] + 1));
        return out;
    }

    /// J = (1/n_s) sum ||u(x_k) - u_tgt(x_k)||^2.
    ScalarWithGradient evaluate(const Eigen::VectorXd& u) const {
        ScalarWithGradient r;
        r.gradient = Eigen::VectorXd::Zero(num_dofs_);
        const double n = static_cast<double>(stencils_.size());
        for (std::size_t k = 0; k < stencils_.size(); ++k) {
            const Vec2 d = displacement_at(u, static_cast<int>(k)) - target_.displacements.row(k).transpose();
            r.value += d.squaredNorm() / n;
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i)
                    r.gradient(2 * stencils_[k].nodes[a] + i) += 2.0 * stencils_[k].weights[a] * d(i) / n;
        }
        return r;
    }

private:
    ShapeTarget target_;
    std::vector<PointStencil> stencils_;
    int num_dofs_ = 0;
};

/// Element volumes v_e = area * thickness.
inline Eigen::VectorXd element_volumes(const QuadMesh& mesh) {
    Eigen::VectorXd v(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) v(e) = element_geometry(mesh, e).area * mesh.thickness;
    return v;
}

struct DensityConstraint {
    double value = 0;  // g, feasible when <= 0
    double raw = 0;    // volume fraction or grayness before the bound is subtracted
    RowMatrix d_rho;   // dg/drho
};

/// g = sum_e rho_m(x_e) v_e / sum_e v_e - bound, with rho_m summed over the phase set.
inline DensityConstraint constraint_volume(const RowMatrix& rho, const Eigen::VectorXd& volumes,
                                           const std::vector<int>& phases, double bound) {
    if (phases.empty()) throw ConfigError("volume constraint needs a non-empty phase set");
    DensityConstraint c;
    c.d_rho = RowMatrix::Zero(rho.rows(), rho.cols());
    const double total = volumes.sum();
    for (Eigen::Index e = 0; e < rho.rows(); ++e)
        for (int m : phases) {
            if (m < 0 || m >= rho.cols()) throw ConfigError("volume constraint phase index out of range");
            c.raw += rho(e, m) * volumes(e);
            c.d_rho(e, m) += volumes(e) / total;
        }
    c.raw /= total;
    c.value = c.raw - bound;
    return c;
}

/// Raw grayness (1/n) sum_i sum_k rho_k (1 - rho_k).
inline double grayness(const RowMatrix& rho) {
    return (rho.array() * (1.0 - rho.array())).sum() / static_cast<double>(rho.rows());
}

inline DensityConstraint constraint_grayness(const RowMatrix& rho, double xi) {
    DensityConstraint c;
    c.raw = grayness(rho);
    c.value = c.raw - xi;
    c.d_rho = ((1.0 - 2.0 * rho.array()) / static_cast<double>(rho.rows())).matrix();
    return c;
}

/// Log barrier with a linear extension past g = -1/tau^2 (C1 at the junction).
inline double barrier(double g, double tau) {
    if (g <= -1.0 / (tau * tau)) return -std::log(-g) / tau;
    return tau * g - std::log(1.0 / (tau * tau)) / tau + 1.0 / tau;
}

inline double barrier_derivative(double g, double tau) {
    if (g <= -1.0 / (tau * tau)) return -1.0 / (tau * g);
    return tau;
}

/// L = J/J0 + sum psi_tau(g_i).
inline double total_loss(double J, double J0, const std::vector<double>& constraints, double tau) {
    double L = J / J0;
    for (double g : constraints) L += barrier(g, tau);
    return L;
}

} // namespace swelltopo
