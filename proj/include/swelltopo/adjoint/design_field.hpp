#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/assembly.hpp"
#include "swelltopo/fem/mesh.hpp"
#include "swelltopo/material/properties.hpp"
#include "swelltopo/neural/network.hpp"
#include "swelltopo/optim/projection.hpp"

namespace swelltopo {

/// How network outputs become per-element pseudodensities and per-Gauss-point angles.
struct SamplingOptions {
    bool project = false;
    double beta = 1.0;
    double eta = 0.5;
    RowMatrix fixed_rho;      // n_e x phases, used when the network has no density head
    double fixed_theta = 0.0; // used when the network has no angle head
};

/// Design fields at one iterate. rho is what the physics and the constraints see.
struct DesignSample {
    RowMatrix rho_network; // softmax at the centroids (empty for a fixed layout)
    RowMatrix rho;
    std::vector<GaussArray> theta;
    SamplingOptions options;
};

/// Density at element centroids, angle at Gauss points.
class DesignSampler {
public:
    explicit DesignSampler(const QuadMesh& mesh)
        : num_elements_(mesh.num_elements()), centroids_(centroid_coords(mesh)), gauss_(gauss_coords(mesh)) {}

    const RowMatrix& centroids() const { return centroids_; }
    const RowMatrix& gauss_points() const { return gauss_; }

    DesignSample sample(const DesignNetwork& net, const SamplingOptions& opt) const {
        DesignSample s;
        s.options = opt;
        const auto& cfg = net.config();
        if (cfg.num_phases > 0) {
            s.rho_network = net.evaluate(centroids_).rho;
            s.rho = opt.project ? threshold_projection(s.rho_network, opt.beta, opt.eta) : s.rho_network;
        } else {
            if (opt.fixed_rho.rows() != num_elements_)
                throw ContractError("a network without a density head needs a fixed layout for every element");
            s.rho = opt.fixed_rho;
        }
        s.theta.assign(num_elements_, GaussArray{opt.fixed_theta, opt.fixed_theta, opt.fixed_theta, opt.fixed_theta});
        if (cfg.angle_head) {
            const Eigen::VectorXd th = net.evaluate(gauss_).theta;
            for (int e = 0; e < num_elements_; ++e)
                for (int g = 0; g < 4; ++g) s.theta[e][g] = th(4 * e + g);
        }
        return s;
    }

    /// Weight gradient from cotangents on the sampled rho (after projection) and theta.
    std::vector<double> pullback(const DesignNetwork& net, const DesignSample& s, const RowMatrix& d_rho,
                                 const std::vector<GaussArray>& d_theta) const {
        const auto& cfg = net.config();
        std::vector<double> grad(net.num_params(), 0.0);
        if (cfg.num_phases > 0 && d_rho.size() > 0) {
            const RowMatrix d_soft = s.options.project ? threshold_projection_pullback(s.rho_network, s.options.beta,
                                                                                       s.options.eta, d_rho)
                                                       : d_rho;
            grad = net.pullback(centroids_, d_soft, {});
        }
        if (cfg.angle_head && !d_theta.empty()) {
            Eigen::VectorXd dt(4 * num_elements_);
            for (int e = 0; e < num_elements_; ++e)
                for (int g = 0; g < 4; ++g) dt(4 * e + g) = d_theta[e][g];
            const auto gt = net.pullback(gauss_, {}, dt);
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += gt[k];
        }
        return grad;
    }

private:
    int num_elements_;
    RowMatrix centroids_, gauss_;
};

/// SIMP properties of every element for one solvent.
inline ElementDesign element_design(const DesignSample& s, const PhaseColumns& cols, const InterpolationParams& ip) {
    const auto n = static_cast<int>(s.rho.rows());
    if (static_cast<std::size_t>(s.rho.cols()) != cols.size())
        throw InvalidDesignError("design has " + std::to_string(s.rho.cols()) + " phases, material table has " +
                                 std::to_string(cols.size()));
    ElementDesign d;
    d.shear_modulus.resize(n);
    d.chi.resize(n);
    d.fiber_stiffness.resize(n);
    d.fiber_angle = s.theta;
    for (int e = 0; e < n; ++e) {
        const auto props = interpolate(std::span<const double>(s.rho.row(e).data(), s.rho.cols()), cols, ip, 0.0);
        d.shear_modulus[e] = props.shear_modulus;
        d.chi[e] = props.chi;
        d.fiber_stiffness[e] = props.fiber_stiffness;
    }
    return d;
}

/// Adds scale * (cotangent on the element properties) mapped back onto rho
/// and theta through the interpolation.
inline void accumulate_property_cotangent(const DesignSample& s, const PhaseColumns& cols,
                                          const InterpolationParams& ip, const DesignCotangent& cot, double scale,
                                          RowMatrix& d_rho, std::vector<GaussArray>& d_theta) {
    const auto n = s.rho.rows();
    const auto P = s.rho.cols();
    if (d_rho.rows() != n || d_rho.cols() != P) d_rho = RowMatrix::Zero(n, P);
    if (d_theta.size() != static_cast<std::size_t>(n)) d_theta.assign(n, GaussArray{});
    std::vector<double> dG(P), dchi(P), deta(P);
    for (Eigen::Index e = 0; e < n; ++e) {
        interpolate_partials(std::span<const double>(s.rho.row(e).data(), P), cols, ip, dG, dchi, deta);
        for (Eigen::Index k = 0; k < P; ++k)
            d_rho(e, k) += scale * (cot.shear_modulus[e] * dG[k] + cot.chi[e] * dchi[k] +
                                    cot.fiber_stiffness[e] * deta[k]);
        for (int g = 0; g < 4; ++g) d_theta[e][g] += scale * cot.fiber_angle[e][g];
    }
}

} // namespace swelltopo
