#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/boundary.hpp"
#include "swelltopo/fem/mesh.hpp"
#include "swelltopo/material/constitutive.hpp"

namespace swelltopo {

using GaussArray = std::array<double, 4>;

/// Effective material fields for one load case: per-element moduli and chi,
/// fiber angle per Gauss point.
struct ElementDesign {
    std::vector<double> shear_modulus;
    std::vector<double> chi;
    std::vector<double> fiber_stiffness;
    std::vector<GaussArray> fiber_angle;

    static ElementDesign uniform(int num_elements, double G, double chi, double eta = 0.0, double theta = 0.0) {
        ElementDesign d;
        d.shear_modulus.assign(num_elements, G);
        d.chi.assign(num_elements, chi);
        d.fiber_stiffness.assign(num_elements, eta);
        d.fiber_angle.assign(num_elements, GaussArray{theta, theta, theta, theta});
        return d;
    }

    std::vector<std::string> violations(int num_elements) const {
        std::vector<std::string> v;
        const auto n = static_cast<std::size_t>(num_elements);
        if (shear_modulus.size() != n || chi.size() != n || fiber_stiffness.size() != n || fiber_angle.size() != n)
            v.push_back("design field sizes do not match the element count");
        for (double g : shear_modulus)
            if (!(g > 0) || !std::isfinite(g)) {
                v.push_back("effective shear modulus must be positive and finite");
                break;
            }
        for (double e : fiber_stiffness)
            if (!(e >= 0) || !std::isfinite(e)) {
                v.push_back("effective fiber stiffness must be non-negative and finite");
                break;
            }
        return v;
    }
};

/// F-bar: the Gauss-point gradient rescaled so its determinant equals the centroid's.
inline Mat2 fbar_deformation_gradient(const Mat2& F_gp, const Mat2& F_centroid) {
    const double jg = F_gp.determinant(), jc = F_centroid.determinant();
    if (!(jg > 0) || !(jc > 0)) throw InvertedElementError("non-positive Jacobian in F-bar");
    return std::sqrt(jc / jg) * F_gp;
}

/// Per-element design cotangents: sum over Gauss points of v . d f_int / d(field).
struct DesignCotangent {
    std::vector<double> shear_modulus;
    std::vector<double> chi;
    std::vector<double> fiber_stiffness;
    std::vector<GaussArray> fiber_angle;

    explicit DesignCotangent(int n = 0)
        : shear_modulus(n, 0.0), chi(n, 0.0), fiber_stiffness(n, 0.0), fiber_angle(n, GaussArray{}) {}
};

struct Assembly {
    bool ok = true;           // false when an element inverted or the swelling solve failed
    std::string failure;
    Eigen::VectorXd f_int;    // full length
    Eigen::SparseMatrix<double> K; // free-free block when a DofMap was supplied, else full
    std::vector<GaussArray> phi_gp;
    double energy = 0;        // J
};

namespace detail {

using ElemVec = Eigen::Matrix<double, 8, 1>;
using ElemMat = Eigen::Matrix<double, 8, 8>;

inline Eigen::Vector4d flatten(const Mat2& M) { return {M(0, 0), M(0, 1), M(1, 0), M(1, 1)}; }

struct ElementResult {
    ElemVec f = ElemVec::Zero();
    ElemMat K = ElemMat::Zero();
    GaussArray phi{};
    double energy = 0;
};

enum class KernelMode { residual, tangent, design };

/// Element kernel with the energy-consistent F-bar linearization.
/// In design mode, v holds the element slice of the adjoint-weighted vector and
/// the cotangent entries for element e are accumulated into cot.
inline void element_kernel(const QuadMesh& mesh, const ElementGeometry& geo, int e, const ElementDesign& design,
                           const Eigen::VectorXd& u, double mu, const SolventEnvironment& env,
                           const BisectionSettings& bisection, KernelMode mode, ElementResult& out,
                           const ElemVec* v = nullptr, DesignCotangent* cot = nullptr) {
    const auto& el = mesh.elements[e];
    Eigen::Matrix<double, 4, 2> U;
    for (int a = 0; a < 4; ++a) U.row(a) << u(2 * el[a]), u(2 * el[a] + 1);

    const Mat2 Fc = Mat2::Identity() + U.transpose() * geo.dndx_centroid;
    const double jc = Fc.determinant();
    if (!(jc > 0)) throw InvertedElementError("element " + std::to_string(e) + " inverted at its centroid");
    const Eigen::Matrix<double, 4, 2> Mc = geo.dndx_centroid * Fc.inverse();

    EffectivePointProperties props{design.shear_modulus[e], design.chi[e], design.fiber_stiffness[e], 0.0};
    const bool tangent = mode == KernelMode::tangent;

    for (int g = 0; g < 4; ++g) {
        const auto& dn = geo.dndx_gauss[g];
        const Mat2 Fg = Mat2::Identity() + U.transpose() * dn;
        const double jg = Fg.determinant();
        if (!(jg > 0)) throw InvertedElementError("element " + std::to_string(e) + " inverted at a Gauss point");
        const Eigen::Matrix<double, 4, 2> Mg = dn * Fg.inverse();
        const double s = std::sqrt(jc / jg);
        const Mat2 Fbar = s * Fg;

        props.fiber_angle = design.fiber_angle[e][g];
        const auto resp = evaluate_point(Fbar, props, mu, env, tangent, bisection);
        out.phi[g] = resp.root.phi;
        out.energy += geo.weight[g] * resp.psi;

        // l_A = d(ln s)/du_A; D = d vec(Fbar) / du (4 x 8).
        ElemVec l;
        Eigen::Matrix<double, 4, 8> D;
        for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 2; ++i) {
                const int A = 2 * a + i;
                l(A) = 0.5 * (Mc(a, i) - Mg(a, i));
                for (int j = 0; j < 2; ++j)
                    for (int J = 0; J < 2; ++J)
                        D(voigt(j, J), A) = s * (l(A) * Fg(j, J) + (j == i ? dn(a, J) : 0.0));
            }
        const Eigen::Vector4d vecP = flatten(resp.P);
        out.f += geo.weight[g] * D.transpose() * vecP;

        if (tangent) {
            ElemMat Kg = D.transpose() * resp.A * D;
            const double PF = (resp.P.array() * Fg.array()).sum();
            const Eigen::Matrix<double, 4, 2> PB = dn * resp.P.transpose(); // P:B_A at (a, i)
            for (int a = 0; a < 4; ++a)
                for (int i = 0; i < 2; ++i)
                    for (int b = 0; b < 4; ++b)
                        for (int j = 0; j < 2; ++j) {
                            const int A = 2 * a + i, B = 2 * b + j;
                            const double lab = 0.5 * (-Mc(a, j) * Mc(b, i) + Mg(a, j) * Mg(b, i));
                            Kg(A, B) += s * ((l(A) * l(B) + lab) * PF + l(A) * PB(b, j) + l(B) * PB(a, i));
                        }
            out.K += geo.weight[g] * Kg;
        }

        if (mode == KernelMode::design) {
            const Eigen::Vector4d y = D * (*v);
            const auto dp = point_design_partials(Fbar, props, resp);
            const double w = geo.weight[g];
            cot->shear_modulus[e] += w * y.dot(flatten(dp.dG));
            cot->chi[e] += w * y.dot(flatten(dp.dchi));
            cot->fiber_stiffness[e] += w * y.dot(flatten(dp.deta));
            cot->fiber_angle[e][g] += w * y.dot(flatten(dp.dtheta));
        }
    }
}

} // namespace detail

/// Precomputed geometry plus the element loop. Elements are visited in index
/// order so the reduction is bitwise reproducible.
class Assembler {
public:
    explicit Assembler(const QuadMesh& mesh) : mesh_(&mesh) {
        if (auto v = mesh.violations(); !v.empty()) throw ConfigError(v);
        geometry_.reserve(mesh.num_elements());
        for (int e = 0; e < mesh.num_elements(); ++e) geometry_.push_back(element_geometry(mesh, e));
    }

    const QuadMesh& mesh() const { return *mesh_; }
    const ElementGeometry& geometry(int e) const { return geometry_[e]; }

    /// Internal force (and tangent). Evaluation failures are reported through
    /// Assembly::ok instead of throwing, so a line search can back off.
    Assembly assemble(const Eigen::VectorXd& u, const ElementDesign& design, double mu, const SolventEnvironment& env,
                      bool with_tangent, const DofMap* dofs = nullptr, const BisectionSettings& bisection = {}) const {
        const auto& mesh = *mesh_;
        Assembly out;
        out.f_int = Eigen::VectorXd::Zero(mesh.num_dofs());
        out.phi_gp.resize(mesh.num_elements());
        std::vector<Eigen::Triplet<double>> trip;
        if (with_tangent) trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * 64);
        const auto mode = with_tangent ? detail::KernelMode::tangent : detail::KernelMode::residual;

        for (int e = 0; e < mesh.num_elements(); ++e) {
            detail::ElementResult r;
            try {
                detail::element_kernel(mesh, geometry_[e], e, design, u, mu, env, bisection, mode, r);
            } catch (const InvertedElementError& err) {
                out.ok = false;
                out.failure = err.what();
                return out;
            } catch (const BracketError& err) {
                out.ok = false;
                out.failure = err.what();
                return out;
            } catch (const SingularEquilibriumError& err) {
                out.ok = false;
                out.failure = err.what();
                return out;
            }
            out.phi_gp[e] = r.phi;
            out.energy += r.energy;
            const auto& el = mesh.elements[e];
            for (int A = 0; A < 8; ++A) out.f_int(2 * el[A / 2] + A % 2) += r.f(A);
            if (!with_tangent) continue;
            for (int A = 0; A < 8; ++A) {
                const int ga = 2 * el[A / 2] + A % 2;
                const int ra = dofs ? dofs->free_index[ga] : ga;
                if (ra < 0) continue;
                for (int B = 0; B < 8; ++B) {
                    const int gb = 2 * el[B / 2] + B % 2;
                    const int rb = dofs ? dofs->free_index[gb] : gb;
                    if (rb < 0) continue;
                    trip.emplace_back(ra, rb, r.K(A, B));
                }
            }
        }
        if (with_tangent) {
            const int n = dofs ? dofs->num_free() : mesh.num_dofs();
            out.K.resize(n, n);
            out.K.setFromTriplets(trip.begin(), trip.end());
        }
        return out;
    }

    /// Cotangents v . d f_int / d(design) at fixed u. Throws on evaluation failure.
    DesignCotangent design_vjp(const Eigen::VectorXd& u, const ElementDesign& design, double mu,
                               const SolventEnvironment& env, const Eigen::VectorXd& v,
                               const BisectionSettings& bisection = {}) const {
        const auto& mesh = *mesh_;
        DesignCotangent cot(mesh.num_elements());
        for (int e = 0; e < mesh.num_elements(); ++e) {
            const auto& el = mesh.elements[e];
            detail::ElemVec ve;
            for (int A = 0; A < 8; ++A) ve(A) = v(2 * el[A / 2] + A % 2);
            if (ve.isZero(0.0)) continue;
            detail::ElementResult r;
            detail::element_kernel(mesh, geometry_[e], e, design, u, mu, env, bisection, detail::KernelMode::design,
                                   r, &ve, &cot);
        }
        return cot;
    }

private:
    const QuadMesh* mesh_;
    std::vector<ElementGeometry> geometry_;
};

} // namespace swelltopo
