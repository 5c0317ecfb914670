#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"
#include "swelltopo/material/flory_rehner.hpp"
#include "swelltopo/material/properties.hpp"

namespace swelltopo {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
/// Fourth-order 2D tensor A_{iJkL} stored at (2i+J, 2k+L).
using Tangent4 = Eigen::Matrix4d;

inline int voigt(int i, int J) { return 2 * i + J; }

inline Vec2 fiber_direction(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// psi = G/2 (I1 - 3 - 2 ln J) + eta/2 <I4 - 1>_+^2 with I1 = tr C + 1/(phi J2D)^2, J = 1/phi.
inline double strain_energy(const Mat2& F, double phi, const EffectivePointProperties& props) {
    const double j2d = F.determinant();
    if (!(j2d > 0.0)) throw InvertedElementError("non-positive in-plane Jacobian");
    if (!(phi > 0.0 && phi <= 1.0)) throw DomainError("polymer volume fraction outside (0, 1]");
    const Mat2 C = F.transpose() * F;
    const double i1 = C.trace() + 1.0 / (phi * phi * j2d * j2d);
    const double log_j = -std::log(phi);
    double psi = 0.5 * props.shear_modulus * (i1 - 3.0 - 2.0 * log_j);
    const Vec2 a = fiber_direction(props.fiber_angle);
    const double m = std::max(0.0, a.dot(C * a) - 1.0);
    psi += 0.5 * props.fiber_stiffness * m * m;
    return psi;
}

/// Full response at one point with phi resolved from the swelling equilibrium.
struct PointResponse {
    double psi = 0;
    Mat2 P = Mat2::Zero();
    Tangent4 A = Tangent4::Zero();
    PhiRoot root;
    PhiSensitivity sens;
    double area_stretch = 1;
    // h(J) = 1/(phi J)^2 + 2 ln phi and its first total derivative in J.
    double dh = 0;
};

namespace detail {

struct HTerms {
    double h, dh, ddh;
};

inline HTerms h_terms(double J, const PhiSensitivity& s) {
    const double phi = s.phi;
    const double pj = s.d_j, pjj = s.d_jj;
    const double phi2 = phi * phi, phi3 = phi2 * phi, phi4 = phi2 * phi2;
    const double J2 = J * J, J3 = J2 * J, J4 = J2 * J2;
    HTerms t;
    t.h = 1.0 / (phi2 * J2) + 2.0 * std::log(phi);
    t.dh = -2.0 * pj / (phi3 * J2) - 2.0 / (phi2 * J3) + 2.0 * pj / phi;
    t.ddh = 6.0 * pj * pj / (phi4 * J2) - 2.0 * pjj / (phi3 * J2) + 8.0 * pj / (phi3 * J3) + 6.0 / (phi2 * J4) +
            2.0 * pjj / phi - 2.0 * pj * pj / phi2;
    return t;
}

// Derivative of dh/dJ with respect to a design variable a (G or chi).
inline double dh_design(double J, const PhiSensitivity& s, double pa, double pja) {
    const double phi = s.phi, pj = s.d_j;
    const double phi2 = phi * phi, phi3 = phi2 * phi, phi4 = phi2 * phi2;
    const double J2 = J * J, J3 = J2 * J;
    return 6.0 * pa * pj / (phi4 * J2) - 2.0 * pja / (phi3 * J2) + 4.0 * pa / (phi3 * J3) + 2.0 * pja / phi -
           2.0 * pj * pa / phi2;
}

} // namespace detail

/// Evaluates psi, P = dpsi/dF and (optionally) A = dP/dF including the
/// implicit dependence phi(J2D). Throws InvertedElementError for det F <= 0.
inline PointResponse evaluate_point(const Mat2& F, const EffectivePointProperties& props, double mu,
                                    const SolventEnvironment& env, bool with_tangent = true,
                                    const BisectionSettings& bisection = {}) {
    PointResponse r;
    const double J = F.determinant();
    if (!(J > 0.0)) throw InvertedElementError("non-positive in-plane Jacobian");
    r.area_stretch = J;

    const SwellingPoint pt{J, props.shear_modulus, props.chi, mu};
    r.root = solve_phi(pt, env, bisection);
    r.sens = phi_sensitivity(r.root, pt, env);

    const double G = props.shear_modulus;
    const auto h = detail::h_terms(J, r.sens);
    r.dh = h.dh;
    const Mat2 C = F.transpose() * F;
    const Mat2 Finv = F.inverse();
    const Mat2 FinvT = Finv.transpose();

    r.psi = 0.5 * G * (C.trace() - 3.0 + h.h);
    r.P = G * F + 0.5 * G * h.dh * J * FinvT;

    const Vec2 a = fiber_direction(props.fiber_angle);
    const Vec2 Fa = F * a;
    const double i4 = Fa.squaredNorm();
    const double m = std::max(0.0, i4 - 1.0);
    const double eta = props.fiber_stiffness;
    r.psi += 0.5 * eta * m * m;
    r.P += 2.0 * eta * m * Fa * a.transpose();

    if (!with_tangent) return r;

    const double c_outer = 0.5 * G * (h.ddh * J + h.dh) * J;
    const double c_inv = 0.5 * G * h.dh * J;
    for (int i = 0; i < 2; ++i)
        for (int Jx = 0; Jx < 2; ++Jx)
            for (int k = 0; k < 2; ++k)
                for (int L = 0; L < 2; ++L) {
                    double v = (i == k && Jx == L) ? G : 0.0;
                    v += c_outer * FinvT(i, Jx) * FinvT(k, L);
                    v -= c_inv * Finv(Jx, k) * Finv(L, i);
                    if (eta > 0.0) {
                        if (m > 0.0) v += 4.0 * eta * Fa(i) * a(Jx) * Fa(k) * a(L);
                        if (i == k) v += 2.0 * eta * m * a(Jx) * a(L);
                    }
                    r.A(voigt(i, Jx), voigt(k, L)) = v;
                }
    return r;
}

inline std::pair<Mat2, Tangent4> pk1_stress_and_tangent(const Mat2& F, const EffectivePointProperties& props,
                                                        double mu, const SolventEnvironment& env) {
    auto r = evaluate_point(F, props, mu, env, true);
    return {r.P, r.A};
}

/// dP/d(G, chi, eta, theta) at fixed F, from a response computed at F.
struct PointDesignPartials {
    Mat2 dG = Mat2::Zero();
    Mat2 dchi = Mat2::Zero();
    Mat2 deta = Mat2::Zero();
    Mat2 dtheta = Mat2::Zero();
};

inline PointDesignPartials point_design_partials(const Mat2& F, const EffectivePointProperties& props,
                                                 const PointResponse& r) {
    PointDesignPartials d;
    const double J = r.area_stretch;
    const double G = props.shear_modulus;
    const Mat2 FinvT = F.inverse().transpose();
    const auto& s = r.sens;

    const double dh_dG = detail::dh_design(J, s, s.d_g, s.d_jg);
    const double dh_dchi = detail::dh_design(J, s, s.d_c, s.d_jc);
    d.dG = F + 0.5 * r.dh * J * FinvT + 0.5 * G * dh_dG * J * FinvT;
    d.dchi = 0.5 * G * dh_dchi * J * FinvT;

    const Vec2 a = fiber_direction(props.fiber_angle);
    const Vec2 da(-std::sin(props.fiber_angle), std::cos(props.fiber_angle));
    const Vec2 Fa = F * a;
    const double m = std::max(0.0, Fa.squaredNorm() - 1.0);
    d.deta = 2.0 * m * Fa * a.transpose();
    const double eta = props.fiber_stiffness;
    if (eta > 0.0 && m > 0.0) {
        const Vec2 Fda = F * da;
        const double di4 = 2.0 * Fa.dot(Fda);
        d.dtheta = 2.0 * eta * (di4 * Fa * a.transpose() + m * (Fda * a.transpose() + Fa * da.transpose()));
    }
    return d;
}

} // namespace swelltopo
