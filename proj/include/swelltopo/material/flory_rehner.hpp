#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "swelltopo/error.hpp"
#include "swelltopo/material/properties.hpp"

namespace swelltopo {

/// Inputs of the swelling equilibrium at one material point, apart from phi.
struct SwellingPoint {
    double area_stretch;  // J2D = lambda1 * lambda2
    double shear_modulus; // Pa
    double chi;
    double mu;            // J/mol
};

namespace detail {

// Residual with (1 - phi) supplied separately so the dry tail keeps precision.
inline double flory_rehner_value(double phi, double one_minus_phi, const SwellingPoint& pt,
                                 const SolventEnvironment& env) {
    const double rt = env.rt();
    const double k = env.molar_volume * pt.shear_modulus / rt;
    const double j2 = pt.area_stretch * pt.area_stretch;
    return (env.mu0 - pt.mu) / rt + std::log(one_minus_phi) + phi + pt.chi * phi * phi + k * (1.0 / (phi * j2) - phi);
}

} // namespace detail

/// F(phi) = (mu0 - mu)/RT + ln(1 - phi) + phi + chi phi^2 + (Omega G / RT)(1/(phi J2D^2) - phi).
inline double flory_rehner_residual(double phi, double area_stretch, double shear_modulus, double chi, double mu,
                                    const SolventEnvironment& env) {
    if (!(phi > 0.0 && phi < 1.0)) throw DomainError("Flory-Rehner residual needs phi in (0, 1)");
    if (!(area_stretch > 0.0)) throw DomainError("Flory-Rehner residual needs a positive area stretch");
    return detail::flory_rehner_value(phi, 1.0 - phi, {area_stretch, shear_modulus, chi, mu}, env);
}

/// First and second partial derivatives of the residual. Subscripts name
/// the differentiation variables (p = phi, j = area stretch, g = shear modulus, c = chi).
struct FloryRehnerPartials {
    double p, j, g, c;
    double pp, pj, pg, pc, jj, jg;
};

inline FloryRehnerPartials flory_rehner_partials(double phi, double one_minus_phi, const SwellingPoint& pt,
                                                 const SolventEnvironment& env) {
    const double rt = env.rt();
    const double kv = env.molar_volume / rt;
    const double k = kv * pt.shear_modulus;
    const double J = pt.area_stretch;
    const double J2 = J * J, J3 = J2 * J, J4 = J2 * J2;
    const double phi2 = phi * phi, phi3 = phi2 * phi;
    const double inv_r = 1.0 / one_minus_phi;

    FloryRehnerPartials d{};
    d.p = -inv_r + 1.0 + 2.0 * pt.chi * phi - k * (1.0 / (phi2 * J2) + 1.0);
    d.j = -2.0 * k / (phi * J3);
    d.g = kv * (1.0 / (phi * J2) - phi);
    d.c = phi2;
    d.pp = -inv_r * inv_r + 2.0 * pt.chi + 2.0 * k / (phi3 * J2);
    d.pj = 2.0 * k / (phi2 * J3);
    d.pg = -kv * (1.0 / (phi2 * J2) + 1.0);
    d.pc = 2.0 * phi;
    d.jj = 6.0 * k / (phi * J4);
    d.jg = -2.0 * kv / (phi * J3);
    return d;
}

struct BisectionSettings {
    double lower = 1e-6;
    double upper = 1.0 - 1e-9;
    double phi_tolerance = 1e-12;
    double residual_tolerance = 1e-10;
    int max_iterations = 200;
    // Newton steps taken inside the final bracket; they only ever shrink |F|.
    int polish_steps = 3;
};

/// Converged swelling root. one_minus_phi is carried separately because in
/// the dry limit it underflows relative to phi.
struct PhiRoot {
    double phi = 1.0;
    double one_minus_phi = 0.0;
    int iterations = 0;
    bool dry_tail = false;
};

/// Bisection for the polymer volume fraction on the fixed bracket. When the
/// residual is still positive at the upper bracket end, the root sits in the
/// log-singular dry tail and is resolved in s = -ln(1 - phi) instead.
inline PhiRoot solve_phi(const SwellingPoint& pt, const SolventEnvironment& env,
                         const BisectionSettings& cfg = {}) {
    if (!(pt.area_stretch > 0.0)) throw DomainError("solve_phi needs a positive area stretch");
    if (!(pt.shear_modulus > 0.0)) throw DomainError("solve_phi needs a positive shear modulus");

    auto f = [&](double phi) { return detail::flory_rehner_value(phi, 1.0 - phi, pt, env); };

    double lo = cfg.lower, hi = cfg.upper;
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if (!(f_lo > 0.0))
        throw BracketError("Flory-Rehner residual has no sign change on the bracket (non-positive at the lower end)");

    PhiRoot root;
    if (f_hi > 0.0) {
        // Dry tail: F(s) = c - s + phi + chi phi^2 + k(1/(phi J^2) - phi), phi = 1 - e^-s.
        auto fs = [&](double s) {
            const double phi = -std::expm1(-s);
            return detail::flory_rehner_value(phi, std::exp(-s), pt, env);
        };
        double s_lo = -std::log1p(-cfg.upper);
        double s_hi = 700.0;
        if (fs(s_hi) > 0.0) throw BracketError("Flory-Rehner residual has no sign change even in the dry tail");
        int it = 0;
        while (s_hi - s_lo > 1e-13 * s_hi && it < cfg.max_iterations) {
            const double mid = 0.5 * (s_lo + s_hi);
            if (fs(mid) > 0.0) s_lo = mid; else s_hi = mid;
            ++it;
        }
        const double s = 0.5 * (s_lo + s_hi);
        root.phi = -std::expm1(-s);
        root.one_minus_phi = std::exp(-s);
        root.iterations = it;
        root.dry_tail = true;
        return root;
    }

    int it = 0;
    double mid = 0.5 * (lo + hi);
    double f_mid = f(mid);
    while (it < cfg.max_iterations) {
        if (hi - lo < cfg.phi_tolerance || std::abs(f_mid) < cfg.residual_tolerance) break;
        if (f_mid > 0.0) lo = mid; else hi = mid;
        mid = 0.5 * (lo + hi);
        f_mid = f(mid);
        ++it;
    }

    double phi = mid;
    double f_phi = f_mid;
    for (int k = 0; k < cfg.polish_steps && f_phi != 0.0; ++k) {
        const auto d = flory_rehner_partials(phi, 1.0 - phi, pt, env);
        const double next = phi - f_phi / d.p;
        if (!(next > lo && next < hi)) break;
        const double f_next = f(next);
        if (!(std::abs(f_next) < std::abs(f_phi))) break;
        phi = next;
        f_phi = f_next;
    }
    root.phi = phi;
    root.one_minus_phi = 1.0 - phi;
    root.iterations = it;
    return root;
}

inline PhiRoot solve_phi(double area_stretch, double shear_modulus, double chi, double mu,
                         const SolventEnvironment& env, const BisectionSettings& cfg = {}) {
    return solve_phi(SwellingPoint{area_stretch, shear_modulus, chi, mu}, env, cfg);
}

/// Below this |dF/dphi| the equilibrium is treated as a swelling fold.
inline constexpr double kSingularityFloor = 1e-12;

/// Implicit derivatives of phi(J2D, G, chi). Second derivatives are the ones
/// the tangent and the design partials need.
struct PhiSensitivity {
    double phi = 1.0;
    double dF_dphi = -std::numeric_limits<double>::infinity();
    double d_j = 0, d_g = 0, d_c = 0;
    double d_jj = 0, d_jg = 0, d_jc = 0;
};

inline PhiSensitivity phi_sensitivity(const PhiRoot& root, const SwellingPoint& pt, const SolventEnvironment& env) {
    PhiSensitivity s;
    s.phi = root.phi;
    // Deep in the dry tail every derivative is below double resolution.
    if (root.one_minus_phi < 1e-100) return s;

    const auto d = flory_rehner_partials(root.phi, root.one_minus_phi, pt, env);
    s.dF_dphi = d.p;
    if (!(std::abs(d.p) >= kSingularityFloor))
        throw SingularEquilibriumError("swelling equilibrium is singular (|dF/dphi| below floor)");

    s.d_j = -d.j / d.p;
    s.d_g = -d.g / d.p;
    s.d_c = -d.c / d.p;
    // phi_ab = -(F_ab + F_pa phi_b + F_pb phi_a + F_pp phi_a phi_b) / F_p
    s.d_jj = -(d.jj + 2.0 * d.pj * s.d_j + d.pp * s.d_j * s.d_j) / d.p;
    s.d_jg = -(d.jg + d.pj * s.d_g + d.pg * s.d_j + d.pp * s.d_j * s.d_g) / d.p;
    s.d_jc = -(d.pj * s.d_c + d.pc * s.d_j + d.pp * s.d_j * s.d_c) / d.p;
    return s;
}

} // namespace swelltopo
