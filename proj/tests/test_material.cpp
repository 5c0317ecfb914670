#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "swelltopo/material/constitutive.hpp"
#include "swelltopo/material/flory_rehner.hpp"
#include "swelltopo/material/properties.hpp"

using namespace swelltopo;

namespace {

SolventEnvironment water() { return SolventEnvironment{}; }

MaterialTable three_phase() {
    return MaterialTable({
        {"gel", 1e6, {{"water", 0.2}}, 0.0},
        {"elastomer", 5e7, {{"water", 5.0}}, 0.0},
        {"void", 1e4, {{"water", 5.0}}, 0.0},
    });
}

EffectivePointProperties gel(double eta = 0.0, double theta = 0.0) { return {1e6, 0.2, eta, theta}; }

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST(Interpolate, OneHotSelectsPhaseForAnyExponent) {
    const auto table = three_phase();
    for (double p : {1.0, 2.0, 3.0, 4.5})
        for (double q : {1.0, 2.0}) {
            for (int k = 0; k < 3; ++k) {
                std::array<double, 3> rho{0, 0, 0};
                rho[k] = 1.0;
                const auto e = interpolate(rho, table, {p, q}, "water", 0.3);
                EXPECT_EQ(e.shear_modulus, table.phase(k).shear_modulus);
                EXPECT_EQ(e.chi, table.chi(k, "water"));
                EXPECT_EQ(e.fiber_angle, 0.3);
            }
        }
}

TEST(Interpolate, HalfMixtureCubesTheModuli) {
    const std::array<double, 3> rho{0.5, 0.5, 0.0};
    const auto e = interpolate(rho, three_phase(), {3, 1}, "water", 0.0);
    EXPECT_DOUBLE_EQ(e.shear_modulus, 0.125 * 1e6 + 0.125 * 5e7);
}

TEST(Interpolate, LinearChiAverage) {
    const std::array<double, 3> rho{1.0 / 3, 1.0 / 3, 1.0 / 3};
    const auto e = interpolate(rho, three_phase(), {3, 1}, "water", 0.0);
    EXPECT_NEAR(e.chi, (0.2 + 5 + 5) / 3.0, 1e-14);
}

TEST(Interpolate, FiberStiffnessFollowsGelDensity) {
    MaterialTable t({{"gel", 1e6, {{"water", 0.2}}, 5e6}, {"elastomer", 5e7, {{"water", 5.0}}, 0.0}});
    const std::array<double, 2> rho{0.7, 0.3};
    const auto e = interpolate(rho, t, {3, 1}, "water", 0.0);
    EXPECT_NEAR(e.fiber_stiffness, std::pow(0.7, 3) * 5e6, 1e-6);
}

TEST(Interpolate, RejectsInvalidDesigns) {
    const auto t = three_phase();
    EXPECT_THROW(interpolate(std::array<double, 3>{-0.1, 0.6, 0.5}, t, {}, "water", 0), InvalidDesignError);
    EXPECT_THROW(interpolate(std::array<double, 3>{0.5, 0.5, 0.1}, t, {}, "water", 0), InvalidDesignError);
    EXPECT_THROW(interpolate(std::array<double, 3>{0.5, 0.5, 0.0}, t, {}, "organic", 0), ConfigError);
}

TEST(FloryRehner, CancellingTermsGiveAnalyticValue) {
    SolventEnvironment env;
    env.mu0 = 0.0;
    const double v = flory_rehner_residual(0.5, 1.3, 0.0, 0.0, 0.0, env);
    EXPECT_NEAR(v, std::log(0.5) + 0.5, 1e-15);
}

TEST(FloryRehner, LogSingularityAtDryEnd) {
    const auto env = water();
    const double a = flory_rehner_residual(1 - 1e-6, 1.0, 1e6, 0.2, -100, env);
    const double b = flory_rehner_residual(1 - 1e-12, 1.0, 1e6, 0.2, -100, env);
    EXPECT_LT(b, a);
    EXPECT_LT(b, -25.0);
}

TEST(FloryRehner, DirectSubstitutionValue) {
    // mpmath direct evaluation, cross-checked on a 1e6-point tabulation of F.
    const double v = flory_rehner_residual(0.8, 1.0, 1e6, 0.2, -100, water());
    EXPECT_NEAR(v, -0.63780648618291574707, 1e-14);
}

TEST(FloryRehner, DomainErrors) {
    const auto env = water();
    EXPECT_THROW(flory_rehner_residual(1.0, 1.0, 1e6, 0.2, -100, env), DomainError);
    EXPECT_THROW(flory_rehner_residual(0.0, 1.0, 1e6, 0.2, -100, env), DomainError);
    EXPECT_THROW(flory_rehner_residual(1.2, 1.0, 1e6, 0.2, -100, env), DomainError);
    EXPECT_THROW(flory_rehner_residual(0.5, -1.0, 1e6, 0.2, -100, env), DomainError);
}

TEST(SolvePhi, DryBathGivesDryPolymer) {
    const auto r = solve_phi(1.0, 1e6, 0.2, -1e5, water());
    EXPECT_GE(r.phi, 1.0 - 1e-9);
    EXPECT_TRUE(r.dry_tail);
}

TEST(SolvePhi, ElastomerBarelySwells) {
    const auto r = solve_phi(1.0, 5e7, 5.0, -100, water());
    EXPECT_GT(r.phi, 0.99);
}

TEST(SolvePhi, MatchesDenseScanRoot) {
    // Dense scan over (0, 1) then 200 mpmath bisections.
    const auto r = solve_phi(1.0, 1e6, 0.2, -100, water());
    EXPECT_NEAR(r.phi, 0.35489071363505188669, 1e-8);
    EXPECT_FALSE(r.dry_tail);
}

TEST(SolvePhi, BracketFailureForUnphysicalBath) {
    // mu far above mu0 with a near-zero modulus leaves F negative everywhere.
    EXPECT_THROW(solve_phi(1.0, 1e-6, 0.2, 1e5, water()), BracketError);
    EXPECT_THROW(solve_phi(1.0, -1.0, 0.2, -100, water()), DomainError);
}

TEST(SolvePhi, RootCertificateProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uj(0.6, 2.5), ulg(3.5, 7.5), uchi(0.05, 3.0), umu(-3000, -10);
    const auto env = water();
    for (int n = 0; n < 400; ++n) {
        const double J = uj(rng), G = std::pow(10.0, ulg(rng)), chi = uchi(rng), mu = umu(rng);
        const auto r = solve_phi(J, G, chi, mu, env);
        if (r.dry_tail) continue;
        ASSERT_GT(r.phi, 1e-6);
        ASSERT_LT(r.phi, 1 - 1e-9);
        EXPECT_LT(std::abs(flory_rehner_residual(r.phi, J, G, chi, mu, env)), 1e-10);
        const double tol = 1e-12;
        if (r.phi + tol < 1.0) {
            const double a = flory_rehner_residual(r.phi - tol, J, G, chi, mu, env);
            const double b = flory_rehner_residual(r.phi + tol, J, G, chi, mu, env);
            EXPECT_TRUE(a > 0 && b < 0) << "J=" << J << " G=" << G << " chi=" << chi << " mu=" << mu;
        }
        // Deterministic.
        EXPECT_EQ(r.phi, solve_phi(J, G, chi, mu, env).phi);
    }
}

TEST(SolvePhi, MonotoneTrends) {
    const auto env = water();
    double prev = 0;
    for (int i = 0; i <= 60; ++i) {
        const double chi = 0.1 + 1.9 * i / 60.0;
        const double phi = solve_phi(1.0, 1e6, chi, -100, env).phi;
        EXPECT_GE(phi, prev);
        prev = phi;
    }
    prev = 0;
    for (int i = 0; i <= 60; ++i) {
        const double G = std::pow(10.0, 4.0 + 3.0 * i / 60.0);
        const double phi = solve_phi(1.0, G, 0.2, -100, env).phi;
        EXPECT_GE(phi, prev);
        prev = phi;
    }
    prev = 2;
    for (int i = 0; i <= 60; ++i) {
        const double mu = env.mu_dry + (env.mu_wet - env.mu_dry) * i / 60.0;
        const double phi = solve_phi(1.0, 1e6, 0.2, mu, env).phi;
        EXPECT_LE(phi, prev);
        prev = phi;
    }
}

TEST(PhiSensitivity, MatchesFiniteDifferenceOfRoot) {
    const auto env = water();
    const SwellingPoint pt{1.2, 1e6, 0.2, -100};
    const auto s = phi_sensitivity(solve_phi(pt, env), pt, env);
    auto phi_at = [&](SwellingPoint p) { return solve_phi(p, env).phi; };

    const double hc = 1e-5;
    const double fd_c = (phi_at({1.2, 1e6, 0.2 + hc, -100}) - phi_at({1.2, 1e6, 0.2 - hc, -100})) / (2 * hc);
    EXPECT_LT(rel_err(s.d_c, fd_c), 1e-6);
    EXPECT_GT(s.d_c, 0.0);

    const double hj = 1e-5;
    const double fd_j = (phi_at({1.2 + hj, 1e6, 0.2, -100}) - phi_at({1.2 - hj, 1e6, 0.2, -100})) / (2 * hj);
    EXPECT_LT(rel_err(s.d_j, fd_j), 1e-6);

    const double hg = 1.0;
    const double fd_g = (phi_at({1.2, 1e6 + hg, 0.2, -100}) - phi_at({1.2, 1e6 - hg, 0.2, -100})) / (2 * hg);
    EXPECT_LT(rel_err(s.d_g, fd_g), 1e-6);

    // Second derivatives through the first-order IFT evaluated at perturbed points.
    auto sens_at = [&](SwellingPoint p) { return phi_sensitivity(solve_phi(p, env), p, env); };
    const double fd_jj = (sens_at({1.2 + hj, 1e6, 0.2, -100}).d_j - sens_at({1.2 - hj, 1e6, 0.2, -100}).d_j) / (2 * hj);
    EXPECT_LT(rel_err(s.d_jj, fd_jj), 1e-5);
    const double fd_jg = (sens_at({1.2, 1e6 + hg, 0.2, -100}).d_j - sens_at({1.2, 1e6 - hg, 0.2, -100}).d_j) / (2 * hg);
    EXPECT_LT(rel_err(s.d_jg, fd_jg), 1e-5);
    const double fd_jc = (sens_at({1.2, 1e6, 0.2 + hc, -100}).d_j - sens_at({1.2, 1e6, 0.2 - hc, -100}).d_j) / (2 * hc);
    EXPECT_LT(rel_err(s.d_jc, fd_jc), 1e-5);
}

TEST(PhiSensitivity, StretchIndependentWithoutNetwork) {
    SolventEnvironment env;
    // With G = 0 the residual loses its stretch dependence.
    const auto root = solve_phi(1.3, 1e-300, 0.6, -100, env);
    const auto s = phi_sensitivity(root, SwellingPoint{1.3, 0.0, 0.6, -100}, env);
    EXPECT_EQ(s.d_j, 0.0);
    EXPECT_EQ(s.d_jj, 0.0);
}

TEST(StrainEnergy, ReferenceIsStressFree) {
    EXPECT_DOUBLE_EQ(strain_energy(Mat2::Identity(), 1.0, gel()), 0.0);
}

TEST(StrainEnergy, SwollenIdentity) {
    const double psi = strain_energy(Mat2::Identity(), 0.5, gel());
    EXPECT_NEAR(psi, 0.5e6 * (3.0 - 2.0 * std::log(2.0)), 1e-8);
}

TEST(StrainEnergy, FiberIsTensionOnly) {
    Mat2 F = Mat2::Identity();
    F(0, 0) = 0.9;
    EXPECT_DOUBLE_EQ(strain_energy(F, 0.7, gel(5e6, 0.0)), strain_energy(F, 0.7, gel(0.0, 0.0)));
}

TEST(StrainEnergy, FiberGateProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3), ut(0.0, M_PI);
    int checked = 0;
    for (int n = 0; n < 500; ++n) {
        Mat2 F = Mat2::Identity() + Mat2{{u(rng), u(rng)}, {u(rng), u(rng)}};
        if (F.determinant() <= 0.1) continue;
        const double theta = ut(rng);
        const Vec2 a = fiber_direction(theta);
        if ((F * a).squaredNorm() > 1.0) continue;
        ++checked;
        EXPECT_DOUBLE_EQ(strain_energy(F, 0.6, gel(5e6, theta)), strain_energy(F, 0.6, gel(0.0, theta)));
    }
    EXPECT_GT(checked, 50);
}

TEST(StrainEnergy, GelTermIsIsotropic) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3), ut(0.0, 2 * M_PI);
    for (int n = 0; n < 200; ++n) {
        Mat2 F = Mat2::Identity() + Mat2{{u(rng), u(rng)}, {u(rng), u(rng)}};
        if (F.determinant() <= 0.1) continue;
        const double t = ut(rng);
        Mat2 Q{{std::cos(t), -std::sin(t)}, {std::sin(t), std::cos(t)}};
        const double a = strain_energy(F, 0.45, gel());
        const double b = strain_energy(Q * F, 0.45, gel());
        EXPECT_NEAR(a, b, 1e-12 * std::abs(a) + 1e-6);
    }
}

TEST(StrainEnergy, InvertedThrows) {
    Mat2 F{{-1.0, 0.0}, {0.0, 1.0}};
    EXPECT_THROW(strain_energy(F, 0.5, gel()), InvertedElementError);
    EXPECT_THROW(evaluate_point(F, gel(), -100, water()), InvertedElementError);
}

namespace {

double energy_resolved(const Mat2& F, const EffectivePointProperties& p, double mu, const SolventEnvironment& env) {
    const double phi = solve_phi(F.determinant(), p.shear_modulus, p.chi, mu, env).phi;
    return strain_energy(F, phi, p);
}

void check_stress_and_tangent(const Mat2& F, const EffectivePointProperties& props, double mu) {
    const auto env = water();
    const auto r = evaluate_point(F, props, mu, env);
    const double h = 1e-4;
    const double scale = props.shear_modulus + props.fiber_stiffness;
    for (int i = 0; i < 2; ++i)
        for (int J = 0; J < 2; ++J) {
            Mat2 Fp = F, Fm = F;
            Fp(i, J) += h;
            Fm(i, J) -= h;
            const double fd = (energy_resolved(Fp, props, mu, env) - energy_resolved(Fm, props, mu, env)) / (2 * h);
            EXPECT_NEAR(r.P(i, J), fd, 1e-6 * scale) << "P(" << i << "," << J << ")";
            const auto Pp = evaluate_point(Fp, props, mu, env, false).P;
            const auto Pm = evaluate_point(Fm, props, mu, env, false).P;
            const Mat2 dP = (Pp - Pm) / (2 * h);
            for (int k = 0; k < 2; ++k)
                for (int L = 0; L < 2; ++L)
                    EXPECT_NEAR(r.A(voigt(k, L), voigt(i, J)), dP(k, L), 1e-5 * scale)
                        << "A(" << k << L << i << J << ")";
        }
    EXPECT_LT((r.A - r.A.transpose()).norm(), 1e-9 * r.A.norm());
}

} // namespace

TEST(PointResponse, StressAndTangentMatchFiniteDifferences) {
    check_stress_and_tangent(Mat2{{1.3, 0.1}, {-0.05, 1.2}}, gel(), -100);
    check_stress_and_tangent(Mat2{{0.95, 0.2}, {0.1, 1.1}}, gel(), -2000);
    check_stress_and_tangent(Mat2{{1.3, 0.1}, {-0.05, 1.2}}, gel(5e6, 0.4), -100);
    check_stress_and_tangent(Mat2{{1.1, 0.0}, {0.3, 1.05}}, EffectivePointProperties{5e7, 5.0, 0, 0}, -100);
    check_stress_and_tangent(Mat2{{1.1, 0.05}, {0.1, 0.9}}, EffectivePointProperties{2.3e5, 1.7, 1e5, 2.0}, -500);
}

TEST(PointResponse, RandomTangentConsistency) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.25, 0.25), ut(0.0, M_PI), ulg(4.0, 7.5), uchi(0.1, 5.0);
    for (int n = 0; n < 12; ++n) {
        Mat2 F = 1.3 * Mat2::Identity() + Mat2{{u(rng), u(rng)}, {u(rng), u(rng)}};
        EffectivePointProperties p{std::pow(10.0, ulg(rng)), uchi(rng), 0.0, ut(rng)};
        p.fiber_stiffness = (n % 2) ? 5.0 * p.shear_modulus : 0.0;
        check_stress_and_tangent(F, p, -100);
    }
}

TEST(PointResponse, FreeSwellingStateIsStressFree) {
    const oracle::Bath bath{-100, 0, 1.8e-5, 298};
    const auto [lam, phi] = oracle::free_swelling(1e6, 0.2, bath);
    const auto r = evaluate_point(lam * Mat2::Identity(), gel(), -100, water());
    EXPECT_LT(r.P.norm(), 1e-6 * 1e6);
    EXPECT_NEAR(r.root.phi, phi, 1e-10);
}

TEST(PointResponse, DesignPartialsMatchFiniteDifferences) {
    const auto env = water();
    const Mat2 F{{1.35, 0.08}, {-0.04, 1.25}};
    const EffectivePointProperties base{7e5, 0.35, 3e6, 0.6};
    const auto r = evaluate_point(F, base, -100, env);
    const auto d = point_design_partials(F, base, r);
    auto P_at = [&](EffectivePointProperties p) { return evaluate_point(F, p, -100, env, false).P; };
    auto fd = [&](auto mutate, double h) {
        auto p = base, m = base;
        mutate(p, h);
        mutate(m, -h);
        return Mat2((P_at(p) - P_at(m)) / (2 * h));
    };
    const Mat2 fG = fd([](auto& p, double h) { p.shear_modulus += h; }, 10.0);
    const Mat2 fC = fd([](auto& p, double h) { p.chi += h; }, 1e-5);
    const Mat2 fE = fd([](auto& p, double h) { p.fiber_stiffness += h; }, 10.0);
    const Mat2 fT = fd([](auto& p, double h) { p.fiber_angle += h; }, 1e-6);
    EXPECT_LT((d.dG - fG).norm(), 1e-6 * fG.norm());
    EXPECT_LT((d.dchi - fC).norm(), 1e-6 * fC.norm());
    EXPECT_LT((d.deta - fE).norm(), 1e-6 * fE.norm());
    EXPECT_LT((d.dtheta - fT).norm(), 1e-6 * fT.norm());
}
