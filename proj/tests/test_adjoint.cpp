#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "problems.hpp"
#include "swelltopo/adjoint/adjoint.hpp"
#include "swelltopo/adjoint/fd_check.hpp"
#include "swelltopo/optim/optimizer.hpp"

using namespace swelltopo;
using namespace testing_problems;

namespace {

// Gel block on rollers with a held right edge, solved to tight tolerance.
struct HeldBlock {
    QuadMesh mesh = build_rect_mesh(3, 2, 3e-3, 2e-3, 1e-3);
    Assembler assembler{mesh};
    ForwardProblem problem{assembler,
                           {{{"left", 0, 0.0}, {"bottom", 1, 0.0}, {"right", 0, 0.0}}, {}},
                           ElementDesign::uniform(6, 1e6, 0.2),
                           SolventEnvironment{},
                           tight_newton()};
    SolveState state = problem.load_stepping_solve(LoadSchedule{5, 0.05});
};

double loss_at(Optimizer& opt, const std::vector<double>& w, int k) { return opt.evaluate(w, k, false).loss; }

} // namespace

TEST(AdjointSolve, ZeroRightHandSideGivesZero) {
    HeldBlock b;
    const auto sol = adjoint_solve(*b.state.factorization, Eigen::VectorXd::Zero(b.problem.dofs().num_free()));
    EXPECT_TRUE(sol.lambda.isZero(0.0));
    EXPECT_EQ(sol.certificate, 0.0);
}

TEST(AdjointSolve, EqualsForwardSolveAndCertifies) {
    HeldBlock b;
    const auto& fac = *b.state.factorization;
    std::mt19937 rng(1);
    std::normal_distribution<double> N;
    Eigen::VectorXd rhs(fac.K.rows());
    for (auto& x : rhs) x = N(rng);
    const auto sol = adjoint_solve(fac, rhs);
    EXPECT_LT(sol.certificate, kAdjointCertificate);
    const Eigen::VectorXd fwd = Eigen::MatrixXd(fac.K).ldlt().solve(rhs);
    EXPECT_LT((sol.lambda - fwd).norm(), 1e-10 * fwd.norm());
    EXPECT_LT((Eigen::MatrixXd(fac.K) - Eigen::MatrixXd(fac.K).transpose()).cwiseAbs().maxCoeff(),
              1e-12 * fac.K.coeffs().cwiseAbs().maxCoeff());
}

TEST(AdjointSolve, RejectsWrongLength) {
    HeldBlock b;
    EXPECT_THROW(adjoint_solve(*b.state.factorization, Eigen::VectorXd::Ones(3)), ContractError);
}

TEST(StateElimination, LambdaVanishesOnConstrainedDofs) {
    HeldBlock b;
    Eigen::VectorXd g = Eigen::VectorXd::Ones(b.mesh.num_dofs());
    const auto se = eliminate_state(b.problem, b.state, g, {});
    for (int d : b.problem.dofs().fixed_dofs) EXPECT_EQ(se.v(d), 0.0);
    EXPECT_LT(se.adjoint.certificate, kAdjointCertificate);
}

// Blocked force of the held block as a function of the gel shear modulus,
// element-uniform: dJ/dG from the adjoint chain vs re-solved differences.
TEST(StateElimination, BlockedForceModulusSensitivityMatchesResolve) {
    HeldBlock b;
    const auto sel = b.problem.selector("right", 0, 1.0);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(b.mesh.num_dofs());
    for (auto [d, w] : sel) l(d) = w;
    const auto dJ_du = blocked_force_state_gradient(b.problem, b.state, sel);
    const auto se = eliminate_state(b.problem, b.state, dJ_du, l);
    const auto cot = design_cotangent(b.problem, b.state, se.v);
    double adj = 0;
    for (double c : cot.shear_modulus) adj += c;

    auto force = [&](double G) {
        ForwardProblem fp(b.assembler, b.problem.boundary(), ElementDesign::uniform(6, G, 0.2), SolventEnvironment{},
                          tight_newton());
        const auto st = fp.load_stepping_solve(LoadSchedule{5, 0.05});
        return fp.reaction_force(st, sel);
    };
    const double h = 1e2;
    const double fd = (force(1e6 + h) - force(1e6 - h)) / (2 * h);
    EXPECT_LT(relative_error(adj, fd), 1e-6) << adj << " vs " << fd;
}

TEST(DesignGradient, StateFreeLossIsADirectPullback) {
    auto p = shape_problem();
    p.objective.maximize = false;
    Optimizer opt(std::move(p));
    opt.set_J0(1e300); // objective term negligible; only the density constraints remain
    const auto ev = opt.evaluate(10, true);

    const auto& s = ev.sample;
    const auto& probm = opt.problem();
    RowMatrix d_rho = RowMatrix::Zero(s.rho.rows(), s.rho.cols());
    const Eigen::VectorXd vol = element_volumes(probm.mesh);
    const auto gv = constraint_volume(s.rho, vol, probm.constraints[0].phases, probm.constraints[0].bound);
    const auto gr = constraint_grayness(s.rho, ev.xi);
    d_rho += barrier_derivative(gv.value, ev.tau) * gv.d_rho;
    d_rho += barrier_derivative(gr.value, ev.tau) * gr.d_rho;
    const auto direct = opt.network().pullback(opt.sampler().centroids(), d_rho, {});
    double scale = 0;
    for (double g : direct) scale = std::max(scale, std::abs(g));
    for (std::size_t k = 0; k < direct.size(); ++k) EXPECT_NEAR(ev.gradient[k], direct[k], 1e-9 * scale) << k;
}

TEST(DesignGradient, ScalingTheLossScalesTheGradient) {
    auto p = shape_problem();
    p.constraints.clear();
    Optimizer opt(std::move(p));
    opt.evaluate(5, false);
    const double j0 = *opt.J0();
    const auto a = opt.evaluate(5, true).gradient;
    const double c = 7.5;
    opt.set_J0(j0 / c);
    const auto b = opt.evaluate(5, true).gradient;
    double scale = 0;
    for (double g : a) scale = std::max(scale, std::abs(g));
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], c * a[k], 1e-14 * c * scale) << k;
}

TEST(DesignGradient, ShapeLossMatchesFiniteDifferences) {
    auto p = shape_problem();
    p.newton = tight_newton();
    Optimizer opt(std::move(p));
    const auto ev = opt.evaluate(20, true);
    EXPECT_LT(ev.adjoint_certificate, kAdjointCertificate);
    const auto w = opt.network().params();
    const auto idx = pick_indices(static_cast<int>(w.size()), 20, 11);
    const auto rep = fd_check([&](const std::vector<double>& x) { return loss_at(opt, x, 20); }, w, ev.gradient, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_LT(rep.best_error[i], 1e-5) << "weight " << idx[i];
}

TEST(DesignGradient, BlockedForceLossMatchesFiniteDifferences) {
    auto p = blocked_problem();
    p.newton = tight_newton();
    Optimizer opt(std::move(p));
    const auto ev = opt.evaluate(30, true);
    const auto w = opt.network().params();
    const auto idx = pick_indices(static_cast<int>(w.size()), 12, 5);
    const auto rep = fd_check([&](const std::vector<double>& x) { return loss_at(opt, x, 30); }, w, ev.gradient, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_LT(rep.best_error[i], 1e-5) << "weight " << idx[i];
}

TEST(DesignGradient, AngleHeadMatchesFiniteDifferences) {
    auto p = shape_problem(3, 2);
    p.newton = tight_newton();
    auto phases = p.materials.phases();
    phases[0].fiber_stiffness = 5e6;
    p.materials = MaterialTable(phases);
    p.network.angle_head = true;
    p.constraints.clear();
    Optimizer opt(std::move(p));
    const auto ev = opt.evaluate(40, true);
    const auto w = opt.network().params();
    // The last parameters belong to the output layer, including the angle row.
    std::vector<int> idx;
    for (int k = static_cast<int>(w.size()) - 1; k >= static_cast<int>(w.size()) - 30; k -= 3) idx.push_back(k);
    const auto rep = fd_check([&](const std::vector<double>& x) { return loss_at(opt, x, 40); }, w, ev.gradient, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_LT(rep.best_error[i], 1e-5) << "weight " << idx[i];
}

TEST(FdCheck, ConstantLossGivesZeroOnBothSides) {
    const std::vector<double> w{0.3, -1.2, 4.0};
    const std::vector<double> g{0.0, 0.0, 0.0};
    const auto rep = fd_check([](const std::vector<double>&) { return 2.5; }, w, g, {0, 1, 2});
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.fd, 0.0);
        EXPECT_EQ(r.rel_error, 0.0);
    }
}

TEST(FdCheck, QuadraticShowsTheExpectedErrorCurveAndIsReproducible) {
    const std::vector<double> w{0.5, -2.0};
    auto f = [](const std::vector<double>& x) { return std::sin(x[0]) * x[1] * x[1]; };
    const std::vector<double> g{std::cos(0.5) * 4.0, std::sin(0.5) * 2.0 * -2.0};
    const auto a = fd_check(f, w, g, {0, 1});
    const auto b = fd_check(f, w, g, {0, 1});
    EXPECT_EQ(fd_report_csv(a), fd_report_csv(b));
    EXPECT_LT(a.worst_best_error, 1e-8);
    EXPECT_EQ(pick_indices(100, 5, 3), pick_indices(100, 5, 3));
    EXPECT_EQ(fd_report_csv(a).substr(0, 28), "h,index,adjoint,fd,rel_error");
}
