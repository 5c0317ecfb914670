#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "problems.hpp"
#include "swelltopo/optim/history.hpp"

using namespace swelltopo;
using namespace testing_problems;

namespace {

std::vector<std::vector<double>> parse_csv_rows(const std::string& csv, std::vector<std::string>& header) {
    std::istringstream is(csv);
    std::string line, cell;
    std::getline(is, line);
    std::istringstream hs(line);
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        rows.emplace_back();
        while (std::getline(ls, cell, ',')) rows.back().push_back(std::stod(cell));
    }
    return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    ADD_FAILURE() << "missing column " << name;
    return 0;
}

} // namespace

// ---- barrier and loss ----

TEST(Barrier, JunctionValuesMatchTheClosedForm) {
    EXPECT_NEAR(barrier(-1.0 / 9.0, 3.0), 2.0 / 3.0 * std::log(3.0), 1e-15);
    const double tau = 3.0, g = -1.0 / 9.0;
    EXPECT_NEAR(tau * g - std::log(1.0 / (tau * tau)) / tau + 1.0 / tau, 2.0 / 3.0 * std::log(3.0), 1e-15);
    EXPECT_EQ(barrier(-1.0, 1.0), 0.0);
}

TEST(Barrier, IsContinuouslyDifferentiableAcrossTheSchedule) {
    ContinuationSettings cs;
    for (int k = 0; k <= 250; ++k) {
        const double tau = cs.tau_at(k), g0 = -1.0 / (tau * tau);
        const double log_side = -std::log(-g0) / tau;
        const double lin_side = tau * g0 - std::log(1.0 / (tau * tau)) / tau + 1.0 / tau;
        EXPECT_NEAR(log_side, lin_side, 1e-12) << k;
        EXPECT_NEAR(barrier(g0, tau), 2.0 / tau * std::log(tau), 1e-12) << k;
        const double h = 1e-7 * std::abs(g0);
        const double left = (barrier(g0, tau) - barrier(g0 - h, tau)) / h;
        const double right = (barrier(g0 + h, tau) - barrier(g0, tau)) / h;
        EXPECT_NEAR(left / tau, 1.0, 1e-6) << k;
        EXPECT_NEAR(right / tau, 1.0, 1e-6) << k;
        EXPECT_NEAR(barrier_derivative(g0, tau), tau, 1e-12 * tau);
    }
}

TEST(Loss, ComposesObjectiveAndBarriers) {
    EXPECT_EQ(total_loss(2.0, 2.0, {}, 3.0), 1.0);
    const double tau = 5.0;
    EXPECT_NEAR(total_loss(0.0, 1.0, {-1.0 / 25.0, -1.0 / 25.0}, tau), 2 * (2.0 / tau) * std::log(tau), 1e-14);
    EXPECT_GT(barrier(0.5, tau), barrier(0.0, tau)); // linear branch keeps growing past g = 0
}

// ---- constraints ----

TEST(VolumeConstraint, UniformAndAllVoidCases) {
    const QuadMesh mesh = build_rect_mesh(4, 3, 4, 3, 1);
    const Eigen::VectorXd vol = element_volumes(mesh);
    RowMatrix rho(12, 3);
    rho.col(0).setConstant(0.3);
    rho.col(1).setConstant(0.2);
    rho.col(2).setConstant(0.5);
    EXPECT_NEAR(constraint_volume(rho, vol, {0}, 0.3).value, 0.0, 1e-15);
    EXPECT_NEAR(constraint_volume(rho, vol, {0, 1}, 0.5).value, 0.0, 1e-15);
    rho.setZero();
    rho.col(2).setOnes();
    EXPECT_EQ(constraint_volume(rho, vol, {0, 1}, 0.4).value, -0.4);
    EXPECT_THROW(constraint_volume(rho, vol, {}, 0.4), ConfigError);
}

TEST(VolumeConstraint, WeightsByElementAreaOnADistortedMesh) {
    QuadMesh mesh = build_rect_mesh(3, 3, 3, 3, 0.5);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> U(-0.25, 0.25);
    for (auto& x : mesh.nodes)
        if (x.x() > 0 && x.x() < 3 && x.y() > 0 && x.y() < 3) x += Vec2(U(rng), U(rng));
    RowMatrix rho(9, 2);
    for (int e = 0; e < 9; ++e) {
        const double r = std::uniform_real_distribution<double>(0, 1)(rng);
        rho.row(e) << r, 1 - r;
    }
    // Shoelace areas as the direct-sum oracle.
    double num = 0, den = 0;
    for (int e = 0; e < 9; ++e) {
        double a = 0;
        for (int k = 0; k < 4; ++k) {
            const Vec2& p = mesh.nodes[mesh.elements[e][k]];
            const Vec2& q = mesh.nodes[mesh.elements[e][(k + 1) % 4]];
            a += 0.5 * (p.x() * q.y() - q.x() * p.y());
        }
        num += rho(e, 0) * a;
        den += a;
    }
    const auto c = constraint_volume(rho, element_volumes(mesh), {0}, 0.25);
    EXPECT_NEAR(c.raw, num / den, 1e-14);
}

TEST(GraynessConstraint, OneHotUniformAndSimplexMaximum) {
    RowMatrix onehot = RowMatrix::Zero(4, 3);
    for (int i = 0; i < 4; ++i) onehot(i, i % 3) = 1;
    EXPECT_EQ(constraint_grayness(onehot, 0.7).value, -0.7);
    const RowMatrix uniform = RowMatrix::Constant(5, 3, 1.0 / 3.0);
    EXPECT_NEAR(grayness(uniform), 2.0 / 3.0, 1e-15);

    double best = 0;
    const int n = 300;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            RowMatrix r(1, 3);
            r << double(i) / n, double(j) / n, double(n - i - j) / n;
            best = std::max(best, grayness(r));
        }
    EXPECT_NEAR(best, 2.0 / 3.0, 1e-12);
}

TEST(GraynessConstraint, DerivativeMatchesDifferences) {
    RowMatrix r(2, 3);
    r << 0.2, 0.5, 0.3, 0.9, 0.05, 0.05;
    const auto c = constraint_grayness(r, 0.1);
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) {
            RowMatrix a = r, b = r;
            a(i, k) += 1e-6;
            b(i, k) -= 1e-6;
            EXPECT_NEAR(c.d_rho(i, k), (grayness(a) - grayness(b)) / 2e-6, 1e-9);
        }
}

// ---- shape objective ----

TEST(ShapeObjective, ThreeFourFiveAndExactMatch) {
    const QuadMesh mesh = build_rect_mesh(2, 2, 2e-2, 2e-2, 1e-3);
    ShapeTarget t;
    t.points.resize(1, 2);
    t.points << 1.3e-2, 0.4e-2;
    t.displacements.resize(1, 2);
    t.displacements << 3e-3, 4e-3;
    const ShapeObjective obj(mesh, t);
    EXPECT_NEAR(obj.evaluate(Eigen::VectorXd::Zero(mesh.num_dofs())).value, 2.5e-5, 1e-20);

    Eigen::VectorXd u(mesh.num_dofs());
    for (int n = 0; n < mesh.num_nodes(); ++n) u.segment<2>(2 * n) << 3e-3, 4e-3;
    EXPECT_EQ(obj.evaluate(u).value, 0.0);
}

TEST(ShapeObjective, GradientMatchesDifferencesAndOutsidePointsAreRejected) {
    const QuadMesh mesh = build_rect_mesh(3, 2, 3, 2, 1);
    ShapeTarget t;
    t.points.resize(2, 2);
    t.points << 0.4, 1.7, 2.0, 1.0;
    t.displacements.resize(2, 2);
    t.displacements << 0.1, -0.2, 0.0, 0.3;
    const ShapeObjective obj(mesh, t);
    std::mt19937 rng(2);
    std::normal_distribution<double> N(0, 0.1);
    Eigen::VectorXd u(mesh.num_dofs());
    for (auto& x : u) x = N(rng);
    const auto g = obj.evaluate(u).gradient;
    for (int d = 0; d < mesh.num_dofs(); ++d) {
        Eigen::VectorXd a = u, b = u;
        a(d) += 1e-6;
        b(d) -= 1e-6;
        EXPECT_NEAR(g(d), (obj.evaluate(a).value - obj.evaluate(b).value) / 2e-6, 1e-9);
    }
    t.points(0, 0) = 3.5;
    EXPECT_THROW(ShapeObjective(mesh, t), ConfigError);
}

TEST(ShapeObjective, TargetFromAForwardSolveIsReproducedExactly) {
    auto p = shape_problem(4, 2);
    p.constraints.clear();
    Optimizer probe(std::move(p));
    const auto ev = probe.evaluate(0, false);
    auto q = shape_problem(4, 2);
    q.constraints.clear();
    for (Eigen::Index k = 0; k < q.objective.response.target.points.rows(); ++k) {
        const Vec2 x = q.objective.response.target.points.row(k).transpose();
        const auto s = locate_point(q.mesh, x);
        Vec2 d = Vec2::Zero();
        for (int a = 0; a < 4; ++a) d += s.weights[a] * ev.states[0].u.segment<2>(2 * s.nodes[a]);
        q.objective.response.target.displacements.row(k) = d.transpose();
    }
    Optimizer opt(std::move(q));
    EXPECT_LT(opt.evaluate(0, false).objective_raw, 1e-16);
}

// ---- blocked force ----

TEST(BlockedForce, ZeroStimulusGivesZero) {
    auto p = blocked_problem();
    p.solvents[0].mu_wet = p.solvents[0].mu_dry;
    Optimizer opt(std::move(p));
    opt.set_J0(1.0);
    EXPECT_EQ(opt.evaluate(0, false).objective_raw, 0.0);
}

TEST(BlockedForce, AllGelPushesOutwardAndFlipsWithDirection) {
    auto p = blocked_problem();
    p.network.num_phases = 0; // fixed layout, only the (inert) angle head is trainable
    p.network.angle_head = true;
    p.fixed_rho = RowMatrix::Zero(p.mesh.num_elements(), 3);
    p.fixed_rho.col(0).setOnes();
    p.constraints.clear();
    Optimizer minus_x(p);
    const double f = minus_x.evaluate(0, false).objective_raw;
    EXPECT_LT(f, 0.0); // expansion pushes the port along +x, against the -x convention

    p.objective.response.direction = +1.0;
    Optimizer plus_x(std::move(p));
    EXPECT_EQ(plus_x.evaluate(0, false).objective_raw, -f);
}

TEST(BlockedForce, FreeOutputDofIsAConfigViolation) {
    auto p = blocked_problem();
    p.load_cases[0].bc.dirichlet.pop_back();
    EXPECT_THROW(Optimizer{std::move(p)}, ConfigError);
}

// ---- Adam ----

TEST(Adam, ZeroGradientLeavesWeightsUnchanged) {
    std::vector<double> w{1.0, -2.0, 3.0};
    AdamState st;
    adam_step(w, {0, 0, 0}, st, AdamSettings{});
    EXPECT_EQ(w, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, ClipsToUnitNorm) {
    std::vector<double> g{6.0, 8.0};
    EXPECT_EQ(clip_gradient(g, 1.0), 10.0);
    EXPECT_NEAR(std::hypot(g[0], g[1]), 1.0, 1e-15);
    std::vector<double> small{0.3, 0.4};
    clip_gradient(small, 1.0);
    EXPECT_EQ(small, (std::vector<double>{0.3, 0.4}));
}

TEST(Adam, FirstStepMovesEachWeightByTheLearningRate) {
    std::vector<double> w{0.0, 0.0};
    AdamState st;
    adam_step(w, {3.0, -4.0}, st, AdamSettings{});
    EXPECT_NEAR(w[0], -5e-3, 1e-10);
    EXPECT_NEAR(w[1], 5e-3, 1e-10);
}

TEST(Adam, NonFiniteGradientAborts) {
    std::vector<double> w{0.0};
    AdamState st;
    EXPECT_THROW(adam_step(w, {std::nan("")}, st, AdamSettings{}), AdjointError);
}

// ---- projection ----

TEST(Projection, SmallSharpnessIsNearlyTheIdentity) {
    RowMatrix r(2, 3);
    r << 0.2, 0.5, 0.3, 0.9, 0.05, 0.05;
    EXPECT_LT((threshold_projection(r, 1e-5, 0.5) - r).cwiseAbs().maxCoeff(), 1e-9);
    for (double beta : {0.5, 4.0, 32.0}) EXPECT_NEAR(threshold_ramp(0.5, beta, 0.5), 0.5, 1e-15);
    for (double eta : {0.3, 0.5, 0.7})
        EXPECT_NEAR(threshold_ramp(eta, 1e-6, eta), eta, 1e-9);
}

TEST(Projection, RowsStayOnTheSimplexAndPullbackMatchesDifferences) {
    std::mt19937 rng(9);
    std::gamma_distribution<double> G(1.0, 1.0);
    RowMatrix r(50, 3);
    for (int i = 0; i < 50; ++i) {
        for (int k = 0; k < 3; ++k) r(i, k) = G(rng);
        r.row(i) /= r.row(i).sum();
    }
    const RowMatrix pr = threshold_projection(r, 6.0, 0.5);
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(pr.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(pr.minCoeff(), 0.0);

    RowMatrix d(50, 3);
    for (int i = 0; i < 50; ++i)
        for (int k = 0; k < 3; ++k) d(i, k) = std::sin(1.0 + i + 3 * k);
    const RowMatrix back = threshold_projection_pullback(r, 6.0, 0.5, d);
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 3; ++k) {
            RowMatrix a = r, b = r;
            a(i, k) += 1e-6;
            b(i, k) -= 1e-6;
            const double fd = ((threshold_projection(a, 6.0, 0.5) - threshold_projection(b, 6.0, 0.5)).array() *
                               d.array()).sum() / 2e-6;
            EXPECT_NEAR(back(i, k), fd, 1e-7);
        }
}

// ---- schedules ----

TEST(Continuation, SchedulesFollowTheirClosedForms) {
    ContinuationSettings c;
    for (int k = 0; k <= 250; ++k) {
        EXPECT_EQ(c.tau_at(k), 3.0 * std::pow(1.03, k));
        EXPECT_EQ(c.p_at(k), std::min(1.0 + 0.05 * k, 3.0));
        EXPECT_EQ(c.xi_at(k), std::max(2.0 - 0.05 * k, 0.05));
    }
    EXPECT_EQ(c.p_at(40), 3.0);
    EXPECT_FALSE(c.settled(38));
    EXPECT_TRUE(c.settled(40));
}

TEST(Continuation, LossChangeIsAMovingAverage) {
    EXPECT_LT(loss_change({1, 2, 3}, 5), 0.0);
    EXPECT_DOUBLE_EQ(loss_change({0, 1, 3, 6}, 3), 2.0);
    EXPECT_DOUBLE_EQ(loss_change({0, 1, 3, 6}, 1), 3.0);
}

// ---- optimization loop ----

TEST(Optimize, HistoryRowsDecomposeIntoTheirParts) {
    auto p = shape_problem();
    p.stop.max_iterations = 4;
    Optimizer opt(std::move(p));
    HistoryTable hist(opt.problem());
    std::vector<double> certs;
    opt.run([&](const Evaluation& ev) {
        hist.append(ev);
        certs.push_back(ev.adjoint_certificate);
    });
    std::vector<std::string> h;
    const auto rows = parse_csv_rows(hist.csv(), h);
    ASSERT_EQ(rows.size(), 4u);
    const int L = column(h, "loss"), T = column(h, "J_over_J0"), tau = column(h, "tau");
    const int g0 = column(h, "g_volume_solid"), g1 = column(h, "g_grayness");
    for (const auto& r : rows) {
        EXPECT_NEAR(r[L], r[T] + barrier(r[g0], r[tau]) + barrier(r[g1], r[tau]), 1e-12);
        EXPECT_EQ(r[tau], 3.0 * std::pow(1.03, r[0]));
    }
    for (double c : certs) EXPECT_LT(c, kAdjointCertificate);
}

TEST(Optimize, SingleIterationBoundGivesOneRow) {
    auto p = shape_problem();
    p.stop.max_iterations = 1;
    Optimizer opt(std::move(p));
    const auto w0 = opt.network().params();
    HistoryTable hist(opt.problem());
    const auto res = opt.run([&](const Evaluation& ev) { hist.append(ev); });
    EXPECT_EQ(res.iterations, 1);
    EXPECT_EQ(hist.rows(), 1);
    EXPECT_EQ(opt.network().params(), w0); // no update after the final evaluation
}

TEST(Optimize, StationaryStartStopsOnTheLossChange) {
    auto p = shape_problem();
    p.constraints.clear();
    p.continuation.p_start = p.continuation.p_max;
    p.continuation.xi_start = p.continuation.xi_min;
    // Target taken from the initial design itself.
    {
        auto probe_problem = p;
        Optimizer probe(std::move(probe_problem));
        const auto ev = probe.evaluate(0, false);
        for (Eigen::Index k = 0; k < p.objective.response.target.points.rows(); ++k) {
            const auto s = locate_point(p.mesh, p.objective.response.target.points.row(k).transpose());
            Vec2 d = Vec2::Zero();
            for (int a = 0; a < 4; ++a) d += s.weights[a] * ev.states[0].u.segment<2>(2 * s.nodes[a]);
            p.objective.response.target.displacements.row(k) = d.transpose();
        }
    }
    Optimizer opt(std::move(p));
    const auto res = opt.run();
    EXPECT_TRUE(res.stopped_on_loss_change);
    EXPECT_LE(res.iterations, 8);
}

TEST(Optimize, RepeatedSeededRunsAreBitwiseIdentical) {
    auto run_once = [] {
        auto p = blocked_problem();
        p.stop.max_iterations = 3;
        Optimizer opt(std::move(p));
        HistoryTable hist(opt.problem());
        opt.run([&](const Evaluation& ev) { hist.append(ev); });
        return std::make_pair(hist.csv(), opt.network().params());
    };
    const auto a = run_once();
    const auto b = run_once();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

// Two baths share the design; the second case carries a reaction floor.
TEST(Optimize, LoadCaseEvaluationOrderChangesNothing) {
    auto p = blocked_problem();
    SolventEnvironment oil;
    oil.name = "oil";
    oil.molar_volume = 1e-4;
    p.solvents.push_back(oil);
    auto phases = p.materials.phases();
    phases[0].chi_per_solvent["oil"] = 5.0;
    phases[1].chi_per_solvent["oil"] = 0.15;
    phases[2].chi_per_solvent["oil"] = 5.0;
    p.materials = MaterialTable(phases);
    p.load_cases.push_back({"oil", "oil", p.load_cases[0].bc});
    ConstraintSpec floor;
    floor.name = "floor";
    floor.kind = ConstraintKind::reaction_floor;
    floor.response = p.objective.response;
    floor.response.load_case = 1;
    floor.floor = -1e3;
    p.constraints.push_back(floor);

    Optimizer a(p);
    Optimizer b(std::move(p));
    b.set_evaluation_order({1, 0});
    const auto ea = a.evaluate(12, true);
    const auto eb = b.evaluate(12, true);
    EXPECT_EQ(ea.loss, eb.loss);
    EXPECT_EQ(ea.constraint_values, eb.constraint_values);
    EXPECT_EQ(ea.newton_iterations, eb.newton_iterations);
    EXPECT_EQ(ea.gradient, eb.gradient);
}
