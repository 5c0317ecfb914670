#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/assembly.hpp"
#include "swelltopo/fem/boundary.hpp"
#include "swelltopo/fem/mesh.hpp"
#include "swelltopo/material/properties.hpp"

namespace swelltopo {

/// Factorized free-free tangent at a converged state, kept for adjoint solves.
struct TangentFactorization {
    Eigen::SparseMatrix<double> K;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

struct NewtonResult {
    Eigen::VectorXd u;
    Assembly assembly; // at u, with tangent on the free dofs
    int iterations = 0;
    std::vector<double> residual_history;
    double tolerance = 0;
};

struct SolveState {
    Eigen::VectorXd u;
    std::vector<GaussArray> phi_gp;
    bool converged = false;
    std::vector<std::vector<double>> residual_history; // per load step
    std::vector<double> tolerance;                      // per load step
    std::vector<double> alpha_history;                  // per load step, including cutback substeps
    Eigen::VectorXd f_int;                              // at u
    double mu = 0;
    double alpha = 0;
    std::shared_ptr<const TangentFactorization> factorization;
};

/// Dof selector for reaction forces: (global dof, weight) pairs.
using DofSelector = std::vector<std::pair<int, double>>;

/// One load case on one mesh with fixed design fields.
class ForwardProblem {
public:
    ForwardProblem(const Assembler& assembler, BoundaryConditions bc, ElementDesign design, SolventEnvironment env,
                   NewtonSettings newton = {}, BisectionSettings bisection = {})
        : assembler_(&assembler),
          bc_(std::move(bc)),
          design_(std::move(design)),
          env_(std::move(env)),
          newton_(newton),
          bisection_(bisection) {
        std::vector<std::string> v = design_.violations(assembler.mesh().num_elements());
        for (auto& s : newton_.violations()) v.push_back(s);
        for (auto& s : env_.violations()) v.push_back(s);
        for (auto& s : boundary_violations(assembler.mesh(), bc_)) v.push_back(s);
        if (!v.empty()) throw ConfigError(v);
        dofs_ = build_dof_map(assembler.mesh(), bc_);
        f_ext_ = external_force(assembler.mesh(), bc_);
    }

    const QuadMesh& mesh() const { return assembler_->mesh(); }
    const Assembler& assembler() const { return *assembler_; }
    const DofMap& dofs() const { return dofs_; }
    const ElementDesign& design() const { return design_; }
    const SolventEnvironment& environment() const { return env_; }
    const BoundaryConditions& boundary() const { return bc_; }
    const NewtonSettings& newton_settings() const { return newton_; }
    const BisectionSettings& bisection() const { return bisection_; }
    const Eigen::VectorXd& external_force_full() const { return f_ext_; }

    double mu_at(double alpha) const { return (1.0 - alpha) * env_.mu_dry + alpha * env_.mu_wet; }

    /// R = f_int - alpha f_ext on the full dof vector.
    Assembly assemble(const Eigen::VectorXd& u, double mu, bool with_tangent, bool reduced = true) const {
        return assembler_->assemble(u, design_, mu, env_, with_tangent, reduced ? &dofs_ : nullptr, bisection_);
    }

    /// Damped Newton at a fixed load level. The Dirichlet values of u0 are
    /// overwritten with alpha * prescribed. Converged means ||R_free|| <= tol
    /// after at least one update.
    ///
    /// The residual is the gradient of the potential energy, so steps are
    /// backtracked until the potential satisfies Armijo decrease. A full step
    /// is also accepted when it satisfies Armijo decrease of ||R||^2, which
    /// keeps quadratic convergence once energy differences reach roundoff.
    /// A tangent with non-positive pivots is shifted on its diagonal until it
    /// factorizes as positive definite.
    NewtonResult newton_solve(Eigen::VectorXd u0, double mu, double alpha, double tol, int load_step = 1) const {
        using SpMat = Eigen::SparseMatrix<double>;
        for (int dof : dofs_.fixed_dofs) u0(dof) = alpha * dofs_.prescribed(dof);
        const Eigen::VectorXd fext = alpha * f_ext_;
        NewtonResult res;
        res.tolerance = tol;
        res.u = std::move(u0);
        res.assembly = assemble(res.u, mu, true);
        auto fail = [&](const std::string& why) {
            std::vector<double> last(res.u.data(), res.u.data() + res.u.size());
            throw NonconvergenceError("load step " + std::to_string(load_step) + ": " + why, load_step, std::move(last),
                                      res.residual_history);
        };
        if (!res.assembly.ok) fail("initial iterate is not admissible (" + res.assembly.failure + ")");
        auto potential = [&](const Eigen::VectorXd& u, const Assembly& a) { return a.energy - fext.dot(u); };
        Eigen::VectorXd r = dofs_.restrict(res.assembly.f_int - fext);
        double rnorm = r.norm();
        res.residual_history.push_back(rnorm);

        while (res.iterations == 0 || rnorm > tol) {
            if (res.iterations >= newton_.max_iterations) fail("Newton iteration limit reached");
            Eigen::SimplicialLDLT<SpMat> ldlt(res.assembly.K);
            auto definite = [&] { return ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all(); };
            if (!definite()) {
                double shift = 1e-3 * res.assembly.K.diagonal().cwiseAbs().maxCoeff();
                for (int k = 0; k < 40 && !definite(); ++k, shift *= 4.0) {
                    SpMat Ks = res.assembly.K;
                    for (int i = 0; i < Ks.rows(); ++i) Ks.coeffRef(i, i) += shift;
                    ldlt.compute(Ks);
                }
                if (!definite()) fail("tangent could not be made positive definite");
            }
            const Eigen::VectorXd delta = ldlt.solve(-r);
            if (!delta.allFinite()) fail("tangent solve produced a non-finite step");

            const double slope = r.dot(delta);
            const double pi0 = potential(res.u, res.assembly);
            bool accepted = false;
            double step = 1.0;
            Eigen::VectorXd trial_u, trial_r;
            Assembly trial;
            double trial_norm = 0;
            for (int b = 0; b <= newton_.max_backtracks; ++b, step *= newton_.backtrack) {
                trial_u = res.u;
                for (int i = 0; i < dofs_.num_free(); ++i) trial_u(dofs_.free_dofs[i]) += step * delta(i);
                trial = assemble(trial_u, mu, true);
                if (!trial.ok) continue;
                trial_r = dofs_.restrict(trial.f_int - fext);
                trial_norm = trial_r.norm();
                const bool energy_ok = potential(trial_u, trial) <= pi0 + newton_.armijo * step * slope;
                const bool residual_ok =
                    b == 0 && trial_norm * trial_norm <= (1.0 - 2.0 * newton_.armijo) * rnorm * rnorm;
                if (energy_ok || residual_ok || trial_norm <= tol) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) fail("line search exhausted its backtracks");
            res.u = std::move(trial_u);
            res.assembly = std::move(trial);
            r = std::move(trial_r);
            rnorm = trial_norm;
            res.residual_history.push_back(rnorm);
            ++res.iterations;
        }
        return res;
    }

    /// Incremental solve over the load schedule, warm-starting each step.
    /// The Newton tolerance is relative to the largest initial residual seen
    /// so far (the step-1 value on the first step), floored absolutely. A
    /// step whose Newton solve fails is split in half, up to max_cutbacks
    /// times, before the failure propagates.
    SolveState load_stepping_solve(const LoadSchedule& schedule, Eigen::VectorXd u_start = {}) const {
        if (auto v = schedule.violations(); !v.empty()) throw ConfigError(v);
        SolveState st;
        st.u = u_start.size() ? std::move(u_start) : Eigen::VectorXd::Zero(mesh().num_dofs());
        double scale = 0;
        NewtonResult last;
        double alpha_prev = 0;
        for (int k = 1; k <= schedule.num_steps; ++k) {
            const double alpha_k = schedule.alpha(k);
            std::vector<double> targets{alpha_k};
            int depth = 0;
            while (!targets.empty()) {
                const double alpha = targets.back();
                const double mu = mu_at(alpha);
                Eigen::VectorXd u0 = st.u;
                for (int dof : dofs_.fixed_dofs) u0(dof) = alpha * dofs_.prescribed(dof);
                const Assembly a0 = assemble(u0, mu, false);
                if (a0.ok) scale = std::max(scale, dofs_.restrict(a0.f_int - alpha * f_ext_).norm());
                const double tol = std::max(newton_.tolerance * scale, newton_.absolute_floor);
                try {
                    last = newton_solve(std::move(u0), mu, alpha, tol, k);
                } catch (const NonconvergenceError&) {
                    if (depth >= newton_.max_cutbacks) throw;
                    ++depth;
                    targets.push_back(0.5 * (alpha_prev + alpha));
                    continue;
                }
                targets.pop_back();
                alpha_prev = alpha;
                st.u = last.u;
                st.residual_history.push_back(last.residual_history);
                st.tolerance.push_back(tol);
                st.alpha_history.push_back(alpha);
                st.mu = mu;
                st.alpha = alpha;
            }
        }
        st.converged = true;
        st.phi_gp = last.assembly.phi_gp;
        st.f_int = last.assembly.f_int;
        auto fac = std::make_shared<TangentFactorization>();
        fac->K = last.assembly.K;
        fac->ldlt.compute(fac->K);
        if (fac->ldlt.info() != Eigen::Success) throw AdjointError("final tangent could not be factorized");
        st.factorization = std::move(fac);
        return st;
    }

    /// l^T f_int(u*) for a selector on prescribed dofs.
    double reaction_force(const SolveState& st, const DofSelector& selector) const {
        double r = 0;
        for (const auto& [dof, w] : selector) {
            if (dof < 0 || dof >= dofs_.num_dofs) throw ContractError("reaction selector dof out of range");
            if (!dofs_.is_fixed(dof)) throw ContractError("reaction selector touches free dof " + std::to_string(dof));
            r += w * st.f_int(dof);
        }
        return r;
    }

    /// Selector over every dof of a node set in one component.
    DofSelector selector(const std::string& node_set, int component, double weight = 1.0) const {
        auto it = mesh().node_sets.find(node_set);
        if (it == mesh().node_sets.end()) throw ContractError("unknown node set '" + node_set + "'");
        DofSelector s;
        for (int n : it->second) s.emplace_back(2 * n + component, weight);
        return s;
    }

private:
    const Assembler* assembler_;
    BoundaryConditions bc_;
    ElementDesign design_;
    SolventEnvironment env_;
    NewtonSettings newton_;
    BisectionSettings bisection_;
    DofMap dofs_;
    Eigen::VectorXd f_ext_;
};

} // namespace swelltopo
