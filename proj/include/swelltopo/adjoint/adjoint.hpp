#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/solver.hpp"

namespace swelltopo {

/// Relative residual every adjoint solve must certify.
inline constexpr double kAdjointCertificate = 1e-10;

struct AdjointSolution {
    Eigen::VectorXd lambda;   // free dofs
    double certificate = 0;   // ||K^T lambda - rhs|| / ||rhs||, zero for a zero right-hand side
    int refinements = 0;
};

/// Solves K^T lambda = rhs on the free dofs with the factorization kept from
/// the final Newton step. K is symmetric, so this is the forward solve with a
/// different right-hand side. A few steps of iterative refinement are taken
/// when the first solve misses the certificate.
inline AdjointSolution adjoint_solve(const TangentFactorization& fac, const Eigen::VectorXd& rhs,
                                     double limit = kAdjointCertificate, int max_refinements = 3) {
    if (fac.ldlt.info() != Eigen::Success) throw AdjointError("tangent factorization is not available");
    if (rhs.size() != fac.K.rows()) throw ContractError("adjoint right-hand side has the wrong length");
    if (!rhs.allFinite()) throw AdjointError("adjoint right-hand side is not finite");
    AdjointSolution sol;
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) {
        sol.lambda = Eigen::VectorXd::Zero(rhs.size());
        return sol;
    }
    sol.lambda = fac.ldlt.solve(rhs);
    Eigen::VectorXd r = rhs - fac.K.transpose() * sol.lambda;
    sol.certificate = r.norm() / bnorm;
    while (!(sol.certificate < limit) && sol.refinements < max_refinements) {
        sol.lambda += fac.ldlt.solve(r);
        r = rhs - fac.K.transpose() * sol.lambda;
        sol.certificate = r.norm() / bnorm;
        ++sol.refinements;
    }
    if (!sol.lambda.allFinite() || !(sol.certificate < limit))
        throw AdjointError("adjoint solve failed its residual certificate (" + std::to_string(sol.certificate) + ")");
    return sol;
}

/// d(l^T f_int)/du on all dofs at the converged state, i.e. K_full l.
inline Eigen::VectorXd blocked_force_state_gradient(const ForwardProblem& prob, const SolveState& st,
                                                    const DofSelector& selector) {
    const Assembly a = prob.assemble(st.u, st.mu, true, false);
    if (!a.ok) throw AdjointError("tangent at the converged state could not be assembled: " + a.failure);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(prob.mesh().num_dofs());
    for (const auto& [dof, w] : selector) l(dof) += w;
    return a.K * l;
}

/// Eliminates the state from a scalar response J(u*, d). Given dJ/du on all
/// dofs and the explicit part written as v_explicit . d f_int / d(design),
/// returns v with dJ/d(design) = v . d f_int / d(design) (total derivative):
/// v = v_explicit - E lambda, K lambda = (dJ/du)_free.
struct StateElimination {
    Eigen::VectorXd v;
    AdjointSolution adjoint;
};

inline StateElimination eliminate_state(const ForwardProblem& prob, const SolveState& st,
                                        const Eigen::VectorXd& dJ_du, const Eigen::VectorXd& v_explicit) {
    if (!st.factorization) throw AdjointError("solve state carries no tangent factorization");
    const auto& dofs = prob.dofs();
    StateElimination out;
    out.adjoint = adjoint_solve(*st.factorization, dofs.restrict(dJ_du));
    out.v = v_explicit.size() ? v_explicit : Eigen::VectorXd::Zero(dofs.num_dofs);
    for (int i = 0; i < dofs.num_free(); ++i) out.v(dofs.free_dofs[i]) -= out.adjoint.lambda(i);
    return out;
}

/// Design cotangent of the response at the converged state.
inline DesignCotangent design_cotangent(const ForwardProblem& prob, const SolveState& st, const Eigen::VectorXd& v) {
    try {
        return prob.assembler().design_vjp(st.u, prob.design(), st.mu, prob.environment(), v, prob.bisection());
    } catch (const InvertedElementError& e) {
        throw AdjointError(std::string("design partials failed: ") + e.what());
    } catch (const BracketError& e) {
        throw AdjointError(std::string("design partials failed: ") + e.what());
    }
}

} // namespace swelltopo
