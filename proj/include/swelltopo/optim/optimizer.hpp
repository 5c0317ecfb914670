#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/adjoint/adjoint.hpp"
#include "swelltopo/adjoint/design_field.hpp"
#include "swelltopo/error.hpp"
#include "swelltopo/fem/assembly.hpp"
#include "swelltopo/fem/boundary.hpp"
#include "swelltopo/fem/solver.hpp"
#include "swelltopo/material/properties.hpp"
#include "swelltopo/neural/network.hpp"
#include "swelltopo/optim/adam.hpp"
#include "swelltopo/optim/continuation.hpp"
#include "swelltopo/optim/objectives.hpp"
#include "swelltopo/optim/projection.hpp"

namespace swelltopo {

/// One forward analysis per iteration: a solvent bath and its supports and loads.
struct LoadCase {
    std::string name;
    std::string solvent;
    BoundaryConditions bc;
};

enum class ResponseKind { shape, blocked_force };

/// A scalar read off one load case's converged state.
///
/// Blocked force is the force the structure exerts on a held port along
/// `direction` (+1 or -1) of axis `component`. The port reacts with f_int, so
/// the selector is l = -direction on the port dofs and J = l^T f_int.
struct ResponseSpec {
    ResponseKind kind = ResponseKind::blocked_force;
    int load_case = 0;
    std::string node_set;
    int component = 0;
    double direction = -1.0;
    ShapeTarget target;
};

struct ObjectiveSpec {
    ResponseSpec response;
    bool maximize = true;
};

enum class ConstraintKind { volume, grayness, reaction_floor };

struct ConstraintSpec {
    std::string name;
    ConstraintKind kind = ConstraintKind::volume;
    std::vector<int> phases; // volume: phase indices summed into rho_m
    double bound = 0.5;      // volume: V*
    ResponseSpec response;   // reaction_floor: a blocked-force response
    double floor = 0.0;      // reaction_floor: N, g = floor - F
};

struct OptimizationProblem {
    QuadMesh mesh;
    MaterialTable materials;
    std::vector<SolventEnvironment> solvents;
    std::vector<LoadCase> load_cases;
    ObjectiveSpec objective;
    std::vector<ConstraintSpec> constraints;

    double q = 1.0; // chi exponent; the G exponent follows the continuation schedule
    ContinuationSettings continuation;
    ProjectionSettings projection;
    AdamSettings adam;
    StopSettings stop;

    NetworkConfig network;
    RowMatrix fixed_rho;      // layout when the network has no density head
    double fixed_theta = 0.0; // angle when the network has no angle head

    LoadSchedule schedule;
    NewtonSettings newton;
    BisectionSettings bisection;
    double objective_floor = 1e-8; // J0 >= objective_floor * (force or length^2 scale)

    const SolventEnvironment& solvent(const std::string& name) const {
        for (const auto& s : solvents)
            if (s.name == name) return s;
        throw ConfigError("unknown solvent '" + name + "'");
    }

    std::vector<std::string> violations() const;
};

inline std::vector<std::string> OptimizationProblem::violations() const {
    std::vector<std::string> v = mesh.violations();
    auto add = [&](std::vector<std::string> more) { v.insert(v.end(), more.begin(), more.end()); };
    add(materials.violations());
    if (solvents.empty()) v.push_back("at least one solvent is required");
    for (const auto& s : solvents) add(s.violations());
    if (load_cases.empty()) v.push_back("at least one load case is required");
    for (const auto& lc : load_cases) {
        bool known = false;
        for (const auto& s : solvents) known |= s.name == lc.solvent;
        if (!known) {
            v.push_back("load case '" + lc.name + "' references unknown solvent '" + lc.solvent + "'");
            continue;
        }
        for (std::size_t i = 0; i < materials.size(); ++i)
            if (!materials.phase(i).chi_per_solvent.contains(lc.solvent))
                v.push_back("phase '" + materials.phase(i).name + "' has no chi for solvent '" + lc.solvent + "'");
        for (auto& s : boundary_violations(mesh, lc.bc)) v.push_back("load case '" + lc.name + "': " + s);
    }
    auto check_response = [&](const ResponseSpec& r, const std::string& what) {
        if (r.load_case < 0 || r.load_case >= static_cast<int>(load_cases.size())) {
            v.push_back(what + " refers to a missing load case");
            return;
        }
        if (r.kind == ResponseKind::blocked_force) {
            auto it = mesh.node_sets.find(r.node_set);
            if (it == mesh.node_sets.end()) {
                v.push_back(what + " refers to unknown node set '" + r.node_set + "'");
                return;
            }
            if (r.component < 0 || r.component > 1) v.push_back(what + " component must be 0 (x) or 1 (y)");
            if (std::abs(r.direction) != 1.0) v.push_back(what + " direction must be +1 or -1");
            const DofMap dm = build_dof_map(mesh, load_cases[r.load_case].bc);
            for (int n : it->second)
                if (!dm.is_fixed(2 * n + r.component)) {
                    v.push_back(what + ": output dofs must be held fixed in load case '" +
                                load_cases[r.load_case].name + "'");
                    break;
                }
        } else {
            add(r.target.violations());
        }
    };
    check_response(objective.response, "objective");
    for (const auto& c : constraints) {
        if (c.kind == ConstraintKind::volume) {
            if (c.phases.empty()) v.push_back("volume constraint '" + c.name + "' has an empty phase set");
            for (int m : c.phases)
                if (m < 0 || m >= static_cast<int>(materials.size()))
                    v.push_back("volume constraint '" + c.name + "' names a phase outside the table");
            if (!(c.bound > 0 && c.bound <= 1)) v.push_back("volume bound of '" + c.name + "' must lie in (0, 1]");
        } else if (c.kind == ConstraintKind::reaction_floor) {
            check_response(c.response, "constraint '" + c.name + "'");
            if (c.response.kind != ResponseKind::blocked_force)
                v.push_back("reaction floor '" + c.name + "' needs a blocked-force response");
        }
    }
    add(continuation.violations());
    add(projection.violations());
    add(adam.violations());
    add(stop.violations());
    add(schedule.violations());
    add(newton.violations());
    if (!(q >= 1)) v.push_back("chi exponent q must be at least 1");
    if (network.num_phases != 0 && network.num_phases != static_cast<int>(materials.size()))
        v.push_back("network density head must have one output per material phase");
    if (network.num_phases == 0 &&
        (fixed_rho.rows() != mesh.num_elements() || fixed_rho.cols() != static_cast<Eigen::Index>(materials.size())))
        v.push_back("a network without a density head needs a fixed layout covering every element and phase");
    add(network.violations());
    if (!(objective_floor > 0)) v.push_back("objective floor must be positive");
    return v;
}

/// Everything computed at one design iterate.
struct Evaluation {
    int iteration = 0;
    double p = 1, xi = 0, tau = 0, beta = 0;
    double loss = 0;
    double objective_raw = 0; // J_raw: MSE in m^2 or blocked force in N
    double objective_term = 0; // J / J0
    double J0 = 1;
    std::vector<double> constraint_values;
    std::vector<double> constraint_raw;
    std::vector<double> barrier_terms;
    double grayness = 0;
    std::vector<int> newton_iterations; // per load case, summed over load steps
    std::vector<SolveState> states;
    std::vector<ElementDesign> designs;
    DesignSample sample;
    std::vector<double> gradient;
    double gradient_norm = 0;
    double adjoint_certificate = 0; // worst over load cases
    double seconds = 0;
};

struct OptimizationResult {
    int iterations = 0;
    bool stopped_on_loss_change = false;
    bool feasible = false; // raw grayness <= 0.05 and volume g <= 1e-3 at the last iterate
    std::vector<double> losses;
};

class Optimizer {
public:
    explicit Optimizer(OptimizationProblem problem)
        : prob_(std::move(problem)) {
        if (auto v = prob_.violations(); !v.empty()) throw ConfigError(v);
        prob_.network.normalization = prob_.mesh.bounding_box();
        assembler_ = std::make_unique<Assembler>(prob_.mesh);
        sampler_ = std::make_unique<DesignSampler>(prob_.mesh);
        net_ = DesignNetwork(prob_.network);
        volumes_ = element_volumes(prob_.mesh);
        for (const auto& lc : prob_.load_cases) columns_.push_back(prob_.materials.columns(lc.solvent));
        auto make_shape = [&](const ResponseSpec& r) -> std::shared_ptr<ShapeObjective> {
            if (r.kind != ResponseKind::shape) return nullptr;
            return std::make_shared<ShapeObjective>(prob_.mesh, r.target);
        };
        objective_shape_ = make_shape(prob_.objective.response);
        order_.resize(prob_.load_cases.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    }

    // The assembler keeps a pointer into prob_.mesh.
    Optimizer(const Optimizer&) = delete;
    Optimizer& operator=(const Optimizer&) = delete;

    const OptimizationProblem& problem() const { return prob_; }
    const Assembler& assembler() const { return *assembler_; }
    const DesignSampler& sampler() const { return *sampler_; }
    DesignNetwork& network() { return net_; }
    const DesignNetwork& network() const { return net_; }
    const AdamState& adam_state() const { return adam_; }

    std::optional<double> J0() const { return J0_; }
    void set_J0(double j0) { J0_ = j0; }

    /// Order in which load cases are solved. Results are merged by index, so
    /// any permutation gives identical values.
    void set_evaluation_order(std::vector<int> order) { order_ = std::move(order); }

    /// Scale for the J0 floor: N for forces, m^2 for shape errors.
    double objective_scale() const {
        const Box b = prob_.mesh.bounding_box();
        if (prob_.objective.response.kind == ResponseKind::shape) {
            const double d = std::hypot(b.xmax - b.xmin, b.ymax - b.ymin);
            return d * d;
        }
        return prob_.materials.max_shear_modulus() * prob_.mesh.thickness * (b.ymax - b.ymin);
    }

    SamplingOptions sampling_options(int iteration) const {
        SamplingOptions o;
        o.project = prob_.projection.enabled;
        o.beta = prob_.projection.beta_at(iteration);
        o.eta = prob_.projection.eta;
        o.fixed_rho = prob_.fixed_rho;
        o.fixed_theta = prob_.fixed_theta;
        return o;
    }

    /// Forward solve of one load case; on nonconvergence it is retried once
    /// from zero with twice the load steps.
    SolveState solve_load_case(const ForwardProblem& fp) const {
        try {
            return fp.load_stepping_solve(prob_.schedule);
        } catch (const NonconvergenceError&) {
            LoadSchedule doubled = prob_.schedule;
            doubled.num_steps *= 2;
            return fp.load_stepping_solve(doubled);
        }
    }

    /// Loss (and gradient) at weights w and continuation iteration k. J0 is
    /// recorded on the first call unless it was set explicitly.
    Evaluation evaluate(const std::vector<double>& w, int k, bool with_gradient) {
        const auto t0 = std::chrono::steady_clock::now();
        DesignNetwork net(net_.config(), net_.frequencies(), w);
        Evaluation ev;
        ev.iteration = k;
        ev.p = prob_.continuation.p_at(k);
        ev.xi = prob_.continuation.xi_at(k);
        ev.tau = prob_.continuation.tau_at(k);
        ev.beta = prob_.projection.enabled ? prob_.projection.beta_at(k) : 0.0;
        ev.sample = sampler_->sample(net, sampling_options(k));
        const InterpolationParams ip{ev.p, prob_.q};

        const std::size_t nc = prob_.load_cases.size();
        std::vector<std::unique_ptr<ForwardProblem>> fps(nc);
        ev.states.resize(nc);
        ev.designs.resize(nc);
        ev.newton_iterations.assign(nc, 0);
        for (int c : order_) {
            const auto& lc = prob_.load_cases[c];
            ev.designs[c] = element_design(ev.sample, columns_[c], ip);
            fps[c] = std::make_unique<ForwardProblem>(*assembler_, lc.bc, ev.designs[c], prob_.solvent(lc.solvent),
                                                      prob_.newton, prob_.bisection);
            ev.states[c] = solve_load_case(*fps[c]);
            for (const auto& h : ev.states[c].residual_history) ev.newton_iterations[c] += static_cast<int>(h.size()) - 1;
        }

        // Objective.
        const auto& obj = prob_.objective.response;
        ev.objective_raw = response_value(obj, *fps[obj.load_case], ev.states[obj.load_case], objective_shape_.get());
        if (!J0_) J0_ = std::max(std::abs(ev.objective_raw), prob_.objective_floor * objective_scale());
        ev.J0 = *J0_;
        const double sign = prob_.objective.maximize ? -1.0 : 1.0;
        ev.objective_term = sign * ev.objective_raw / ev.J0;

        // Constraints.
        ev.grayness = grayness(ev.sample.rho);
        std::vector<DensityConstraint> density(prob_.constraints.size());
        for (std::size_t i = 0; i < prob_.constraints.size(); ++i) {
            const auto& c = prob_.constraints[i];
            double g = 0, raw = 0;
            if (c.kind == ConstraintKind::volume) {
                density[i] = constraint_volume(ev.sample.rho, volumes_, c.phases, c.bound);
                g = density[i].value;
                raw = density[i].raw;
            } else if (c.kind == ConstraintKind::grayness) {
                density[i] = constraint_grayness(ev.sample.rho, ev.xi);
                g = density[i].value;
                raw = density[i].raw;
            } else {
                raw = response_value(c.response, *fps[c.response.load_case], ev.states[c.response.load_case], nullptr);
                g = c.floor - raw;
            }
            ev.constraint_values.push_back(g);
            ev.constraint_raw.push_back(raw);
            ev.barrier_terms.push_back(barrier(g, ev.tau));
        }
        ev.loss = ev.objective_term;
        for (double b : ev.barrier_terms) ev.loss += b;

        if (with_gradient) {
            const auto n = static_cast<Eigen::Index>(prob_.mesh.num_elements());
            RowMatrix d_rho = RowMatrix::Zero(n, static_cast<Eigen::Index>(prob_.materials.size()));
            std::vector<GaussArray> d_theta(n, GaussArray{});
            for (std::size_t i = 0; i < prob_.constraints.size(); ++i)
                if (prob_.constraints[i].kind != ConstraintKind::reaction_floor)
                    d_rho += barrier_derivative(ev.constraint_values[i], ev.tau) * density[i].d_rho;

            // Weight of each state-dependent response in dL/d(response), grouped per load case.
            std::vector<DesignCotangent> cots(nc);
            for (int c : order_) {
                std::vector<std::pair<const ResponseSpec*, double>> parts;
                if (obj.load_case == c) parts.emplace_back(&obj, sign / ev.J0);
                for (std::size_t i = 0; i < prob_.constraints.size(); ++i) {
                    const auto& con = prob_.constraints[i];
                    if (con.kind == ConstraintKind::reaction_floor && con.response.load_case == c)
                        parts.emplace_back(&con.response, -barrier_derivative(ev.constraint_values[i], ev.tau));
                }
                if (parts.empty()) continue;
                double cert = 0;
                cots[c] = response_cotangent(*fps[c], ev.states[c], parts, cert);
                ev.adjoint_certificate = std::max(ev.adjoint_certificate, cert);
            }
            for (std::size_t c = 0; c < nc; ++c)
                if (!cots[c].shear_modulus.empty())
                    accumulate_property_cotangent(ev.sample, columns_[c], ip, cots[c], 1.0, d_rho, d_theta);
            ev.gradient = sampler_->pullback(net, ev.sample, d_rho, d_theta);
            double n2 = 0;
            for (double g : ev.gradient) n2 += g * g;
            ev.gradient_norm = std::sqrt(n2);
        }
        ev.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return ev;
    }

    Evaluation evaluate(int k, bool with_gradient) { return evaluate(net_.params(), k, with_gradient); }

    /// The outer loop: evaluate, report, stop check, Adam update. The last
    /// evaluated design is kept (no update after the final evaluation).
    OptimizationResult run(const std::function<void(const Evaluation&)>& on_iteration = {}) {
        OptimizationResult res;
        for (int k = 0; k < prob_.stop.max_iterations; ++k) {
            Evaluation ev = evaluate(k, true);
            res.losses.push_back(ev.loss);
            res.iterations = k + 1;
            res.feasible = ev.grayness <= 0.05;
            for (std::size_t i = 0; i < prob_.constraints.size(); ++i)
                if (prob_.constraints[i].kind == ConstraintKind::volume && ev.constraint_values[i] > 1e-3)
                    res.feasible = false;
            if (on_iteration) on_iteration(ev);
            const bool settled = prob_.continuation.settled(k) &&
                                 (!prob_.projection.enabled || prob_.projection.beta_at(k) >= prob_.projection.beta_max);
            const double dl = loss_change(res.losses, prob_.stop.window);
            if (settled && dl >= 0 && dl <= prob_.stop.delta_loss) {
                res.stopped_on_loss_change = true;
                break;
            }
            if (k + 1 == prob_.stop.max_iterations) break;
            adam_step(net_.params(), ev.gradient, adam_, prob_.adam);
        }
        return res;
    }

    DofSelector response_selector(const ResponseSpec& r) const {
        DofSelector s;
        for (int nd : prob_.mesh.node_sets.at(r.node_set)) s.emplace_back(2 * nd + r.component, -r.direction);
        return s;
    }

private:
    double response_value(const ResponseSpec& r, const ForwardProblem& fp, const SolveState& st,
                          const ShapeObjective* shape) const {
        if (r.kind == ResponseKind::shape) {
            if (shape) return shape->evaluate(st.u).value;
            return ShapeObjective(prob_.mesh, r.target).evaluate(st.u).value;
        }
        return fp.reaction_force(st, response_selector(r));
    }

    /// Design cotangent of sum_i weight_i * response_i through one adjoint solve.
    DesignCotangent response_cotangent(const ForwardProblem& fp, const SolveState& st,
                                       const std::vector<std::pair<const ResponseSpec*, double>>& parts,
                                       double& certificate) const {
        const int nd = prob_.mesh.num_dofs();
        Eigen::VectorXd dJ_du = Eigen::VectorXd::Zero(nd), l = Eigen::VectorXd::Zero(nd);
        bool blocked = false;
        for (const auto& [r, w] : parts) {
            if (r->kind == ResponseKind::shape) {
                const auto* shape = r == &prob_.objective.response ? objective_shape_.get() : nullptr;
                const auto sg = shape ? shape->evaluate(st.u) : ShapeObjective(prob_.mesh, r->target).evaluate(st.u);
                dJ_du += w * sg.gradient;
            } else {
                for (const auto& [dof, lw] : response_selector(*r)) l(dof) += w * lw;
                blocked = true;
            }
        }
        if (blocked) {
            const Assembly a = fp.assemble(st.u, st.mu, true, false);
            if (!a.ok) throw AdjointError("tangent at the converged state could not be assembled: " + a.failure);
            dJ_du += a.K * l;
        }
        const StateElimination se = eliminate_state(fp, st, dJ_du, l);
        certificate = se.adjoint.certificate;
        return design_cotangent(fp, st, se.v);
    }

    OptimizationProblem prob_;
    std::unique_ptr<Assembler> assembler_;
    std::unique_ptr<DesignSampler> sampler_;
    DesignNetwork net_;
    Eigen::VectorXd volumes_;
    std::vector<PhaseColumns> columns_;
    std::shared_ptr<ShapeObjective> objective_shape_;
    std::vector<int> order_;
    std::optional<double> J0_;
    AdamState adam_;
};

} // namespace swelltopo
