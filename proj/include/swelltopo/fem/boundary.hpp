#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"
#include "swelltopo/fem/mesh.hpp"

namespace swelltopo {

struct DirichletCondition {
    std::string node_set;
    int component = 0; // 0 = x, 1 = y
    double value = 0;  // m, reached at alpha = 1
    bool operator==(const DirichletCondition&) const = default;
};

struct NeumannCondition {
    std::string edge_set;
    Vec2 traction = Vec2::Zero(); // Pa, reached at alpha = 1
    bool operator==(const NeumannCondition&) const = default;
};

struct BoundaryConditions {
    std::vector<DirichletCondition> dirichlet;
    std::vector<NeumannCondition> neumann;
    bool operator==(const BoundaryConditions&) const = default;
};

/// Split of the global dofs into prescribed and free sets.
struct DofMap {
    int num_dofs = 0;
    std::vector<int> free_index;  // global -> free slot, -1 when prescribed
    std::vector<int> free_dofs;   // free slot -> global
    std::vector<int> fixed_dofs;  // sorted global indices
    Eigen::VectorXd prescribed;   // full-length, value at alpha = 1 (zero on free dofs)

    int num_free() const { return static_cast<int>(free_dofs.size()); }
    bool is_fixed(int dof) const { return free_index[dof] < 0; }

    Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
        Eigen::VectorXd r(num_free());
        for (int i = 0; i < num_free(); ++i) r(i) = full(free_dofs[i]);
        return r;
    }
    Eigen::VectorXd expand(const Eigen::VectorXd& free) const {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(num_dofs);
        for (int i = 0; i < num_free(); ++i) full(free_dofs[i]) = free(i);
        return full;
    }
};

/// Every violation of the boundary-condition invariants against a mesh.
inline std::vector<std::string> boundary_violations(const QuadMesh& mesh, const BoundaryConditions& bc) {
    std::vector<std::string> v;
    std::map<int, double> fixed;
    for (const auto& d : bc.dirichlet) {
        if (d.component != 0 && d.component != 1)
            v.push_back("dirichlet on '" + d.node_set + "': component must be 0 (x) or 1 (y)");
        if (!std::isfinite(d.value)) v.push_back("dirichlet on '" + d.node_set + "': value must be finite");
        auto it = mesh.node_sets.find(d.node_set);
        if (it == mesh.node_sets.end()) {
            v.push_back("dirichlet references unknown node set '" + d.node_set + "'");
            continue;
        }
        if (it->second.empty()) v.push_back("dirichlet node set '" + d.node_set + "' is empty");
        if (d.component != 0 && d.component != 1) continue;
        for (int n : it->second) {
            const int dof = 2 * n + d.component;
            auto [pos, inserted] = fixed.emplace(dof, d.value);
            if (!inserted && pos->second != d.value) {
                v.push_back("dirichlet conditions prescribe conflicting values on dof " + std::to_string(dof));
                break;
            }
        }
    }
    for (const auto& nc : bc.neumann) {
        if (!nc.traction.allFinite()) v.push_back("neumann on '" + nc.edge_set + "': traction must be finite");
        auto it = mesh.edge_sets.find(nc.edge_set);
        if (it == mesh.edge_sets.end()) {
            v.push_back("neumann references unknown edge set '" + nc.edge_set + "'");
            continue;
        }
        if (it->second.empty()) v.push_back("neumann edge set '" + nc.edge_set + "' is empty");
        bool clash = false;
        for (const auto& e : it->second)
            for (int n : e)
                for (int c = 0; c < 2; ++c)
                    if (nc.traction(c) != 0.0 && fixed.count(2 * n + c)) clash = true;
        if (clash) v.push_back("neumann on '" + nc.edge_set + "' loads a dof that is also prescribed by dirichlet");
    }

    // Rigid-body modes: one x and one y constraint, plus a second constraint
    // at a point that is offset so it resists rotation.
    std::vector<Vec2> xs, ys;
    for (const auto& [dof, val] : fixed) (dof % 2 == 0 ? xs : ys).push_back(mesh.nodes[dof / 2]);
    bool rotation_fixed = false;
    const double tol = 1e-12 * std::max(1.0, mesh.min_edge_length());
    for (std::size_t i = 1; i < xs.size() && !rotation_fixed; ++i)
        if (std::abs(xs[i].y() - xs[0].y()) > tol) rotation_fixed = true;
    for (std::size_t i = 1; i < ys.size() && !rotation_fixed; ++i)
        if (std::abs(ys[i].x() - ys[0].x()) > tol) rotation_fixed = true;
    if (xs.empty() || ys.empty() || !rotation_fixed)
        v.push_back("dirichlet conditions do not remove all rigid-body modes");
    return v;
}

inline DofMap build_dof_map(const QuadMesh& mesh, const BoundaryConditions& bc) {
    if (auto v = boundary_violations(mesh, bc); !v.empty()) throw ConfigError(v);
    DofMap m;
    m.num_dofs = mesh.num_dofs();
    m.free_index.assign(m.num_dofs, 0);
    m.prescribed = Eigen::VectorXd::Zero(m.num_dofs);
    for (const auto& d : bc.dirichlet)
        for (int n : mesh.node_sets.at(d.node_set)) {
            const int dof = 2 * n + d.component;
            m.free_index[dof] = -1;
            m.prescribed(dof) = d.value;
        }
    for (int dof = 0; dof < m.num_dofs; ++dof) {
        if (m.free_index[dof] < 0) {
            m.fixed_dofs.push_back(dof);
        } else {
            m.free_index[dof] = static_cast<int>(m.free_dofs.size());
            m.free_dofs.push_back(dof);
        }
    }
    return m;
}

/// Consistent nodal forces of the Neumann data at alpha = 1 (uniform
/// traction per edge, integrated over the reference edge times thickness).
inline Eigen::VectorXd external_force(const QuadMesh& mesh, const BoundaryConditions& bc) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_dofs());
    for (const auto& nc : bc.neumann)
        for (const auto& e : mesh.edge_sets.at(nc.edge_set)) {
            const double len = (mesh.nodes[e[1]] - mesh.nodes[e[0]]).norm();
            for (int n : e)
                for (int c = 0; c < 2; ++c) f(2 * n + c) += 0.5 * len * mesh.thickness * nc.traction(c);
        }
    return f;
}

/// alpha_k = (k / N_s)^beta, k = 1..N_s.
struct LoadSchedule {
    int num_steps = 20;
    double exponent = 0.05;

    double alpha(int k) const {
        if (k >= num_steps) return 1.0;
        return std::pow(static_cast<double>(k) / num_steps, exponent);
    }
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (num_steps < 1) v.push_back("load schedule needs at least one step");
        if (!(exponent > 0) || !std::isfinite(exponent)) v.push_back("load schedule exponent must be positive");
        return v;
    }
    bool operator==(const LoadSchedule&) const = default;
};

struct NewtonSettings {
    double tolerance = 1e-6;      // relative to the load-step force scale
    double absolute_floor = 1e-10; // N
    int max_iterations = 30;
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 20;
    int max_cutbacks = 4; // load-step halvings allowed after a failed Newton solve

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(tolerance > 0)) v.push_back("newton tolerance must be positive");
        if (!(absolute_floor > 0)) v.push_back("newton absolute floor must be positive");
        if (max_iterations < 1) v.push_back("newton max iterations must be positive");
        if (!(armijo > 0 && armijo < 0.5)) v.push_back("armijo constant must lie in (0, 0.5)");
        if (!(backtrack > 0 && backtrack < 1)) v.push_back("backtrack factor must lie in (0, 1)");
        if (max_backtracks < 1) v.push_back("max backtracks must be positive");
        if (max_cutbacks < 0) v.push_back("max cutbacks must be non-negative");
        return v;
    }
    bool operator==(const NewtonSettings&) const = default;
};

} // namespace swelltopo
