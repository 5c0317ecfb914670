#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "swelltopo/adjoint/fd_check.hpp"
#include "swelltopo/cli/config.hpp"
#include "swelltopo/fem/vtk.hpp"
#include "swelltopo/neural/snapshot.hpp"
#include "swelltopo/optim/history.hpp"

namespace swelltopo {

namespace fs = std::filesystem;

inline fs::path output_root() {
    if (const char* env = std::getenv("SWELLTOPO_OUTPUT_ROOT"); env && *env) return env;
    return "out";
}

/// Raster of the design field over the domain box at cell centres, row 0 at
/// the bottom. rho holds one column per phase (empty without a density head).
struct DesignRaster {
    int nx = 0, ny = 0;
    RowMatrix points;
    RowMatrix rho;
    Eigen::VectorXd theta;
};

inline DesignRaster resample_design(const DesignNetwork& net, int nx, int ny) {
    if (nx < 1 || ny < 1) throw ConfigError("resample resolution must be positive, got " + std::to_string(nx) + "x" +
                                            std::to_string(ny));
    const Box b = net.config().normalization;
    DesignRaster r;
    r.nx = nx;
    r.ny = ny;
    r.points.resize(static_cast<Eigen::Index>(nx) * ny, 2);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Eigen::Index k = static_cast<Eigen::Index>(j) * nx + i;
            r.points(k, 0) = b.xmin + (b.xmax - b.xmin) * (i + 0.5) / nx;
            r.points(k, 1) = b.ymin + (b.ymax - b.ymin) * (j + 0.5) / ny;
        }
    const auto s = net.evaluate(r.points);
    if (net.config().num_phases > 0) r.rho = s.rho;
    if (net.config().angle_head) r.theta = s.theta;
    return r;
}

inline std::string raster_csv(const DesignRaster& r, const std::vector<std::string>& phase_names) {
    std::ostringstream os;
    os << "x_m,y_m";
    for (Eigen::Index m = 0; m < r.rho.cols(); ++m)
        os << ",rho_" << (static_cast<std::size_t>(m) < phase_names.size() ? phase_names[m] : std::to_string(m));
    if (r.theta.size() > 0) os << ",theta_rad";
    os << '\n';
    for (Eigen::Index k = 0; k < r.points.rows(); ++k) {
        os << format_double(r.points(k, 0)) << ',' << format_double(r.points(k, 1));
        for (Eigen::Index m = 0; m < r.rho.cols(); ++m) os << ',' << format_double(r.rho(k, m));
        if (r.theta.size() > 0) os << ',' << format_double(r.theta(k));
        os << '\n';
    }
    return os.str();
}

/// Plain PGM (P2) of one column, top row first, 0 = empty and 255 = full.
/// Angles are mapped from [0, pi) onto the grey range.
inline std::string raster_pgm(const DesignRaster& r, const Eigen::VectorXd& values, double scale) {
    std::ostringstream os;
    os << "P2\n" << r.nx << ' ' << r.ny << "\n255\n";
    for (int j = r.ny - 1; j >= 0; --j) {
        for (int i = 0; i < r.nx; ++i) {
            const double v = std::clamp(values(static_cast<Eigen::Index>(j) * r.nx + i) / scale, 0.0, 1.0);
            os << (i ? " " : "") << static_cast<int>(std::lround(255.0 * v));
        }
        os << '\n';
    }
    return os.str();
}

/// Writes design.csv and one PGM per phase (plus theta.pgm) into dir.
inline void write_raster(const fs::path& dir, const DesignRaster& r, const std::vector<std::string>& phase_names) {
    atomic_write(dir / "design.csv", raster_csv(r, phase_names));
    for (Eigen::Index m = 0; m < r.rho.cols(); ++m) {
        const std::string name =
            static_cast<std::size_t>(m) < phase_names.size() ? phase_names[m] : std::to_string(m);
        atomic_write(dir / ("rho_" + name + ".pgm"), raster_pgm(r, r.rho.col(m), 1.0));
    }
    if (r.theta.size() > 0) atomic_write(dir / "theta.pgm", raster_pgm(r, r.theta, std::numbers::pi));
}

inline std::vector<std::string> phase_names(const ProblemConfig& c) {
    std::vector<std::string> n;
    for (const auto& p : c.phases) n.push_back(p.name);
    return n;
}

/// Forward solve of a fixed layout under one load case.
struct LayoutSolve {
    ElementDesign design;
    SolveState state;
    std::unique_ptr<ForwardProblem> problem;
};

inline LayoutSolve solve_layout(const ProblemConfig& c, const Assembler& assembler, const LayoutSpec& layout,
                                const LoadCase& lc) {
    const MaterialTable table = c.materials();
    const QuadMesh& mesh = assembler.mesh();
    DesignSample s;
    s.rho = layout.rho(mesh, table);
    const auto th = layout.element_theta(mesh);
    for (double t : th) s.theta.push_back(GaussArray{t, t, t, t});
    const SolventEnvironment* env = nullptr;
    for (const auto& e : c.solvents)
        if (e.name == lc.solvent) env = &e;
    if (!env) throw ConfigError("load case '" + lc.name + "' references unknown solvent '" + lc.solvent + "'");
    LayoutSolve out;
    // One-hot layouts make the SIMP exponent irrelevant.
    out.design = element_design(s, table.columns(lc.solvent), InterpolationParams{1.0, c.q});
    out.problem = std::make_unique<ForwardProblem>(assembler, lc.bc, out.design, *env, c.newton, c.bisection);
    try {
        out.state = out.problem->load_stepping_solve(c.schedule);
    } catch (const NonconvergenceError&) {
        LoadSchedule doubled = c.schedule;
        doubled.num_steps *= 2;
        out.state = out.problem->load_stepping_solve(doubled);
    }
    return out;
}

/// Shape target from a forward solve of the target layout, or the explicit rows.
inline ShapeTarget resolve_target(const ProblemConfig& c) {
    ShapeTarget t;
    if (c.target.source == "explicit") {
        t.points = c.target.explicit_points;
        t.displacements = c.target.explicit_displacements;
        return t;
    }
    const QuadMesh mesh = c.mesh.build();
    const Assembler assembler(mesh);
    const int lc = c.load_case_index(c.objective.load_case);
    if (lc < 0) throw ConfigError("shape objective refers to unknown load case '" + c.objective.load_case + "'");
    const LayoutSolve sol = solve_layout(c, assembler, c.target.layout, c.load_cases[lc]);
    std::vector<int> nodes;
    if (c.target.points == "nodes") {
        for (int n = 0; n < mesh.num_nodes(); ++n) nodes.push_back(n);
    } else {
        nodes = mesh.node_sets.at(c.target.points);
    }
    t.points.resize(static_cast<Eigen::Index>(nodes.size()), 2);
    t.displacements.resize(static_cast<Eigen::Index>(nodes.size()), 2);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        t.points.row(i) = mesh.nodes[nodes[i]].transpose();
        t.displacements(i, 0) = sol.state.u(2 * nodes[i]);
        t.displacements(i, 1) = sol.state.u(2 * nodes[i] + 1);
    }
    return t;
}

inline std::string vtk_string(const QuadMesh& mesh, const Eigen::VectorXd& u, const std::vector<CellField>& fields,
                              const std::string& title) {
    std::ostringstream os;
    write_vtk(os, mesh, u, fields, title, true);
    return os.str();
}

inline std::vector<CellField> design_fields(const RowMatrix& rho, const std::vector<std::string>& names,
                                            const std::vector<GaussArray>& theta, const SolveState& state) {
    std::vector<CellField> f;
    for (Eigen::Index m = 0; m < rho.cols(); ++m) {
        std::vector<double> col(static_cast<std::size_t>(rho.rows()));
        for (Eigen::Index e = 0; e < rho.rows(); ++e) col[e] = rho(e, m);
        f.emplace_back("rho_" + names[m], std::move(col));
    }
    std::vector<double> th;
    for (const auto& g : theta) th.push_back(0.25 * (g[0] + g[1] + g[2] + g[3]));
    if (!th.empty()) f.emplace_back("theta", th);
    std::vector<double> phi;
    for (const auto& g : state.phi_gp) {
        double sum = 0;
        for (double v : g) sum += v;
        phi.push_back(sum / static_cast<double>(g.size()));
    }
    if (!phi.empty()) f.emplace_back("phi", std::move(phi));
    return f;
}

inline fs::path prepare_output(const ProblemConfig& c) {
    const fs::path dir = output_root() / c.output.name;
    atomic_write(dir / "config.echo", serialize_config(c));
    std::string log;
    for (const auto& d : c.defaults_log) log += d + '\n';
    atomic_write(dir / "defaults.log", log);
    return dir;
}

/// Forward-only mode: one deformed VTK per load case and a summary of mean
/// displacements over every node set.
inline void run_forward(const ProblemConfig& c, std::ostream& log) {
    const fs::path dir = prepare_output(c);
    const QuadMesh mesh = c.mesh.build();
    const Assembler assembler(mesh);
    const auto names = phase_names(c);
    std::ostringstream summary;
    summary << "load_case,node_set,mean_ux_m,mean_uy_m\n";
    for (const auto& lc : c.load_cases) {
        const LayoutSolve sol = solve_layout(c, assembler, c.layout, lc);
        DesignSample s;
        s.rho = c.layout.rho(mesh, c.materials());
        for (double t : c.layout.element_theta(mesh)) s.theta.push_back(GaussArray{t, t, t, t});
        atomic_write(dir / ("forward_" + lc.name + ".vtk"),
                     vtk_string(mesh, sol.state.u, design_fields(s.rho, names, s.theta, sol.state), c.output.name + " " + lc.name));
        for (const auto& [name, nodes] : mesh.node_sets) {
            Vec2 mean = Vec2::Zero();
            for (int n : nodes) mean += Vec2(sol.state.u(2 * n), sol.state.u(2 * n + 1));
            if (!nodes.empty()) mean /= static_cast<double>(nodes.size());
            summary << lc.name << ',' << name << ',' << format_double(mean.x()) << ',' << format_double(mean.y())
                    << '\n';
        }
        int newton = 0;
        for (const auto& h : sol.state.residual_history) newton += static_cast<int>(h.size()) - 1;
        log << "load case " << lc.name << ": converged in " << newton << " Newton iterations\n";
    }
    atomic_write(dir / "summary.csv", summary.str());
}

struct OptimizeOutcome {
    OptimizationResult result;
    std::vector<Evaluation> history; // without states, to keep memory flat
};

inline std::string snapshot_name(int k) {
    std::ostringstream os;
    os << "iter_" << std::setw(4) << std::setfill('0') << k;
    return os.str();
}

/// Optimize mode: history and timing CSVs rewritten every iteration,
/// network snapshots and VTK at the configured cadence and at the end, then
/// the final design resampled on a raster.
inline OptimizeOutcome run_optimize(const ProblemConfig& c, std::ostream& log) {
    const fs::path dir = prepare_output(c);
    ShapeTarget target;
    const bool shape = c.objective.kind == ResponseKind::shape;
    if (shape) target = resolve_target(c);
    Optimizer opt(to_problem(c, shape ? &target : nullptr));
    const auto names = phase_names(c);
    HistoryTable table(opt.problem());
    OptimizeOutcome out;
    int last_snapshot = -1, last_vtk = -1;
    Evaluation last;
    auto write_vtk_at = [&](const Evaluation& ev) {
        for (std::size_t lc = 0; lc < c.load_cases.size(); ++lc)
            atomic_write(dir / "vtk" / (snapshot_name(ev.iteration) + "_" + c.load_cases[lc].name + ".vtk"),
                         vtk_string(opt.problem().mesh, ev.states[lc].u, design_fields(ev.sample.rho, names, ev.sample.theta, ev.states[lc]),
                                    c.output.name + " iteration " + std::to_string(ev.iteration)));
        last_vtk = ev.iteration;
    };
    out.result = opt.run([&](const Evaluation& ev) {
        table.append(ev);
        atomic_write(dir / "history.csv", table.csv());
        atomic_write(dir / "timing.csv", table.timing_csv());
        if (c.output.snapshot_every > 0 && ev.iteration % c.output.snapshot_every == 0) {
            save_network(dir / "snapshots" / (snapshot_name(ev.iteration) + ".net"), opt.network());
            last_snapshot = ev.iteration;
        }
        if (c.output.vtk_every > 0 && ev.iteration % c.output.vtk_every == 0) write_vtk_at(ev);
        log << "iter " << ev.iteration << "  loss " << ev.loss << "  J " << ev.objective_raw << "  grayness "
            << ev.grayness << "  |grad| " << ev.gradient_norm << '\n';
        last = ev;
        Evaluation light = ev;
        light.states.clear();
        light.designs.clear();
        out.history.push_back(std::move(light));
    });
    if (last_snapshot != last.iteration)
        save_network(dir / "snapshots" / (snapshot_name(last.iteration) + ".net"), opt.network());
    if (last_vtk != last.iteration) write_vtk_at(last);
    save_network(dir / "final.net", opt.network());
    const int rx = c.output.resample_nx > 0 ? c.output.resample_nx : c.mesh.nx;
    const int ry = c.output.resample_ny > 0 ? c.output.resample_ny : c.mesh.ny;
    write_raster(dir / "design", resample_design(opt.network(), rx, ry), names);
    log << (out.result.stopped_on_loss_change ? "stopped on loss change" : "reached the iteration limit") << " after "
        << out.result.iterations << " iterations\n";
    return out;
}

/// Adjoint gradient of the loss at the seeded initial design against central
/// differences over a few random weights.
inline FdReport run_fdcheck(const ProblemConfig& c, int count, std::uint64_t seed, std::ostream& log) {
    const fs::path dir = prepare_output(c);
    ShapeTarget target;
    const bool shape = c.objective.kind == ResponseKind::shape;
    if (shape) target = resolve_target(c);
    Optimizer opt(to_problem(c, shape ? &target : nullptr));
    const Evaluation ev = opt.evaluate(0, true);
    const auto w = opt.network().params();
    const auto idx = pick_indices(static_cast<int>(w.size()), count, seed);
    const FdReport rep =
        fd_check([&](const std::vector<double>& wk) { return opt.evaluate(wk, 0, false).loss; }, w, ev.gradient, idx);
    atomic_write(dir / "fdcheck.csv", fd_report_csv(rep));
    log << "checked " << idx.size() << " weights, worst relative error " << rep.worst_best_error << '\n';
    return rep;
}

} // namespace swelltopo
