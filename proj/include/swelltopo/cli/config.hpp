#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/info_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "swelltopo/error.hpp"
#include "swelltopo/io.hpp"
#include "swelltopo/optim/optimizer.hpp"

namespace swelltopo {

namespace pt = boost::property_tree;

enum class RunMode { forward, optimize };

struct SetSpec {
    std::string name;
    bool edges = false; // edge sets also carry tractions
    Box box{0, 0, 0, 0};
    bool operator==(const SetSpec&) const = default;
};

struct MeshSpec {
    int nx = 1, ny = 1;
    double length = 1, height = 1, thickness = 1; // m
    std::vector<SetSpec> sets;

    QuadMesh build() const {
        QuadMesh m = build_rect_mesh(nx, ny, length, height, thickness);
        for (const auto& s : sets) {
            if (s.edges)
                m.add_edge_set(s.name, s.box);
            else
                m.add_node_set(s.name, s.box);
        }
        return m;
    }
    bool operator==(const MeshSpec&) const = default;
};

/// Piecewise-constant layout: a default phase overwritten by boxes, tested at
/// element centroids. Later regions win.
struct LayoutRegion {
    std::string phase;
    Box box{0, 0, 0, 0};
    std::optional<double> theta; // rad
    bool operator==(const LayoutRegion&) const = default;
};

struct LayoutSpec {
    std::string default_phase;
    double theta = 0; // rad
    std::vector<LayoutRegion> regions;

    bool empty() const { return default_phase.empty(); }

    RowMatrix rho(const QuadMesh& mesh, const MaterialTable& table) const {
        RowMatrix r = RowMatrix::Zero(mesh.num_elements(), static_cast<Eigen::Index>(table.size()));
        for (int e = 0; e < mesh.num_elements(); ++e) r(e, table.index_of(phase_at(mesh.centroid(e)))) = 1.0;
        return r;
    }

    std::vector<double> element_theta(const QuadMesh& mesh) const {
        std::vector<double> t(mesh.num_elements(), theta);
        const double tol = 1e-12 * std::max(1.0, mesh.min_edge_length());
        for (int e = 0; e < mesh.num_elements(); ++e)
            for (const auto& r : regions)
                if (r.theta && r.box.contains(mesh.centroid(e), tol)) t[e] = *r.theta;
        return t;
    }

    std::string phase_at(const Vec2& x) const {
        std::string p = default_phase;
        for (const auto& r : regions)
            if (r.box.contains(x, 0.0)) p = r.phase;
        return p;
    }
    bool operator==(const LayoutSpec&) const = default;
};

/// Response with load case named rather than indexed.
struct ResponseConfig {
    ResponseKind kind = ResponseKind::blocked_force;
    std::string load_case;
    std::string node_set;
    int component = 0;
    double direction = -1;
    bool operator==(const ResponseConfig&) const = default;
};

/// Shape target: sample points are every node or a node set; displacements
/// come from a forward solve of a layout or from explicit rows.
struct TargetConfig {
    std::string points = "nodes";
    std::string source = "layout"; // layout | explicit
    LayoutSpec layout;
    RowMatrix explicit_points;
    RowMatrix explicit_displacements;
    bool operator==(const TargetConfig& o) const {
        return points == o.points && source == o.source && layout == o.layout &&
               explicit_points == o.explicit_points && explicit_displacements == o.explicit_displacements;
    }
};

struct ConstraintConfig {
    std::string name;
    ConstraintKind kind = ConstraintKind::volume;
    std::vector<std::string> phases;
    double bound = 0.5;
    ResponseConfig response;
    double floor = 0; // N
    bool operator==(const ConstraintConfig&) const = default;
};

struct OutputSpec {
    std::string name;
    int snapshot_every = 10; // 0: final only
    int vtk_every = 0;       // 0: final only
    int resample_nx = 0, resample_ny = 0; // 0: mesh resolution
    bool operator==(const OutputSpec&) const = default;
};

struct ProblemConfig {
    RunMode mode = RunMode::optimize;
    MeshSpec mesh;
    std::vector<PhaseProperties> phases;
    std::vector<SolventEnvironment> solvents;
    std::vector<LoadCase> load_cases;
    LayoutSpec layout;

    bool has_objective = false;
    ResponseConfig objective;
    bool maximize = true;
    TargetConfig target;
    std::vector<ConstraintConfig> constraints;

    double q = 1.0;
    ContinuationSettings continuation;
    ProjectionSettings projection;
    AdamSettings adam;
    StopSettings stop;
    NetworkConfig network; // num_phases is 0 when the density head is off
    LoadSchedule schedule;
    NewtonSettings newton;
    BisectionSettings bisection;
    double objective_floor = 1e-8;
    OutputSpec output;

    std::vector<std::string> defaults_log; // keys filled from defaults, with the value used

    MaterialTable materials() const { return MaterialTable(phases); }
    int load_case_index(const std::string& name) const {
        for (std::size_t i = 0; i < load_cases.size(); ++i)
            if (load_cases[i].name == name) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline std::string to_text(const std::string& s) { return s; }
inline std::string to_text(const char* s) { return s; }
inline std::string to_text(double x) { return format_double(x); }
inline std::string to_text(bool b) { return b ? "true" : "false"; }
template <class T>
    requires std::is_integral_v<T>
std::string to_text(T x) {
    return std::to_string(x);
}

struct ConfigContext {
    std::vector<std::string> violations;
    std::vector<std::string> defaults;
};

/// Reader over one INFO section. Records every problem instead of stopping,
/// logs each default it fills in, and flags keys nobody asked for.
class Section {
public:
    Section(const pt::ptree* node, std::string path, ConfigContext* ctx)
        : node_(node), path_(std::move(path)), ctx_(ctx) {}

    bool present() const { return node_ != nullptr; }
    const std::string& path() const { return path_; }
    bool has(const std::string& key) const { return node_ && node_->count(key) > 0; }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        if (!has(key)) {
            used_.insert(key);
            ctx_->defaults.push_back(full(key) + " = " + to_text(fallback));
            return fallback;
        }
        return read<T>(key).value_or(fallback);
    }

    template <class T>
    T need(const std::string& key) {
        if (!has(key)) {
            used_.insert(key);
            ctx_->violations.push_back("missing required key '" + full(key) + "'");
            return T{};
        }
        return read<T>(key).value_or(T{});
    }

    Section section(const std::string& key) {
        used_.insert(key);
        if (!node_) return Section(nullptr, full(key), ctx_);
        if (node_->count(key) > 1) ctx_->violations.push_back("section '" + full(key) + "' given more than once");
        auto it = node_->find(key);
        if (it == node_->not_found()) return Section(nullptr, full(key), ctx_);
        return Section(&it->second, full(key), ctx_);
    }

    std::vector<Section> list(const std::string& key) {
        used_.insert(key);
        std::vector<Section> out;
        if (!node_) return out;
        auto range = node_->equal_range(key);
        int i = 0;
        for (auto it = range.first; it != range.second; ++it, ++i)
            out.emplace_back(&it->second, full(key) + "[" + std::to_string(i) + "]", ctx_);
        return out;
    }

    /// Names of all children; for free-form maps such as chi per solvent.
    std::vector<std::string> keys() {
        std::vector<std::string> k;
        if (node_)
            for (const auto& [name, child] : *node_) {
                k.push_back(name);
                used_.insert(name);
            }
        return k;
    }

    void violation(const std::string& what) { ctx_->violations.push_back(path_ + ": " + what); }

    void finish() {
        if (!node_) return;
        for (const auto& [name, child] : *node_)
            if (!used_.contains(name)) ctx_->violations.push_back("unknown key '" + full(name) + "'");
    }

private:
    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    std::optional<T> read(const std::string& key) {
        used_.insert(key);
        if (node_->count(key) > 1) ctx_->violations.push_back("key '" + full(key) + "' given more than once");
        const auto& child = node_->get_child(key);
        if (!child.empty()) {
            ctx_->violations.push_back("key '" + full(key) + "' must be a value, not a section");
            return std::nullopt;
        }
        auto v = child.get_value_optional<T>();
        if (!v) {
            ctx_->violations.push_back("key '" + full(key) + "' has malformed value '" + child.data() + "'");
            return std::nullopt;
        }
        return *v;
    }

    const pt::ptree* node_;
    std::string path_;
    ConfigContext* ctx_;
    std::set<std::string> used_;
};

inline std::vector<std::string> split_words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

inline int parse_component(Section& s, const std::string& key, bool required) {
    const std::string c = required ? s.need<std::string>(key) : s.get<std::string>(key, "x");
    if (c == "x") return 0;
    if (c == "y") return 1;
    if (!c.empty()) s.violation("component must be 'x' or 'y', got '" + c + "'");
    return 0;
}

inline Box parse_box(Section& s) {
    return Box{s.need<double>("xmin_m"), s.need<double>("xmax_m"), s.need<double>("ymin_m"), s.need<double>("ymax_m")};
}

inline LayoutSpec parse_layout(Section s) {
    LayoutSpec l;
    if (!s.present()) return l;
    l.default_phase = s.need<std::string>("default_phase");
    l.theta = s.get<double>("theta_deg", 0.0) * std::numbers::pi / 180.0;
    for (auto& r : s.list("region")) {
        LayoutRegion reg;
        reg.phase = r.need<std::string>("phase");
        reg.box = parse_box(r);
        if (r.has("theta_deg")) reg.theta = r.need<double>("theta_deg") * std::numbers::pi / 180.0;
        r.finish();
        l.regions.push_back(reg);
    }
    s.finish();
    return l;
}

inline ResponseConfig parse_response(Section& s) {
    ResponseConfig r;
    r.load_case = s.need<std::string>("load_case");
    r.node_set = s.need<std::string>("node_set");
    r.component = parse_component(s, "component", true);
    r.direction = s.get<double>("direction", -1.0);
    return r;
}

inline RowMatrix rows_of(const std::vector<std::array<double, 2>>& v) {
    RowMatrix m(static_cast<Eigen::Index>(v.size()), 2);
    for (std::size_t i = 0; i < v.size(); ++i) m.row(i) << v[i][0], v[i][1];
    return m;
}

} // namespace detail

/// Parses INFO text. Throws ConfigError listing every violation found.
inline ProblemConfig parse_config(const std::string& text) {
    pt::ptree root;
    try {
        std::istringstream is(text);
        pt::read_info(is, root);
    } catch (const pt::info_parser_error& e) {
        throw ConfigError("syntax error at line " + std::to_string(e.line()) + ": " + e.message());
    }
    detail::ConfigContext ctx;
    detail::Section top(&root, "", &ctx);
    ProblemConfig c;

    const std::string mode = top.get<std::string>("mode", "optimize");
    if (mode == "forward")
        c.mode = RunMode::forward;
    else if (mode != "optimize")
        top.violation("mode must be 'forward' or 'optimize', got '" + mode + "'");

    {
        auto s = top.section("mesh");
        if (!s.present()) ctx.violations.push_back("missing required section 'mesh'");
        c.mesh.nx = s.need<int>("nx");
        c.mesh.ny = s.need<int>("ny");
        c.mesh.length = s.need<double>("length_m");
        c.mesh.height = s.need<double>("height_m");
        c.mesh.thickness = s.need<double>("thickness_m");
        for (auto& ss : s.list("set")) {
            SetSpec set;
            set.name = ss.need<std::string>("name");
            const std::string kind = ss.get<std::string>("kind", "nodes");
            if (kind != "nodes" && kind != "edges") ss.violation("set kind must be 'nodes' or 'edges'");
            set.edges = kind == "edges";
            set.box = detail::parse_box(ss);
            ss.finish();
            c.mesh.sets.push_back(set);
        }
        s.finish();
    }

    {
        auto s = top.section("materials");
        if (!s.present()) ctx.violations.push_back("missing required section 'materials'");
        for (auto& ps : s.list("phase")) {
            PhaseProperties p;
            p.name = ps.need<std::string>("name");
            p.shear_modulus = ps.need<double>("G_pa");
            p.fiber_stiffness = ps.get<double>("fiber_stiffness_pa", 0.0);
            auto chi = ps.section("chi");
            if (!chi.present()) ps.violation("phase needs a chi section with one entry per solvent");
            for (const auto& solvent : chi.keys()) p.chi_per_solvent[solvent] = chi.need<double>(solvent);
            ps.finish();
            c.phases.push_back(p);
        }
        s.finish();
    }

    {
        auto s = top.section("solvents");
        auto list = s.list("solvent");
        if (list.empty()) ctx.violations.push_back("at least one 'solvents.solvent' entry is required");
        for (auto& ss : list) {
            SolventEnvironment e;
            e.name = ss.need<std::string>("name");
            e.mu_dry = ss.get<double>("mu_dry_j_per_mol", e.mu_dry);
            e.mu_wet = ss.get<double>("mu_wet_j_per_mol", e.mu_wet);
            e.mu0 = ss.get<double>("mu0_j_per_mol", e.mu0);
            e.molar_volume = ss.get<double>("molar_volume_m3_per_mol", e.molar_volume);
            e.temperature = ss.get<double>("temperature_k", e.temperature);
            ss.finish();
            c.solvents.push_back(e);
        }
        s.finish();
    }

    {
        auto s = top.section("load_cases");
        auto list = s.list("case");
        if (list.empty()) ctx.violations.push_back("at least one 'load_cases.case' entry is required");
        for (auto& cs : list) {
            LoadCase lc;
            lc.name = cs.need<std::string>("name");
            lc.solvent = cs.need<std::string>("solvent");
            for (auto& d : cs.list("dirichlet")) {
                DirichletCondition dc;
                dc.node_set = d.need<std::string>("set");
                dc.component = detail::parse_component(d, "component", true);
                dc.value = d.get<double>("value_m", 0.0);
                d.finish();
                lc.bc.dirichlet.push_back(dc);
            }
            for (auto& n : cs.list("neumann")) {
                NeumannCondition nc;
                nc.edge_set = n.need<std::string>("set");
                nc.traction = Vec2(n.get<double>("traction_x_pa", 0.0), n.get<double>("traction_y_pa", 0.0));
                n.finish();
                lc.bc.neumann.push_back(nc);
            }
            cs.finish();
            c.load_cases.push_back(lc);
        }
        s.finish();
    }

    c.layout = detail::parse_layout(top.section("layout"));

    {
        auto s = top.section("objective");
        c.has_objective = s.present();
        if (s.present()) {
            const std::string kind = s.need<std::string>("kind");
            c.maximize = s.get<bool>("maximize", kind != "shape");
            if (kind == "blocked_force") {
                c.objective = detail::parse_response(s);
            } else if (kind == "shape") {
                c.objective.kind = ResponseKind::shape;
                c.objective.load_case = s.need<std::string>("load_case");
                auto t = s.section("target");
                if (!t.present()) s.violation("shape objective needs a target section");
                c.target.points = t.get<std::string>("points", "nodes");
                c.target.source = t.get<std::string>("source", "layout");
                if (c.target.source == "layout") {
                    c.target.layout = detail::parse_layout(t.section("layout"));
                    if (c.target.layout.empty()) t.violation("target source 'layout' needs a layout section");
                } else if (c.target.source == "explicit") {
                    std::vector<std::array<double, 2>> pts, disp;
                    for (auto& p : t.list("point")) {
                        pts.push_back({p.need<double>("x_m"), p.need<double>("y_m")});
                        disp.push_back({p.need<double>("ux_m"), p.need<double>("uy_m")});
                        p.finish();
                    }
                    c.target.explicit_points = detail::rows_of(pts);
                    c.target.explicit_displacements = detail::rows_of(disp);
                } else {
                    t.violation("target source must be 'layout' or 'explicit'");
                }
                t.finish();
            } else if (!kind.empty()) {
                s.violation("objective kind must be 'blocked_force' or 'shape', got '" + kind + "'");
            }
            s.finish();
        } else if (c.mode == RunMode::optimize) {
            ctx.violations.push_back("optimize mode needs an 'objective' section");
        }
    }

    {
        auto s = top.section("constraints");
        for (auto& v : s.list("volume")) {
            ConstraintConfig cc;
            cc.kind = ConstraintKind::volume;
            cc.name = v.get<std::string>("name", "volume");
            cc.phases = detail::split_words(v.need<std::string>("phases"));
            cc.bound = v.need<double>("bound");
            v.finish();
            c.constraints.push_back(cc);
        }
        for (auto& g : s.list("grayness")) {
            ConstraintConfig cc;
            cc.kind = ConstraintKind::grayness;
            cc.name = g.get<std::string>("name", "grayness");
            g.finish();
            c.constraints.push_back(cc);
        }
        for (auto& r : s.list("reaction_floor")) {
            ConstraintConfig cc;
            cc.kind = ConstraintKind::reaction_floor;
            cc.name = r.get<std::string>("name", "reaction_floor");
            cc.response = detail::parse_response(r);
            cc.floor = r.need<double>("floor_n");
            r.finish();
            c.constraints.push_back(cc);
        }
        s.finish();
    }

    {
        auto s = top.section("continuation");
        auto& k = c.continuation;
        k.p_start = s.get("p_start", k.p_start);
        k.p_step = s.get("p_step", k.p_step);
        k.p_max = s.get("p_max", k.p_max);
        k.xi_start = s.get("xi_start", k.xi_start);
        k.xi_step = s.get("xi_step", k.xi_step);
        k.xi_min = s.get("xi_min", k.xi_min);
        k.tau0 = s.get("tau0", k.tau0);
        k.nu = s.get("nu", k.nu);
        c.q = s.get("q", c.q);
        s.finish();
    }
    {
        auto s = top.section("projection");
        auto& k = c.projection;
        k.enabled = s.get("enabled", k.enabled);
        k.beta = s.get("beta", k.beta);
        k.beta_growth = s.get("beta_growth", k.beta_growth);
        k.beta_max = s.get("beta_max", k.beta_max);
        k.eta = s.get("eta", k.eta);
        s.finish();
    }
    {
        auto s = top.section("adam");
        auto& k = c.adam;
        k.learning_rate = s.get("learning_rate", k.learning_rate);
        k.beta1 = s.get("beta1", k.beta1);
        k.beta2 = s.get("beta2", k.beta2);
        k.epsilon = s.get("epsilon", k.epsilon);
        k.clip_norm = s.get("clip_norm", k.clip_norm);
        s.finish();
    }
    {
        auto s = top.section("stop");
        auto& k = c.stop;
        k.max_iterations = s.get("max_iterations", k.max_iterations);
        k.delta_loss = s.get("delta_loss", k.delta_loss);
        k.window = s.get("window", k.window);
        s.finish();
    }
    {
        auto s = top.section("network");
        auto& k = c.network;
        k.seed = s.get<std::uint64_t>("seed", k.seed);
        k.num_fourier = s.get("num_fourier", k.num_fourier);
        k.sigma = s.get("sigma", default_sigma(c.mesh.nx, c.mesh.ny));
        std::string hidden;
        for (int h : k.hidden) hidden += (hidden.empty() ? "" : " ") + std::to_string(h);
        k.hidden.clear();
        for (const auto& w : detail::split_words(s.get<std::string>("hidden", hidden))) {
            try {
                k.hidden.push_back(std::stoi(w));
            } catch (const std::exception&) {
                s.violation("hidden widths must be integers, got '" + w + "'");
            }
        }
        const bool density = s.get("density_head", true);
        k.num_phases = density ? static_cast<int>(c.phases.size()) : 0;
        k.angle_head = s.get("angle_head", k.angle_head);
        s.finish();
    }
    {
        auto s = top.section("solver");
        c.schedule.num_steps = s.get("load_steps", c.schedule.num_steps);
        c.schedule.exponent = s.get("load_exponent", c.schedule.exponent);
        auto& n = c.newton;
        n.tolerance = s.get("newton_tolerance", n.tolerance);
        n.absolute_floor = s.get("newton_floor_n", n.absolute_floor);
        n.max_iterations = s.get("newton_max_iterations", n.max_iterations);
        n.armijo = s.get("armijo", n.armijo);
        n.backtrack = s.get("backtrack", n.backtrack);
        n.max_backtracks = s.get("max_backtracks", n.max_backtracks);
        n.max_cutbacks = s.get("max_cutbacks", n.max_cutbacks);
        c.objective_floor = s.get("objective_floor", c.objective_floor);
        s.finish();
    }
    {
        auto s = top.section("bisection");
        auto& b = c.bisection;
        b.lower = s.get("lower", b.lower);
        b.upper = s.get("upper", b.upper);
        b.phi_tolerance = s.get("phi_tolerance", b.phi_tolerance);
        b.residual_tolerance = s.get("residual_tolerance", b.residual_tolerance);
        b.max_iterations = s.get("max_iterations", b.max_iterations);
        b.polish_steps = s.get("polish_steps", b.polish_steps);
        s.finish();
    }
    {
        auto s = top.section("output");
        auto& o = c.output;
        o.name = s.get<std::string>("name", "run");
        o.snapshot_every = s.get("snapshot_every", o.snapshot_every);
        o.vtk_every = s.get("vtk_every", o.vtk_every);
        const std::string res = s.get<std::string>("resample", "mesh");
        if (res != "mesh") {
            const auto x = res.find('x');
            try {
                if (x == std::string::npos) throw std::invalid_argument(res);
                o.resample_nx = std::stoi(res.substr(0, x));
                o.resample_ny = std::stoi(res.substr(x + 1));
            } catch (const std::exception&) {
                s.violation("resample must be 'mesh' or NxM, got '" + res + "'");
            }
            if (o.resample_nx < 1 || o.resample_ny < 1) s.violation("resample resolution must be positive");
        }
        if (o.snapshot_every < 0 || o.vtk_every < 0) s.violation("output cadences must be non-negative");
        s.finish();
    }
    top.finish();

    c.defaults_log = std::move(ctx.defaults);
    if (!ctx.violations.empty()) throw ConfigError(ctx.violations);
    return c;
}

/// Problem ready for the optimizer. A shape target that comes from a layout
/// needs a forward solve; until it is supplied the target displacements are
/// zero (enough for validation).
inline OptimizationProblem to_problem(const ProblemConfig& c, const ShapeTarget* target = nullptr) {
    OptimizationProblem p;
    p.mesh = c.mesh.build();
    p.materials = c.materials();
    p.solvents = c.solvents;
    p.load_cases = c.load_cases;
    std::vector<std::string> v;
    auto response = [&](const ResponseConfig& r) {
        ResponseSpec s;
        s.kind = r.kind;
        s.load_case = c.load_case_index(r.load_case);
        if (s.load_case < 0) v.push_back("response refers to unknown load case '" + r.load_case + "'");
        s.node_set = r.node_set;
        s.component = r.component;
        s.direction = r.direction;
        return s;
    };
    if (c.has_objective) {
        p.objective.response = response(c.objective);
        p.objective.maximize = c.maximize;
        if (c.objective.kind == ResponseKind::shape) {
            if (target) {
                p.objective.response.target = *target;
            } else if (c.target.source == "explicit") {
                p.objective.response.target.points = c.target.explicit_points;
                p.objective.response.target.displacements = c.target.explicit_displacements;
            } else {
                std::vector<int> nodes;
                if (c.target.points == "nodes") {
                    for (int n = 0; n < p.mesh.num_nodes(); ++n) nodes.push_back(n);
                } else if (auto it = p.mesh.node_sets.find(c.target.points); it != p.mesh.node_sets.end()) {
                    nodes = it->second;
                } else {
                    v.push_back("shape target points refer to unknown node set '" + c.target.points + "'");
                }
                auto& t = p.objective.response.target;
                t.points.resize(static_cast<Eigen::Index>(nodes.size()), 2);
                t.displacements = RowMatrix::Zero(static_cast<Eigen::Index>(nodes.size()), 2);
                for (std::size_t i = 0; i < nodes.size(); ++i) t.points.row(i) = p.mesh.nodes[nodes[i]].transpose();
            }
        }
    }
    const MaterialTable table = p.materials;
    for (const auto& cc : c.constraints) {
        ConstraintSpec s;
        s.name = cc.name;
        s.kind = cc.kind;
        s.bound = cc.bound;
        s.floor = cc.floor;
        for (const auto& ph : cc.phases) {
            const int i = table.index_of(ph);
            if (i < 0) v.push_back("constraint '" + cc.name + "' names unknown phase '" + ph + "'");
            s.phases.push_back(i);
        }
        if (cc.kind == ConstraintKind::reaction_floor) s.response = response(cc.response);
        p.constraints.push_back(s);
    }
    p.q = c.q;
    p.continuation = c.continuation;
    p.projection = c.projection;
    p.adam = c.adam;
    p.stop = c.stop;
    p.network = c.network;
    if (!c.layout.empty()) {
        p.fixed_rho = c.layout.rho(p.mesh, table);
        p.fixed_theta = c.layout.theta;
    }
    p.schedule = c.schedule;
    p.newton = c.newton;
    p.bisection = c.bisection;
    p.objective_floor = c.objective_floor;
    if (!v.empty()) throw ConfigError(v);
    return p;
}

/// Semantic checks beyond the schema: set references, material coverage and,
/// in optimize mode, everything the optimizer would reject.
inline std::vector<std::string> config_violations(const ProblemConfig& c) {
    std::vector<std::string> v;
    auto add = [&](const std::vector<std::string>& more) { v.insert(v.end(), more.begin(), more.end()); };
    QuadMesh mesh;
    try {
        mesh = c.mesh.build();
    } catch (const ConfigError& e) {
        add(e.violations());
        return v;
    }
    for (const auto& s : c.mesh.sets)
        if (mesh.node_sets.at(s.name).empty()) v.push_back("mesh set '" + s.name + "' selects no nodes");
    const MaterialTable table = c.materials();
    auto check_layout = [&](const LayoutSpec& l, const std::string& what) {
        if (l.empty()) return;
        if (table.index_of(l.default_phase) < 0) v.push_back(what + " default phase '" + l.default_phase + "' is unknown");
        for (const auto& r : l.regions)
            if (table.index_of(r.phase) < 0) v.push_back(what + " region phase '" + r.phase + "' is unknown");
    };
    check_layout(c.layout, "layout");
    if (c.has_objective && c.objective.kind == ResponseKind::shape) check_layout(c.target.layout, "target layout");

    if (c.mode == RunMode::forward) {
        add(table.violations());
        for (const auto& s : c.solvents) add(s.violations());
        for (const auto& lc : c.load_cases) {
            bool known = false;
            for (const auto& s : c.solvents) known |= s.name == lc.solvent;
            if (!known) v.push_back("load case '" + lc.name + "' references unknown solvent '" + lc.solvent + "'");
            for (const auto& ph : c.phases)
                if (!ph.chi_per_solvent.contains(lc.solvent))
                    v.push_back("phase '" + ph.name + "' has no chi for solvent '" + lc.solvent + "'");
            for (auto& s : boundary_violations(mesh, lc.bc)) v.push_back("load case '" + lc.name + "': " + s);
        }
        add(c.schedule.violations());
        add(c.newton.violations());
        if (c.layout.empty()) v.push_back("forward mode needs a layout section");
        return v;
    }
    if (!c.network.angle_head)
        for (const auto& r : c.layout.regions)
            if (r.theta) v.push_back("per-region fiber angles need forward mode or an angle head");
    if (c.network.num_phases == 0 && c.layout.empty()) v.push_back("a network without a density head needs a layout");
    try {
        add(to_problem(c).violations());
    } catch (const ConfigError& e) {
        add(e.violations());
    }
    return v;
}

inline ProblemConfig load_config(const std::filesystem::path& path) {
    ProblemConfig c = parse_config(read_file(path));
    if (auto v = config_violations(c); !v.empty()) throw ConfigError(v);
    if (c.output.name == "run") c.output.name = path.stem().string();
    return c;
}

namespace detail {

inline void put_box(pt::ptree& t, const Box& b) {
    t.put("xmin_m", format_double(b.xmin));
    t.put("xmax_m", format_double(b.xmax));
    t.put("ymin_m", format_double(b.ymin));
    t.put("ymax_m", format_double(b.ymax));
}

inline pt::ptree layout_tree(const LayoutSpec& l) {
    pt::ptree t;
    t.put("default_phase", l.default_phase);
    t.put("theta_deg", format_double(l.theta * 180.0 / std::numbers::pi));
    for (const auto& r : l.regions) {
        pt::ptree rt;
        rt.put("phase", r.phase);
        put_box(rt, r.box);
        if (r.theta) rt.put("theta_deg", format_double(*r.theta * 180.0 / std::numbers::pi));
        t.add_child("region", rt);
    }
    return t;
}

inline void put_response(pt::ptree& t, const ResponseConfig& r) {
    t.put("load_case", r.load_case);
    t.put("node_set", r.node_set);
    t.put("component", r.component == 0 ? "x" : "y");
    t.put("direction", format_double(r.direction));
}

} // namespace detail

/// Fully defaulted INFO text; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ProblemConfig& c) {
    using detail::put_box;
    pt::ptree root;
    root.put("mode", c.mode == RunMode::forward ? "forward" : "optimize");

    pt::ptree mesh;
    mesh.put("nx", c.mesh.nx);
    mesh.put("ny", c.mesh.ny);
    mesh.put("length_m", format_double(c.mesh.length));
    mesh.put("height_m", format_double(c.mesh.height));
    mesh.put("thickness_m", format_double(c.mesh.thickness));
    for (const auto& s : c.mesh.sets) {
        pt::ptree st;
        st.put("name", s.name);
        st.put("kind", s.edges ? "edges" : "nodes");
        put_box(st, s.box);
        mesh.add_child("set", st);
    }
    root.add_child("mesh", mesh);

    pt::ptree mats;
    for (const auto& p : c.phases) {
        pt::ptree pt_;
        pt_.put("name", p.name);
        pt_.put("G_pa", format_double(p.shear_modulus));
        pt_.put("fiber_stiffness_pa", format_double(p.fiber_stiffness));
        pt::ptree chi;
        for (const auto& [solvent, x] : p.chi_per_solvent) chi.put(pt::ptree::path_type(solvent, '\0'), format_double(x));
        pt_.add_child("chi", chi);
        mats.add_child("phase", pt_);
    }
    root.add_child("materials", mats);

    pt::ptree solvents;
    for (const auto& s : c.solvents) {
        pt::ptree st;
        st.put("name", s.name);
        st.put("mu_dry_j_per_mol", format_double(s.mu_dry));
        st.put("mu_wet_j_per_mol", format_double(s.mu_wet));
        st.put("mu0_j_per_mol", format_double(s.mu0));
        st.put("molar_volume_m3_per_mol", format_double(s.molar_volume));
        st.put("temperature_k", format_double(s.temperature));
        solvents.add_child("solvent", st);
    }
    root.add_child("solvents", solvents);

    pt::ptree cases;
    for (const auto& lc : c.load_cases) {
        pt::ptree ct;
        ct.put("name", lc.name);
        ct.put("solvent", lc.solvent);
        for (const auto& d : lc.bc.dirichlet) {
            pt::ptree dt;
            dt.put("set", d.node_set);
            dt.put("component", d.component == 0 ? "x" : "y");
            dt.put("value_m", format_double(d.value));
            ct.add_child("dirichlet", dt);
        }
        for (const auto& n : lc.bc.neumann) {
            pt::ptree nt;
            nt.put("set", n.edge_set);
            nt.put("traction_x_pa", format_double(n.traction.x()));
            nt.put("traction_y_pa", format_double(n.traction.y()));
            ct.add_child("neumann", nt);
        }
        cases.add_child("case", ct);
    }
    root.add_child("load_cases", cases);

    if (!c.layout.empty()) root.add_child("layout", detail::layout_tree(c.layout));

    if (c.has_objective) {
        pt::ptree ot;
        if (c.objective.kind == ResponseKind::blocked_force) {
            ot.put("kind", "blocked_force");
            detail::put_response(ot, c.objective);
        } else {
            ot.put("kind", "shape");
            ot.put("load_case", c.objective.load_case);
            pt::ptree tt;
            tt.put("points", c.target.points);
            tt.put("source", c.target.source);
            if (c.target.source == "layout") tt.add_child("layout", detail::layout_tree(c.target.layout));
            for (Eigen::Index i = 0; i < c.target.explicit_points.rows(); ++i) {
                pt::ptree pp;
                pp.put("x_m", format_double(c.target.explicit_points(i, 0)));
                pp.put("y_m", format_double(c.target.explicit_points(i, 1)));
                pp.put("ux_m", format_double(c.target.explicit_displacements(i, 0)));
                pp.put("uy_m", format_double(c.target.explicit_displacements(i, 1)));
                tt.add_child("point", pp);
            }
            ot.add_child("target", tt);
        }
        ot.put("maximize", c.maximize ? "true" : "false");
        root.add_child("objective", ot);
    }

    pt::ptree cons;
    for (const auto& cc : c.constraints) {
        pt::ptree ct;
        ct.put("name", cc.name);
        if (cc.kind == ConstraintKind::volume) {
            std::string phases;
            for (const auto& p : cc.phases) phases += (phases.empty() ? "" : " ") + p;
            ct.put("phases", phases);
            ct.put("bound", format_double(cc.bound));
            cons.add_child("volume", ct);
        } else if (cc.kind == ConstraintKind::grayness) {
            cons.add_child("grayness", ct);
        } else {
            detail::put_response(ct, cc.response);
            ct.put("floor_n", format_double(cc.floor));
            cons.add_child("reaction_floor", ct);
        }
    }
    root.add_child("constraints", cons);

    pt::ptree k;
    k.put("p_start", format_double(c.continuation.p_start));
    k.put("p_step", format_double(c.continuation.p_step));
    k.put("p_max", format_double(c.continuation.p_max));
    k.put("xi_start", format_double(c.continuation.xi_start));
    k.put("xi_step", format_double(c.continuation.xi_step));
    k.put("xi_min", format_double(c.continuation.xi_min));
    k.put("tau0", format_double(c.continuation.tau0));
    k.put("nu", format_double(c.continuation.nu));
    k.put("q", format_double(c.q));
    root.add_child("continuation", k);

    pt::ptree pr;
    pr.put("enabled", c.projection.enabled ? "true" : "false");
    pr.put("beta", format_double(c.projection.beta));
    pr.put("beta_growth", format_double(c.projection.beta_growth));
    pr.put("beta_max", format_double(c.projection.beta_max));
    pr.put("eta", format_double(c.projection.eta));
    root.add_child("projection", pr);

    pt::ptree ad;
    ad.put("learning_rate", format_double(c.adam.learning_rate));
    ad.put("beta1", format_double(c.adam.beta1));
    ad.put("beta2", format_double(c.adam.beta2));
    ad.put("epsilon", format_double(c.adam.epsilon));
    ad.put("clip_norm", format_double(c.adam.clip_norm));
    root.add_child("adam", ad);

    pt::ptree st;
    st.put("max_iterations", c.stop.max_iterations);
    st.put("delta_loss", format_double(c.stop.delta_loss));
    st.put("window", c.stop.window);
    root.add_child("stop", st);

    pt::ptree nt;
    nt.put("seed", c.network.seed);
    nt.put("num_fourier", c.network.num_fourier);
    nt.put("sigma", format_double(c.network.sigma));
    std::string hidden;
    for (int h : c.network.hidden) hidden += (hidden.empty() ? "" : " ") + std::to_string(h);
    nt.put("hidden", hidden);
    nt.put("density_head", c.network.num_phases > 0 ? "true" : "false");
    nt.put("angle_head", c.network.angle_head ? "true" : "false");
    root.add_child("network", nt);

    pt::ptree sv;
    sv.put("load_steps", c.schedule.num_steps);
    sv.put("load_exponent", format_double(c.schedule.exponent));
    sv.put("newton_tolerance", format_double(c.newton.tolerance));
    sv.put("newton_floor_n", format_double(c.newton.absolute_floor));
    sv.put("newton_max_iterations", c.newton.max_iterations);
    sv.put("armijo", format_double(c.newton.armijo));
    sv.put("backtrack", format_double(c.newton.backtrack));
    sv.put("max_backtracks", c.newton.max_backtracks);
    sv.put("max_cutbacks", c.newton.max_cutbacks);
    sv.put("objective_floor", format_double(c.objective_floor));
    root.add_child("solver", sv);

    pt::ptree bi;
    bi.put("lower", format_double(c.bisection.lower));
    bi.put("upper", format_double(c.bisection.upper));
    bi.put("phi_tolerance", format_double(c.bisection.phi_tolerance));
    bi.put("residual_tolerance", format_double(c.bisection.residual_tolerance));
    bi.put("max_iterations", c.bisection.max_iterations);
    bi.put("polish_steps", c.bisection.polish_steps);
    root.add_child("bisection", bi);

    pt::ptree out;
    out.put("name", c.output.name);
    out.put("snapshot_every", c.output.snapshot_every);
    out.put("vtk_every", c.output.vtk_every);
    out.put("resample", c.output.resample_nx > 0
                            ? std::to_string(c.output.resample_nx) + "x" + std::to_string(c.output.resample_ny)
                            : std::string("mesh"));
    root.add_child("output", out);

    std::ostringstream os;
    pt::write_info(os, root, pt::info_writer_settings<char>(' ', 4));
    return os.str();
}

} // namespace swelltopo
