#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/error.hpp"

namespace swelltopo {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Axis-aligned box used to pick node and edge sets.
struct Box {
    double xmin, xmax, ymin, ymax;

    bool contains(const Vec2& p, double tol) const {
        return p.x() >= xmin - tol && p.x() <= xmax + tol && p.y() >= ymin - tol && p.y() <= ymax + tol;
    }
    bool operator==(const Box&) const = default;
};

/// Bilinear quadrilateral mesh. Element connectivity is counter-clockwise.
struct QuadMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 4>> elements;
    double thickness = 1.0;
    std::map<std::string, std::vector<int>> node_sets;
    std::map<std::string, std::vector<std::array<int, 2>>> edge_sets;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(elements.size()); }
    int num_dofs() const { return 2 * num_nodes(); }

    Vec2 centroid(int e) const {
        Vec2 c = Vec2::Zero();
        for (int n : elements[e]) c += nodes[n];
        return 0.25 * c;
    }

    Box bounding_box() const {
        Box b{1e300, -1e300, 1e300, -1e300};
        for (const auto& p : nodes) {
            b.xmin = std::min(b.xmin, p.x());
            b.xmax = std::max(b.xmax, p.x());
            b.ymin = std::min(b.ymin, p.y());
            b.ymax = std::max(b.ymax, p.y());
        }
        return b;
    }

    double min_edge_length() const {
        double h = 1e300;
        for (const auto& el : elements)
            for (int k = 0; k < 4; ++k) h = std::min(h, (nodes[el[(k + 1) % 4]] - nodes[el[k]]).norm());
        return h;
    }

    /// Boundary edges: edges owned by exactly one element.
    std::vector<std::array<int, 2>> boundary_edges() const {
        std::map<std::pair<int, int>, int> count;
        std::map<std::pair<int, int>, std::array<int, 2>> oriented;
        for (const auto& el : elements)
            for (int k = 0; k < 4; ++k) {
                const int a = el[k], b = el[(k + 1) % 4];
                const auto key = std::minmax(a, b);
                ++count[key];
                oriented[key] = {a, b};
            }
        std::vector<std::array<int, 2>> out;
        for (const auto& [key, c] : count)
            if (c == 1) out.push_back(oriented[key]);
        return out;
    }

    std::vector<int> select_nodes(const Box& box) const {
        const double tol = 1e-9 * std::max(1.0, min_edge_length());
        std::vector<int> out;
        for (int i = 0; i < num_nodes(); ++i)
            if (box.contains(nodes[i], tol)) out.push_back(i);
        return out;
    }

    void add_node_set(const std::string& name, const Box& box) { node_sets[name] = select_nodes(box); }

    /// Registers the boundary edges whose end nodes both lie in the box, and
    /// the matching node set under the same name.
    void add_edge_set(const std::string& name, const Box& box) {
        const double tol = 1e-9 * std::max(1.0, min_edge_length());
        std::vector<std::array<int, 2>> edges;
        std::set<int> ns;
        for (const auto& e : boundary_edges())
            if (box.contains(nodes[e[0]], tol) && box.contains(nodes[e[1]], tol)) {
                edges.push_back(e);
                ns.insert(e[0]);
                ns.insert(e[1]);
            }
        edge_sets[name] = edges;
        node_sets[name] = std::vector<int>(ns.begin(), ns.end());
    }

    /// Every violated structural invariant; empty when valid.
    std::vector<std::string> violations() const;
};

/// Reference-configuration quadrature data for one element.
struct ElementGeometry {
    std::array<Eigen::Matrix<double, 4, 2>, 4> dndx_gauss; // shape gradients at the 2x2 Gauss points
    Eigen::Matrix<double, 4, 2> dndx_centroid;
    std::array<double, 4> weight;                          // quadrature weight * det J0 * thickness
    std::array<Vec2, 4> gauss_points;                      // physical coordinates
    double area = 0;                                        // reference area (no thickness)
};

namespace detail {

inline constexpr std::array<std::array<double, 2>, 4> kNodeXi{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};

inline Eigen::Matrix<double, 4, 2> shape_gradients_xi(double xi, double eta) {
    Eigen::Matrix<double, 4, 2> d;
    for (int a = 0; a < 4; ++a) {
        const double xa = kNodeXi[a][0], ya = kNodeXi[a][1];
        d(a, 0) = 0.25 * xa * (1 + eta * ya);
        d(a, 1) = 0.25 * ya * (1 + xi * xa);
    }
    return d;
}

inline Eigen::Vector4d shape_values(double xi, double eta) {
    Eigen::Vector4d n;
    for (int a = 0; a < 4; ++a) n(a) = 0.25 * (1 + xi * kNodeXi[a][0]) * (1 + eta * kNodeXi[a][1]);
    return n;
}

inline Eigen::Matrix<double, 4, 2> element_coords(const QuadMesh& m, int e) {
    Eigen::Matrix<double, 4, 2> X;
    for (int a = 0; a < 4; ++a) X.row(a) = m.nodes[m.elements[e][a]].transpose();
    return X;
}

} // namespace detail

inline constexpr double kGaussAbscissa = 0.57735026918962576451; // 1/sqrt(3)

/// Reference Jacobian determinant at (xi, eta).
inline double reference_jacobian(const QuadMesh& m, int e, double xi, double eta) {
    const auto X = detail::element_coords(m, e);
    const Mat2 J0 = X.transpose() * detail::shape_gradients_xi(xi, eta);
    return J0.determinant();
}

inline ElementGeometry element_geometry(const QuadMesh& m, int e) {
    ElementGeometry g;
    const auto X = detail::element_coords(m, e);
    auto grad = [&](double xi, double eta, double& det) {
        const auto dxi = detail::shape_gradients_xi(xi, eta);
        const Mat2 J0 = X.transpose() * dxi;
        det = J0.determinant();
        if (!(det > 0)) throw ConfigError("element " + std::to_string(e) + " has a non-positive reference Jacobian");
        return Eigen::Matrix<double, 4, 2>(dxi * J0.inverse());
    };
    int k = 0;
    for (double eta : {-kGaussAbscissa, kGaussAbscissa})
        for (double xi : {-kGaussAbscissa, kGaussAbscissa}) {
            // Order: (-,-), (+,-), then (-,+), (+,+) swapped below to run counter-clockwise.
            double det = 0;
            const int slot = (k == 2) ? 3 : (k == 3) ? 2 : k;
            g.dndx_gauss[slot] = grad(xi, eta, det);
            g.weight[slot] = det * m.thickness;
            g.gauss_points[slot] = X.transpose() * detail::shape_values(xi, eta);
            g.area += det;
            ++k;
        }
    double det_c = 0;
    g.dndx_centroid = grad(0.0, 0.0, det_c);
    return g;
}

inline std::vector<std::string> QuadMesh::violations() const {
    std::vector<std::string> v;
    if (nodes.empty()) v.push_back("mesh has no nodes");
    if (elements.empty()) v.push_back("mesh has no elements");
    if (!(thickness > 0)) v.push_back("mesh thickness must be positive");
    std::set<std::array<int, 4>> seen;
    for (int e = 0; e < num_elements(); ++e) {
        auto el = elements[e];
        bool in_range = true;
        for (int n : el)
            if (n < 0 || n >= num_nodes()) in_range = false;
        if (!in_range) {
            v.push_back("element " + std::to_string(e) + " references a node out of range");
            continue;
        }
        auto key = el;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) v.push_back("element " + std::to_string(e) + " duplicates another element");
        for (double eta : {-kGaussAbscissa, kGaussAbscissa})
            for (double xi : {-kGaussAbscissa, kGaussAbscissa})
                if (!(reference_jacobian(*this, e, xi, eta) > 0)) {
                    v.push_back("element " + std::to_string(e) + " has a non-positive Jacobian at a Gauss point");
                    xi = eta = 1e300;
                }
    }
    for (const auto& [name, set] : node_sets)
        for (int n : set)
            if (n < 0 || n >= num_nodes()) {
                v.push_back("node set '" + name + "' references a node out of range");
                break;
            }
    return v;
}

/// Structured nx-by-ny mesh of [0, lx] x [0, ly] with edge sets
/// left/right/top/bottom (and node sets of the same names).
inline QuadMesh build_rect_mesh(int nx, int ny, double lx, double ly, double thickness) {
    std::vector<std::string> v;
    if (nx < 1 || ny < 1) v.push_back("element counts must be at least 1");
    if (!(lx > 0) || !(ly > 0)) v.push_back("domain lengths must be positive");
    if (!(thickness > 0)) v.push_back("thickness must be positive");
    if (!v.empty()) throw ConfigError(v);

    QuadMesh m;
    m.thickness = thickness;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) m.nodes.emplace_back(lx * i / nx, ly * j / ny);
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});

    m.add_edge_set("left", {0, 0, 0, ly});
    m.add_edge_set("right", {lx, lx, 0, ly});
    m.add_edge_set("bottom", {0, lx, 0, 0});
    m.add_edge_set("top", {0, lx, ly, ly});
    m.node_sets["all"].resize(m.nodes.size());
    for (int i = 0; i < m.num_nodes(); ++i) m.node_sets["all"][i] = i;
    return m;
}

} // namespace swelltopo
