#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "swelltopo/fem/mesh.hpp"

namespace swelltopo {

using CellField = std::pair<std::string, std::vector<double>>;

/// Legacy ASCII VTK unstructured grid: quads (type 9), displacement as point
/// vectors and any number of cell scalars. Points are the reference
/// coordinates unless deformed is set.
inline void write_vtk(std::ostream& os, const QuadMesh& mesh, const Eigen::VectorXd& u,
                      const std::vector<CellField>& cell_fields, const std::string& title = "swelltopo", bool deformed = false) {
    char buf[128];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.9g", x);
        return std::string(buf);
    };
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.num_nodes() << " double\n";
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        const double dx = deformed ? u(2 * n) : 0.0, dy = deformed ? u(2 * n + 1) : 0.0;
        os << num(mesh.nodes[n].x() + dx) << ' ' << num(mesh.nodes[n].y() + dy) << " 0\n";
    }
    const int ne = mesh.num_elements();
    os << "CELLS " << ne << ' ' << 5 * ne << '\n';
    for (const auto& el : mesh.elements) os << "4 " << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[3] << '\n';
    os << "CELL_TYPES " << ne << '\n';
    for (int e = 0; e < ne; ++e) os << "9\n";
    os << "POINT_DATA " << mesh.num_nodes() << "\nVECTORS u double\n";
    for (int n = 0; n < mesh.num_nodes(); ++n) os << num(u(2 * n)) << ' ' << num(u(2 * n + 1)) << " 0\n";
    if (cell_fields.empty()) return;
    os << "CELL_DATA " << ne << '\n';
    for (const auto& [name, values] : cell_fields) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : values) os << num(v) << '\n';
    }
}

} // namespace swelltopo
