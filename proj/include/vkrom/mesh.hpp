#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vkrom/errors.hpp"

namespace vkrom {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Structured triangulation of the rectangle [0,L] x [0,1].
///
/// Vertex (i, j) sits at (i*L/nx, j/ny) and has index j*(nx+1) + i. Every
/// grid cell is cut along its lower-left to upper-right diagonal into the
/// counter-clockwise triangles (v00, v10, v11) and (v00, v11, v01).
struct Mesh {
    double length = 1.0;
    int nx = 0;
    int ny = 0;
    std::vector<Point> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_vertices;

    [[nodiscard]] double hx() const { return length / nx; }
    [[nodiscard]] double hy() const { return 1.0 / ny; }

    [[nodiscard]] int vertex_index(int i, int j) const { return j * (nx + 1) + i; }

    /// Grid coordinates (i, j) of a vertex.
    [[nodiscard]] std::array<int, 2> vertex_grid(int v) const { return {v % (nx + 1), v / (nx + 1)}; }

    [[nodiscard]] double signed_area(std::size_t t) const
    {
        const auto& tri = triangles[t];
        const Point& a = vertices[tri[0]];
        const Point& b = vertices[tri[1]];
        const Point& c = vertices[tri[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    [[nodiscard]] bool contains(Point p, double tol = 1e-12) const
    {
        return p.x >= -tol && p.x <= length + tol && p.y >= -tol && p.y <= 1.0 + tol;
    }

    /// Index of a triangle containing p (p must lie in the closed domain).
    [[nodiscard]] int locate(Point p) const
    {
        if (!contains(p)) {
            throw OutOfDomain("point lies outside the plate domain");
        }
        const double sx = std::clamp(p.x / hx(), 0.0, static_cast<double>(nx));
        const double sy = std::clamp(p.y / hy(), 0.0, static_cast<double>(ny));
        const int i = std::min(static_cast<int>(sx), nx - 1);
        const int j = std::min(static_cast<int>(sy), ny - 1);
        const double fx = sx - i;
        const double fy = sy - j;
        const int cell = j * nx + i;
        return 2 * cell + (fy <= fx ? 0 : 1);
    }
};

inline Mesh build_mesh(double length, int nx, int ny)
{
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw InvalidArgument("build_mesh: length must be positive");
    }
    if (nx < 1 || ny < 1) {
        throw InvalidArgument("build_mesh: subdivision counts must be at least 1");
    }

    Mesh mesh;
    mesh.length = length;
    mesh.nx = nx;
    mesh.ny = ny;
    mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            // Exact endpoints so boundary tests need no tolerance.
            const double x = (i == nx) ? length : i * length / nx;
            const double y = (j == ny) ? 1.0 : static_cast<double>(j) / ny;
            mesh.vertices.push_back({x, y});
            if (i == 0 || i == nx || j == 0 || j == ny) {
                mesh.boundary_vertices.push_back(mesh.vertex_index(i, j));
            }
        }
    }

    mesh.triangles.reserve(static_cast<std::size_t>(2) * nx * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int v00 = mesh.vertex_index(i, j);
            const int v10 = mesh.vertex_index(i + 1, j);
            const int v01 = mesh.vertex_index(i, j + 1);
            const int v11 = mesh.vertex_index(i + 1, j + 1);
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
        }
    }
    return mesh;
}

/// Maximum edge length over all triangles.
inline double mesh_size(const Mesh& mesh)
{
    double h = 0.0;
    for (const auto& tri : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const Point& a = mesh.vertices[tri[e]];
            const Point& b = mesh.vertices[tri[(e + 1) % 3]];
            h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    return h;
}

} // namespace vkrom
