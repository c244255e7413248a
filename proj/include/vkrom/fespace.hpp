#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vkrom/errors.hpp"
#include "vkrom/mesh.hpp"
#include "vkrom/quadrature.hpp"

namespace vkrom {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Lagrange basis of degree r on a triangle, written in barycentric
/// coordinates: phi_alpha = prod_k P_{alpha_k}(lambda_k) with
/// P_a(t) = prod_{j<a} (r t - j) / (j + 1). The node of phi_alpha sits at
/// barycentric position alpha / r.
class LagrangeBasis {
public:
    explicit LagrangeBasis(int degree) : degree_(degree)
    {
        if (degree < 1 || degree > 3) {
            throw InvalidArgument("LagrangeBasis: degree must be 1, 2 or 3");
        }
        // Vertices first, then the remaining lattice points.
        nodes_.push_back({degree, 0, 0});
        nodes_.push_back({0, degree, 0});
        nodes_.push_back({0, 0, degree});
        for (int a = degree; a >= 0; --a) {
            for (int b = degree - a; b >= 0; --b) {
                const int c = degree - a - b;
                if (a == degree || b == degree || c == degree) {
                    continue;
                }
                nodes_.push_back({a, b, c});
            }
        }
    }

    [[nodiscard]] int degree() const { return degree_; }
    [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] const std::vector<std::array<int, 3>>& nodes() const { return nodes_; }

    /// Value, barycentric gradient and barycentric Hessian of every basis
    /// function at one barycentric point.
    struct Eval {
        std::vector<double> value;                         // [a]
        std::vector<std::array<double, 3>> grad;           // [a][k]
        std::vector<std::array<std::array<double, 3>, 3>> hess; // [a][k][l]
    };

    [[nodiscard]] Eval evaluate(const std::array<double, 3>& bary) const
    {
        const int n = size();
        Eval out;
        out.value.resize(n);
        out.grad.resize(n);
        out.hess.resize(n);
        for (int a = 0; a < n; ++a) {
            std::array<std::array<double, 3>, 3> p{}; // p[k] = {P, P', P''} at bary[k]
            for (int k = 0; k < 3; ++k) {
                p[k] = univariate(nodes_[a][k], bary[k]);
            }
            out.value[a] = p[0][0] * p[1][0] * p[2][0];
            for (int k = 0; k < 3; ++k) {
                double g = p[k][1];
                for (int m = 0; m < 3; ++m) {
                    if (m != k) {
                        g *= p[m][0];
                    }
                }
                out.grad[a][k] = g;
                for (int l = 0; l < 3; ++l) {
                    double h = 1.0;
                    if (k == l) {
                        h = p[k][2];
                        for (int m = 0; m < 3; ++m) {
                            if (m != k) {
                                h *= p[m][0];
                            }
                        }
                    } else {
                        h = p[k][1] * p[l][1];
                        for (int m = 0; m < 3; ++m) {
                            if (m != k && m != l) {
                                h *= p[m][0];
                            }
                        }
                    }
                    out.hess[a][k][l] = h;
                }
            }
        }
        return out;
    }

private:
    // {P_a(t), P_a'(t), P_a''(t)} by forward-mode product rule.
    [[nodiscard]] std::array<double, 3> univariate(int a, double t) const
    {
        double v = 1.0;
        double d1 = 0.0;
        double d2 = 0.0;
        for (int j = 0; j < a; ++j) {
            const double f = (degree_ * t - j) / (j + 1);
            const double df = static_cast<double>(degree_) / (j + 1);
            d2 = d2 * f + 2.0 * d1 * df;
            d1 = d1 * f + v * df;
            v *= f;
        }
        return {v, d1, d2};
    }

    int degree_;
    std::vector<std::array<int, 3>> nodes_;
};

/// Per-element tabulation at quadrature points. Hessian entries are stored
/// as (xx, xy, yy).
struct Tabulation {
    int num_points = 0;
    int num_basis = 0;
    std::vector<Point> points;
    std::vector<double> jxw;
    std::vector<double> values;   // [q * nb + a]
    std::vector<double> grads;    // [(q * nb + a) * 2 + d]
    std::vector<double> hessians; // [(q * nb + a) * 3 + c]

    [[nodiscard]] double value(int q, int a) const { return values[q * num_basis + a]; }
    [[nodiscard]] double dx(int q, int a) const { return grads[(q * num_basis + a) * 2]; }
    [[nodiscard]] double dy(int q, int a) const { return grads[(q * num_basis + a) * 2 + 1]; }
    [[nodiscard]] double dxx(int q, int a) const { return hessians[(q * num_basis + a) * 3]; }
    [[nodiscard]] double dxy(int q, int a) const { return hessians[(q * num_basis + a) * 3 + 1]; }
    [[nodiscard]] double dyy(int q, int a) const { return hessians[(q * num_basis + a) * 3 + 2]; }
};

/// Compressed-row sparsity of the interior-dof coupling graph, shared by
/// every assembled operator, together with the scatter position of each
/// element-local entry.
struct InteriorPattern {
    std::vector<int> row_offsets;
    std::vector<int> columns;
    std::vector<int> cell_positions; // [cell * nb * nb + a * nb + b], -1 if a or b is on the boundary

    [[nodiscard]] int nnz() const { return static_cast<int>(columns.size()); }
};

/// Continuous Lagrange space of degree r on a structured mesh.
///
/// Because every element is cut from the same grid, the Lagrange nodes of
/// all elements lie on the refined lattice with spacing (hx/r, hy/r); each
/// lattice point is exactly one global dof with index gj*(r*nx+1) + gi.
class FeSpace {
public:
    FeSpace(Mesh mesh, int degree) : mesh_(std::move(mesh)), basis_(degree)
    {
        const int r = degree;
        stride_ = r * mesh_.nx + 1;
        const int rows = r * mesh_.ny + 1;
        const int ndofs = stride_ * rows;

        dof_coords_.resize(ndofs);
        interior_index_.assign(ndofs, -1);
        for (int gj = 0; gj < rows; ++gj) {
            for (int gi = 0; gi < stride_; ++gi) {
                const int d = gj * stride_ + gi;
                dof_coords_[d] = {gi == stride_ - 1 ? mesh_.length : gi * mesh_.length / (r * mesh_.nx),
                                  gj == rows - 1 ? 1.0 : static_cast<double>(gj) / (r * mesh_.ny)};
                const bool on_boundary = gi == 0 || gj == 0 || gi == stride_ - 1 || gj == rows - 1;
                if (on_boundary) {
                    boundary_dofs_.push_back(d);
                } else {
                    interior_index_[d] = static_cast<int>(interior_dofs_.size());
                    interior_dofs_.push_back(d);
                }
            }
        }

        const int nb = basis_.size();
        cell_dofs_.resize(mesh_.triangles.size() * nb);
        for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
            const auto& tri = mesh_.triangles[t];
            for (int a = 0; a < nb; ++a) {
                const auto& alpha = basis_.nodes()[a];
                int gi = 0;
                int gj = 0;
                for (int k = 0; k < 3; ++k) {
                    const auto ij = mesh_.vertex_grid(tri[k]);
                    gi += alpha[k] * ij[0];
                    gj += alpha[k] * ij[1];
                }
                cell_dofs_[t * nb + a] = gj * stride_ + gi;
            }
        }

        build_gradients();
        build_pattern();
        default_rule_ = triangle_rule(2 * degree);
    }

    [[nodiscard]] const Mesh& mesh() const { return mesh_; }
    [[nodiscard]] int degree() const { return basis_.degree(); }
    [[nodiscard]] const LagrangeBasis& basis() const { return basis_; }
    [[nodiscard]] int num_dofs() const { return static_cast<int>(dof_coords_.size()); }
    [[nodiscard]] int num_interior() const { return static_cast<int>(interior_dofs_.size()); }
    [[nodiscard]] int num_cells() const { return static_cast<int>(mesh_.triangles.size()); }
    [[nodiscard]] int dofs_per_cell() const { return basis_.size(); }
    [[nodiscard]] const std::vector<Point>& dof_coords() const { return dof_coords_; }
    [[nodiscard]] const std::vector<int>& interior_dofs() const { return interior_dofs_; }
    [[nodiscard]] const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }
    [[nodiscard]] const QuadratureRule& default_rule() const { return default_rule_; }
    [[nodiscard]] const InteriorPattern& pattern() const { return pattern_; }

    /// Global dofs of a cell, in local basis order.
    [[nodiscard]] std::span<const int> cell_dofs(int cell) const
    {
        const int nb = dofs_per_cell();
        return {cell_dofs_.data() + static_cast<std::size_t>(cell) * nb, static_cast<std::size_t>(nb)};
    }

    /// Interior index of a global dof, or -1 for boundary dofs.
    [[nodiscard]] int interior_index(int dof) const { return interior_index_[dof]; }

    /// Gradients of the three barycentric coordinates on a cell.
    [[nodiscard]] const std::array<std::array<double, 2>, 3>& bary_gradients(int cell) const
    {
        return bary_grads_[cell];
    }

private:
    void build_gradients()
    {
        bary_grads_.resize(mesh_.triangles.size());
        for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
            const auto& tri = mesh_.triangles[t];
            const Point& p0 = mesh_.vertices[tri[0]];
            const Point& p1 = mesh_.vertices[tri[1]];
            const Point& p2 = mesh_.vertices[tri[2]];
            const double j11 = p1.x - p0.x;
            const double j12 = p2.x - p0.x;
            const double j21 = p1.y - p0.y;
            const double j22 = p2.y - p0.y;
            const double det = j11 * j22 - j12 * j21;
            // Rows of the inverse Jacobian are the gradients of xi and eta.
            const std::array<double, 2> gxi{j22 / det, -j12 / det};
            const std::array<double, 2> geta{-j21 / det, j11 / det};
            bary_grads_[t] = {std::array<double, 2>{-gxi[0] - geta[0], -gxi[1] - geta[1]}, gxi, geta};
        }
    }

    void build_pattern()
    {
        const int n = num_interior();
        const int nb = dofs_per_cell();
        std::vector<std::vector<int>> rows(n);
        for (int c = 0; c < num_cells(); ++c) {
            const auto dofs = cell_dofs(c);
            for (int a = 0; a < nb; ++a) {
                const int ia = interior_index_[dofs[a]];
                if (ia < 0) {
                    continue;
                }
                for (int b = 0; b < nb; ++b) {
                    const int ib = interior_index_[dofs[b]];
                    if (ib >= 0) {
                        rows[ia].push_back(ib);
                    }
                }
            }
        }
        pattern_.row_offsets.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) {
            auto& r = rows[i];
            std::sort(r.begin(), r.end());
            r.erase(std::unique(r.begin(), r.end()), r.end());
            pattern_.row_offsets[i + 1] = pattern_.row_offsets[i] + static_cast<int>(r.size());
        }
        pattern_.columns.reserve(pattern_.row_offsets[n]);
        for (const auto& r : rows) {
            pattern_.columns.insert(pattern_.columns.end(), r.begin(), r.end());
        }

        pattern_.cell_positions.assign(static_cast<std::size_t>(num_cells()) * nb * nb, -1);
        for (int c = 0; c < num_cells(); ++c) {
            const auto dofs = cell_dofs(c);
            for (int a = 0; a < nb; ++a) {
                const int ia = interior_index_[dofs[a]];
                if (ia < 0) {
                    continue;
                }
                const auto begin = pattern_.columns.begin() + pattern_.row_offsets[ia];
                const auto end = pattern_.columns.begin() + pattern_.row_offsets[ia + 1];
                for (int b = 0; b < nb; ++b) {
                    const int ib = interior_index_[dofs[b]];
                    if (ib < 0) {
                        continue;
                    }
                    const auto it = std::lower_bound(begin, end, ib);
                    pattern_.cell_positions[(static_cast<std::size_t>(c) * nb + a) * nb + b] =
                        static_cast<int>(it - pattern_.columns.begin());
                }
            }
        }
    }

    Mesh mesh_;
    LagrangeBasis basis_;
    int stride_ = 0;
    std::vector<Point> dof_coords_;
    std::vector<int> interior_index_;
    std::vector<int> interior_dofs_;
    std::vector<int> boundary_dofs_;
    std::vector<int> cell_dofs_;
    std::vector<std::array<std::array<double, 2>, 3>> bary_grads_;
    InteriorPattern pattern_;
    QuadratureRule default_rule_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

inline SpacePtr build_space(const Mesh& mesh, int degree = 2)
{
    if (degree < 1 || degree > 3) {
        throw InvalidArgument("build_space: degree must be 1, 2 or 3");
    }
    return std::make_shared<const FeSpace>(mesh, degree);
}

/// Evaluates basis values and physical derivatives cell by cell. The
/// reference-level tables are computed once per rule; tabulate() fills a
/// caller-owned Tabulation so element loops carry no allocation.
class ElementTabulator {
public:
    ElementTabulator(const FeSpace& space, const QuadratureRule& rule, bool with_hessians = true)
        : space_(&space), rule_(rule), with_hessians_(with_hessians)
    {
        if (with_hessians && space.degree() < 2) {
            throw UnsupportedOperation("second derivatives of P1 basis functions vanish identically");
        }
        reference_.reserve(rule_.size());
        for (const auto& bary : rule_.points) {
            reference_.push_back(space.basis().evaluate(bary));
        }
    }

    void tabulate(int cell, Tabulation& out) const
    {
        const int nq = static_cast<int>(rule_.size());
        const int nb = space_->dofs_per_cell();
        out.num_points = nq;
        out.num_basis = nb;
        out.points.resize(nq);
        out.jxw.resize(nq);
        out.values.resize(static_cast<std::size_t>(nq) * nb);
        out.grads.resize(static_cast<std::size_t>(nq) * nb * 2);
        out.hessians.assign(with_hessians_ ? static_cast<std::size_t>(nq) * nb * 3 : 0, 0.0);

        const Mesh& mesh = space_->mesh();
        const auto& tri = mesh.triangles[cell];
        const double area = std::abs(mesh.signed_area(cell));
        const auto& g = space_->bary_gradients(cell);

        for (int q = 0; q < nq; ++q) {
            const auto& bary = rule_.points[q];
            Point x{};
            for (int k = 0; k < 3; ++k) {
                x.x += bary[k] * mesh.vertices[tri[k]].x;
                x.y += bary[k] * mesh.vertices[tri[k]].y;
            }
            out.points[q] = x;
            out.jxw[q] = area * rule_.weights[q];

            const auto& ref = reference_[q];
            for (int a = 0; a < nb; ++a) {
                const std::size_t qa = static_cast<std::size_t>(q) * nb + a;
                out.values[qa] = ref.value[a];
                double gx = 0.0;
                double gy = 0.0;
                for (int k = 0; k < 3; ++k) {
                    gx += ref.grad[a][k] * g[k][0];
                    gy += ref.grad[a][k] * g[k][1];
                }
                out.grads[qa * 2] = gx;
                out.grads[qa * 2 + 1] = gy;
                if (with_hessians_) {
                    double hxx = 0.0;
                    double hxy = 0.0;
                    double hyy = 0.0;
                    for (int k = 0; k < 3; ++k) {
                        for (int l = 0; l < 3; ++l) {
                            const double h = ref.hess[a][k][l];
                            hxx += h * g[k][0] * g[l][0];
                            hxy += h * g[k][0] * g[l][1];
                            hyy += h * g[k][1] * g[l][1];
                        }
                    }
                    out.hessians[qa * 3] = hxx;
                    out.hessians[qa * 3 + 1] = hxy;
                    out.hessians[qa * 3 + 2] = hyy;
                }
            }
        }
    }

    [[nodiscard]] const QuadratureRule& rule() const { return rule_; }

private:
    const FeSpace* space_;
    QuadratureRule rule_;
    bool with_hessians_;
    std::vector<LagrangeBasis::Eval> reference_;
};

inline Tabulation tabulate(const FeSpace& space, int cell, const QuadratureRule& rule, bool with_hessians = true)
{
    Tabulation tab;
    ElementTabulator(space, rule, with_hessians).tabulate(cell, tab);
    return tab;
}

/// Discrete scalar field with homogeneous Dirichlet data: coefficients live
/// on interior dofs only, boundary values are implicitly zero.
struct ScalarField {
    SpacePtr space;
    Vector coeffs;

    ScalarField() = default;
    explicit ScalarField(SpacePtr s) : space(std::move(s)), coeffs(Vector::Zero(space->num_interior())) {}
    ScalarField(SpacePtr s, Vector c) : space(std::move(s)), coeffs(std::move(c))
    {
        if (coeffs.size() != space->num_interior()) {
            throw InvalidArgument("ScalarField: coefficient count does not match interior dofs");
        }
    }
};

/// Interior coefficients extended by zero to every dof.
inline Vector to_full(const FeSpace& space, const Vector& interior)
{
    Vector full = Vector::Zero(space.num_dofs());
    const auto& dofs = space.interior_dofs();
    for (std::size_t i = 0; i < dofs.size(); ++i) {
        full[dofs[i]] = interior[static_cast<Eigen::Index>(i)];
    }
    return full;
}

/// Lagrange interpolant on all dofs, boundary included.
inline Vector interpolate_full(const FeSpace& space, const std::function<double(double, double)>& f)
{
    Vector full(space.num_dofs());
    for (int d = 0; d < space.num_dofs(); ++d) {
        const Point& p = space.dof_coords()[d];
        full[d] = f(p.x, p.y);
    }
    return full;
}

inline ScalarField interpolate(const SpacePtr& space, const std::function<double(double, double)>& f)
{
    Vector c(space->num_interior());
    const auto& dofs = space->interior_dofs();
    for (std::size_t i = 0; i < dofs.size(); ++i) {
        const Point& p = space->dof_coords()[dofs[i]];
        c[static_cast<Eigen::Index>(i)] = f(p.x, p.y);
    }
    return {space, std::move(c)};
}

/// |f|_{H^1} computed cell by cell with the space's quadrature.
inline double h1_seminorm(const FeSpace& space, const Vector& interior)
{
    const Vector full = to_full(space, interior);
    const ElementTabulator tabulator(space, space.default_rule(), false);
    Tabulation tab;
    double sum = 0.0;
    for (int c = 0; c < space.num_cells(); ++c) {
        tabulator.tabulate(c, tab);
        const auto dofs = space.cell_dofs(c);
        for (int q = 0; q < tab.num_points; ++q) {
            double gx = 0.0;
            double gy = 0.0;
            for (int a = 0; a < tab.num_basis; ++a) {
                gx += full[dofs[a]] * tab.dx(q, a);
                gy += full[dofs[a]] * tab.dy(q, a);
            }
            sum += tab.jxw[q] * (gx * gx + gy * gy);
        }
    }
    return std::sqrt(sum);
}

inline double h1_seminorm(const ScalarField& field) { return h1_seminorm(*field.space, field.coeffs); }

struct SignedMax {
    double value = 0.0; ///< signed coefficient of largest magnitude
    int dof = -1;       ///< interior index of that coefficient
};

/// First coefficient of largest magnitude (ties resolve to the lowest index).
inline SignedMax max_abs(const Vector& coeffs)
{
    SignedMax out;
    double best = -1.0;
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
        if (std::abs(coeffs[i]) > best) {
            best = std::abs(coeffs[i]);
            out = {coeffs[i], static_cast<int>(i)};
        }
    }
    if (coeffs.size() == 0) {
        out.value = 0.0;
    }
    return out;
}

inline SignedMax max_abs(const ScalarField& field) { return max_abs(field.coeffs); }

/// Point evaluation by element-local polynomial evaluation.
inline double eval(const FeSpace& space, const Vector& full_coeffs, Point p)
{
    const Mesh& mesh = space.mesh();
    const int cell = mesh.locate(p); // throws OutOfDomain
    const auto& tri = mesh.triangles[cell];
    const auto& g = space.bary_gradients(cell);
    const Point& p0 = mesh.vertices[tri[0]];
    const double l1 = g[1][0] * (p.x - p0.x) + g[1][1] * (p.y - p0.y);
    const double l2 = g[2][0] * (p.x - p0.x) + g[2][1] * (p.y - p0.y);
    const auto e = space.basis().evaluate({1.0 - l1 - l2, l1, l2});
    const auto dofs = space.cell_dofs(cell);
    double v = 0.0;
    for (int a = 0; a < space.dofs_per_cell(); ++a) {
        v += full_coeffs[dofs[a]] * e.value[a];
    }
    return v;
}

inline double eval(const ScalarField& field, Point p)
{
    return eval(*field.space, to_full(*field.space, field.coeffs), p);
}

} // namespace vkrom
