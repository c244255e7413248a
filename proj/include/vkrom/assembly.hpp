#pragma once

#include <iomanip>
#include <iostream>
#include <ostream>
#include <vector>

#include <Eigen/Sparse>

#include "vkrom/errors.hpp"
#include "vkrom/fespace.hpp"

namespace vkrom {

/// Compressed-row sparse matrix over interior dofs.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Which dofs the assembled rows and columns cover.
enum class DofSet { Interior, All };

/// Which argument of the bracket carries the coefficient field z when
/// assembling M(z)_ij = int [z, E^j] E^i (FirstSlot) or int [E^j, z] E^i
/// (SecondSlot). The bracket is symmetric, so both give the same operator.
enum class BracketSlot { First, Second };

/// Zero-valued matrix carrying the space's interior coupling pattern.
inline SparseMatrix pattern_matrix(const FeSpace& space)
{
    const auto& p = space.pattern();
    const int n = space.num_interior();
    std::vector<double> zeros(p.columns.size(), 0.0);
    return Eigen::Map<const SparseMatrix>(n, n, p.nnz(), p.row_offsets.data(), p.columns.data(), zeros.data());
}

/// Generic element loop. `kernel(tab, cell, local)` fills the dense
/// nb x nb element matrix with local(a, b) = form(E_b, E_a), i.e. row a is
/// the test function and column b the trial function.
template <class Kernel>
SparseMatrix assemble_form(const FeSpace& space, Kernel&& kernel, bool with_hessians = false,
                           DofSet dofs = DofSet::Interior)
{
    const ElementTabulator tabulator(space, space.default_rule(), with_hessians);
    const int nb = space.dofs_per_cell();
    Tabulation tab;
    DenseMatrix local(nb, nb);

    if (dofs == DofSet::Interior) {
        SparseMatrix m = pattern_matrix(space);
        double* values = m.valuePtr();
        const auto& pos = space.pattern().cell_positions;
        for (int c = 0; c < space.num_cells(); ++c) {
            tabulator.tabulate(c, tab);
            local.setZero();
            kernel(tab, c, local);
            const std::size_t base = static_cast<std::size_t>(c) * nb * nb;
            for (int a = 0; a < nb; ++a) {
                for (int b = 0; b < nb; ++b) {
                    const int k = pos[base + a * nb + b];
                    if (k >= 0) {
                        values[k] += local(a, b);
                    }
                }
            }
        }
        return m;
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(space.num_cells()) * nb * nb);
    for (int c = 0; c < space.num_cells(); ++c) {
        tabulator.tabulate(c, tab);
        local.setZero();
        kernel(tab, c, local);
        const auto cd = space.cell_dofs(c);
        for (int a = 0; a < nb; ++a) {
            for (int b = 0; b < nb; ++b) {
                triplets.emplace_back(cd[a], cd[b], local(a, b));
            }
        }
    }
    SparseMatrix m(space.num_dofs(), space.num_dofs());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

/// (A)_ij = int grad E^j . grad E^i
inline SparseMatrix assemble_stiffness(const FeSpace& space, DofSet dofs = DofSet::Interior)
{
    return assemble_form(
        space,
        [](const Tabulation& t, int, DenseMatrix& local) {
            for (int q = 0; q < t.num_points; ++q) {
                for (int a = 0; a < t.num_basis; ++a) {
                    for (int b = 0; b < t.num_basis; ++b) {
                        local(a, b) += t.jxw[q] * (t.dx(q, a) * t.dx(q, b) + t.dy(q, a) * t.dy(q, b));
                    }
                }
            }
        },
        false, dofs);
}

/// (B)_ij = int E^j E^i
inline SparseMatrix assemble_mass(const FeSpace& space, DofSet dofs = DofSet::Interior)
{
    return assemble_form(
        space,
        [](const Tabulation& t, int, DenseMatrix& local) {
            for (int q = 0; q < t.num_points; ++q) {
                for (int a = 0; a < t.num_basis; ++a) {
                    for (int b = 0; b < t.num_basis; ++b) {
                        local(a, b) += t.jxw[q] * t.value(q, a) * t.value(q, b);
                    }
                }
            }
        },
        false, dofs);
}

/// int w(x, y) dx E^j dx E^i for a pointwise weight w.
template <class Weight>
SparseMatrix assemble_weighted_x_stiffness(const FeSpace& space, Weight&& weight)
{
    return assemble_form(space, [&weight](const Tabulation& t, int, DenseMatrix& local) {
        for (int q = 0; q < t.num_points; ++q) {
            const double w = t.jxw[q] * weight(t.points[q].x, t.points[q].y);
            for (int a = 0; a < t.num_basis; ++a) {
                for (int b = 0; b < t.num_basis; ++b) {
                    local(a, b) += w * t.dx(q, a) * t.dx(q, b);
                }
            }
        }
    });
}

/// In-plane compression operator D(psi)_ij = int (1 - psi y / L) dx E^j dx E^i,
/// the weak form of -div(sigma(psi) grad u) with sigma = diag(1 - psi y/L, 0).
inline SparseMatrix assemble_load_matrix(const FeSpace& space, double psi)
{
    if (psi < 0.0 || psi > 2.0) {
        std::clog << "warning: load-shape parameter psi = " << psi << " lies outside [0, 2]\n";
    }
    const double length = space.mesh().length;
    return assemble_weighted_x_stiffness(space, [psi, length](double, double y) { return 1.0 - psi * y / length; });
}

namespace detail {

// Hessian (xx, xy, yy) of a field at quadrature point q.
inline std::array<double, 3> field_hessian(const Tabulation& t, int q, std::span<const int> dofs, const Vector& full)
{
    std::array<double, 3> h{0.0, 0.0, 0.0};
    for (int a = 0; a < t.num_basis; ++a) {
        const double c = full[dofs[a]];
        h[0] += c * t.dxx(q, a);
        h[1] += c * t.dxy(q, a);
        h[2] += c * t.dyy(q, a);
    }
    return h;
}

// Monge-Ampere bracket [f, g] = f_xx g_yy - 2 f_xy g_xy + f_yy g_xx.
inline double bracket(const std::array<double, 3>& f, const std::array<double, 3>& g)
{
    return f[0] * g[2] - 2.0 * f[1] * g[1] + f[2] * g[0];
}

} // namespace detail

/// M(z)_ij = int [z, E^j] E^i for z given on all dofs (boundary included),
/// second derivatives taken element by element.
inline SparseMatrix assemble_bracket(const FeSpace& space, const Vector& z_full, BracketSlot slot = BracketSlot::First)
{
    if (space.degree() < 2) {
        throw UnsupportedOperation("assemble_bracket: P1 fields have no element-wise second derivatives");
    }
    if (z_full.size() != space.num_dofs()) {
        throw InvalidArgument("assemble_bracket: coefficient vector must cover all dofs");
    }
    return assemble_form(
        space,
        [&space, &z_full, slot](const Tabulation& t, int cell, DenseMatrix& local) {
            const auto dofs = space.cell_dofs(cell);
            for (int q = 0; q < t.num_points; ++q) {
                const auto hz = detail::field_hessian(t, q, dofs, z_full);
                for (int b = 0; b < t.num_basis; ++b) {
                    const std::array<double, 3> hb{t.dxx(q, b), t.dxy(q, b), t.dyy(q, b)};
                    const double br = slot == BracketSlot::First ? detail::bracket(hz, hb) : detail::bracket(hb, hz);
                    const double w = t.jxw[q] * br;
                    for (int a = 0; a < t.num_basis; ++a) {
                        local(a, b) += w * t.value(q, a);
                    }
                }
            }
        },
        true);
}

inline SparseMatrix assemble_bracket(const ScalarField& z, BracketSlot slot = BracketSlot::First)
{
    return assemble_bracket(*z.space, to_full(*z.space, z.coeffs), slot);
}

/// r_i = int [z, w] E^i without forming a matrix.
inline Vector bracket_vector(const FeSpace& space, const Vector& z_full, const Vector& w_full)
{
    if (space.degree() < 2) {
        throw UnsupportedOperation("bracket_vector: P1 fields have no element-wise second derivatives");
    }
    const ElementTabulator tabulator(space, space.default_rule(), true);
    Tabulation tab;
    Vector r = Vector::Zero(space.num_interior());
    for (int c = 0; c < space.num_cells(); ++c) {
        tabulator.tabulate(c, tab);
        const auto dofs = space.cell_dofs(c);
        for (int q = 0; q < tab.num_points; ++q) {
            const double br = detail::bracket(detail::field_hessian(tab, q, dofs, z_full),
                                              detail::field_hessian(tab, q, dofs, w_full));
            for (int a = 0; a < tab.num_basis; ++a) {
                const int i = space.interior_index(dofs[a]);
                if (i >= 0) {
                    r[i] += tab.jxw[q] * br * tab.value(q, a);
                }
            }
        }
    }
    return r;
}

/// The lambda- and psi-independent operators of the plate problem.
/// D(psi) is affine: D(psi) = load_uniform - psi * load_gradient.
struct PlateOperators {
    SpacePtr space;
    SparseMatrix stiffness;     ///< A
    SparseMatrix mass;          ///< B
    SparseMatrix load_uniform;  ///< int dx E^j dx E^i
    SparseMatrix load_gradient; ///< int (y/L) dx E^j dx E^i

    [[nodiscard]] SparseMatrix load(double psi) const { return load_uniform - psi * load_gradient; }
    [[nodiscard]] int size() const { return space->num_interior(); }
};

inline PlateOperators make_operators(const SpacePtr& space)
{
    const double length = space->mesh().length;
    PlateOperators ops;
    ops.space = space;
    ops.stiffness = assemble_stiffness(*space);
    ops.mass = assemble_mass(*space);
    ops.load_uniform = assemble_weighted_x_stiffness(*space, [](double, double) { return 1.0; });
    ops.load_gradient = assemble_weighted_x_stiffness(*space, [length](double, double y) { return y / length; });
    return ops;
}

/// Coordinate text export: one "row col value" line per stored entry,
/// zero-based indices.
inline void write_coordinate(std::ostream& os, const SparseMatrix& m)
{
    os << "% " << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    os << std::setprecision(17);
    for (int r = 0; r < m.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
}

} // namespace vkrom
