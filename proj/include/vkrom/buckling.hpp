#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "vkrom/assembly.hpp"
#include "vkrom/errors.hpp"
#include "vkrom/fespace.hpp"
#include "vkrom/sparse_lu.hpp"

namespace vkrom {

struct EigenPair {
    double value = 0.0;
    ScalarField mode; ///< u-component, unit H1 seminorm, positive at the first significant dof
};

class EigensolverFailure : public std::runtime_error {
public:
    EigensolverFailure(const std::string& what, std::vector<EigenPair> partial)
        : std::runtime_error(what), partial_(std::move(partial))
    {
    }
    [[nodiscard]] const std::vector<EigenPair>& partial() const { return partial_; }

private:
    std::vector<EigenPair> partial_;
};

/// Closed-form buckling load of the simply supported plate [0,L]x[0,1]
/// under uniform compression: (pi/L)^2 (m + n^2 L^2 / m)^2.
inline double exact_eigenvalue(int m, int n, double length)
{
    if (m < 1 || n < 1 || !(length > 0.0)) {
        throw InvalidArgument("exact_eigenvalue: need m, n >= 1 and L > 0");
    }
    const double k = std::numbers::pi / length;
    const double s = m + n * n * length * length / m;
    return k * k * s * s;
}

/// Interpolant of sin(m pi x / L) sin(n pi y).
inline ScalarField exact_eigenfunction(int m, int n, double length, const SpacePtr& space)
{
    return interpolate(space, [=](double x, double y) {
        return std::sin(m * std::numbers::pi * x / length) * std::sin(n * std::numbers::pi * y);
    });
}

/// Least-squares slope of log|value - exact| against log(mesh_size).
/// Empty when some error is below 1e-12 (exact reproduction, order undefined).
inline std::optional<double> convergence_order(const std::vector<std::pair<double, double>>& values_by_mesh,
                                               double exact)
{
    if (values_by_mesh.size() < 3) {
        throw InvalidArgument("convergence_order: need at least three mesh sizes");
    }
    for (std::size_t i = 1; i < values_by_mesh.size(); ++i) {
        if (!(values_by_mesh[i].first < values_by_mesh[i - 1].first)) {
            throw InvalidArgument("convergence_order: mesh sizes must be strictly decreasing");
        }
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [h, v] : values_by_mesh) {
        const double err = std::abs(v - exact);
        if (err < 1e-12) {
            return std::nullopt;
        }
        const double lx = std::log(h);
        const double ly = std::log(err);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(values_by_mesh.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Groups ascending values whose relative spacing is below rel_tol.
/// Returns (representative value, multiplicity) per cluster.
inline std::vector<std::pair<double, int>> cluster_values(const std::vector<double>& sorted, double rel_tol = 1e-6)
{
    std::vector<std::pair<double, int>> out;
    for (double v : sorted) {
        if (!out.empty() && std::abs(v - out.back().first) <= rel_tol * std::abs(v)) {
            ++out.back().second;
        } else {
            out.emplace_back(v, 1);
        }
    }
    return out;
}

namespace detail {

using ColMatrix = Eigen::SparseMatrix<double>;
using BlockOp = std::function<DenseMatrix(const DenseMatrix&)>;

struct RitzResult {
    Eigen::VectorXd values; // ordered by preference
    DenseMatrix vectors;    // G-orthonormal
    DenseMatrix g_vectors;  // G * vectors
    DenseMatrix k_vectors;  // K * vectors
    int iterations = 0;
    int converged = 0;      // number of leading wanted pairs that met the tolerance
};

/// Block inverse iteration with Gram-Schmidt orthonormalization in the
/// G inner product and Rayleigh-Ritz on the symmetric pencil (K, G).
/// T must be G-self-adjoint with the same eigenvectors as the pencil.
/// `preferred(a, b)` orders Ritz values; `accepted(theta)` filters which of
/// them count as wanted; `residual_ok(theta, x, Gx, Kx)` judges convergence.
inline RitzResult subspace_iteration(Eigen::Index n, int block, int wanted, const BlockOp& apply_t,
                                     const BlockOp& apply_g, const BlockOp& apply_k,
                                     const std::function<bool(double, double)>& preferred,
                                     const std::function<bool(double)>& accepted,
                                     const std::function<bool(double, const Vector&, const Vector&, const Vector&)>& residual_ok,
                                     int max_iter, const DenseMatrix* start = nullptr)
{
    std::mt19937_64 rng(20240917);
    std::normal_distribution<double> dist;
    DenseMatrix x(n, block);
    for (Eigen::Index j = 0; j < block; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, j) = dist(rng);
        }
    }
    if (start != nullptr) {
        const Eigen::Index c = std::min<Eigen::Index>(start->cols(), block);
        x.leftCols(c) = start->leftCols(c);
    }

    RitzResult res;
    for (int it = 1; it <= max_iter; ++it) {
        DenseMatrix q = apply_t(x);
        DenseMatrix gq = apply_g(q);
        // Modified Gram-Schmidt in the G inner product, two passes.
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < block; ++j) {
                for (Eigen::Index i = 0; i < j; ++i) {
                    const double r = gq.col(i).dot(q.col(j));
                    q.col(j) -= r * q.col(i);
                    gq.col(j) -= r * gq.col(i);
                }
                const double nrm = std::sqrt(std::max(q.col(j).dot(gq.col(j)), 0.0));
                if (nrm == 0.0 || !std::isfinite(nrm)) {
                    throw DegenerateInput("subspace iteration: block lost rank");
                }
                q.col(j) /= nrm;
                gq.col(j) /= nrm;
            }
            if (pass == 0) {
                gq = apply_g(q); // refresh to remove drift from the recurrences
            }
        }
        const DenseMatrix kq = apply_k(q);
        DenseMatrix h = q.transpose() * kq;
        h = 0.5 * (h + h.transpose()).eval();
        const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);

        std::vector<int> order(block);
        for (int i = 0; i < block; ++i) {
            order[i] = i;
        }
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const bool aa = accepted(es.eigenvalues()[a]);
            const bool ab = accepted(es.eigenvalues()[b]);
            if (aa != ab) {
                return aa;
            }
            return preferred(es.eigenvalues()[a], es.eigenvalues()[b]);
        });
        DenseMatrix c(block, block);
        res.values.resize(block);
        for (int i = 0; i < block; ++i) {
            c.col(i) = es.eigenvectors().col(order[i]);
            res.values[i] = es.eigenvalues()[order[i]];
        }
        res.vectors = q * c;
        res.g_vectors = gq * c;
        res.k_vectors = kq * c;
        res.iterations = it;

        int ok = 0;
        while (ok < wanted && accepted(res.values[ok]) &&
               residual_ok(res.values[ok], res.vectors.col(ok), res.g_vectors.col(ok), res.k_vectors.col(ok))) {
            ++ok;
        }
        res.converged = ok;
        if (ok == wanted) {
            break;
        }
        x = res.vectors;
    }
    return res;
}

template <class Solver>
DenseMatrix solve_columns(const Solver& solver, const DenseMatrix& rhs)
{
    DenseMatrix out(rhs.rows(), rhs.cols());
    for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
        out.col(j) = solver.solve(Vector(rhs.col(j)));
    }
    return out;
}

/// Unit H1 seminorm and sign fixed by the first dof with |value| > 1e-8.
inline Vector normalize_mode(const SparseMatrix& stiffness, Vector v)
{
    v /= std::sqrt(v.dot(stiffness * v));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-8) {
            if (v[i] < 0.0) {
                v = -v;
            }
            break;
        }
    }
    return v;
}

} // namespace detail

struct EigenOptions {
    double tol = 1e-8;
    int max_iter = 500;
    int extra_vectors = 8;
};

/// Factorizations of the psi-independent operators used by both
/// eigenproblems: the mixed Schur operator S = A B^{-1} A is applied
/// implicitly through sparse Cholesky factors of A and B.
class SchurOperator {
public:
    explicit SchurOperator(const PlateOperators& ops) : ops_(&ops)
    {
        a_.compute(detail::ColMatrix(ops.stiffness));
        b_.compute(detail::ColMatrix(ops.mass));
        if (a_.info() != Eigen::Success || b_.info() != Eigen::Success) {
            throw SingularSystem("SchurOperator: stiffness or mass factorization failed");
        }
    }

    [[nodiscard]] const PlateOperators& operators() const { return *ops_; }

    /// S X = A B^{-1} A X
    [[nodiscard]] DenseMatrix apply(const DenseMatrix& x) const
    {
        return ops_->stiffness * detail::solve_columns(b_, ops_->stiffness * x);
    }

    /// S^{-1} X = A^{-1} B A^{-1} X
    [[nodiscard]] DenseMatrix solve(const DenseMatrix& x) const
    {
        return detail::solve_columns(a_, ops_->mass * detail::solve_columns(a_, x));
    }

private:
    const PlateOperators* ops_;
    Eigen::SimplicialLLT<detail::ColMatrix> a_;
    Eigen::SimplicialLLT<detail::ColMatrix> b_;
};

/// Smallest k buckling loads of S u = lambda D(psi) u (mixed form of
/// Delta^2 u + lambda div(sigma(psi) grad u) = 0), ascending.
inline std::vector<EigenPair> buckling_eigs(const SchurOperator& schur, double psi, int k, EigenOptions opt = {})
{
    if (k < 1) {
        throw InvalidArgument("buckling_eigs: k must be at least 1");
    }
    const PlateOperators& ops = schur.operators();
    const SparseMatrix d = ops.load(psi);
    if (d.norm() == 0.0) {
        throw InvalidArgument("buckling_eigs: load operator vanishes");
    }
    const Eigen::Index n = ops.size();
    const int block = static_cast<int>(std::min<Eigen::Index>(2 * k + opt.extra_vectors, n));
    if (k > block) {
        throw InvalidArgument("buckling_eigs: more eigenvalues requested than dofs");
    }

    // Pencil (D, S) with theta = 1 / lambda; the wanted loads are the largest
    // positive theta. Convergence on ||S u - lambda D u|| <= tol ||S u||.
    const auto res = detail::subspace_iteration(
        n, block, k, [&](const DenseMatrix& x) { return schur.solve(d * x); },
        [&](const DenseMatrix& x) { return schur.apply(x); }, [&](const DenseMatrix& x) { return DenseMatrix(d * x); },
        [](double a, double b) { return a > b; }, [](double t) { return t > 0.0; },
        [&](double theta, const Vector&, const Vector& su, const Vector& du) {
            return (su - du / theta).norm() <= opt.tol * su.norm();
        },
        opt.max_iter);

    std::vector<EigenPair> pairs;
    for (int i = 0; i < k && i < res.values.size() && res.values[i] > 0.0; ++i) {
        pairs.push_back({1.0 / res.values[i],
                         ScalarField(ops.space, detail::normalize_mode(ops.stiffness, res.vectors.col(i)))});
    }
    if (res.converged < k) {
        pairs.resize(std::min<std::size_t>(pairs.size(), static_cast<std::size_t>(res.converged)));
        throw EigensolverFailure("buckling_eigs: " + std::to_string(res.converged) + " of " + std::to_string(k) +
                                     " eigenpairs converged within " + std::to_string(opt.max_iter) + " iterations",
                                 std::move(pairs));
    }
    return pairs;
}

inline std::vector<EigenPair> buckling_eigs(const PlateOperators& ops, double psi, int k, EigenOptions opt = {})
{
    return buckling_eigs(SchurOperator(ops), psi, k, opt);
}

struct Crossing {
    int curve = 0;
    double lambda_before = 0.0; ///< last grid point with sigma > 0
    double lambda_after = 0.0;  ///< first grid point with sigma <= 0 (the reported crossing)
};

struct SpectrumTrace {
    std::vector<double> lambda_grid;
    std::vector<std::vector<double>> sigma_curves; ///< [curve][grid point]
    std::vector<Crossing> crossings;
};

/// Smallest k eigenvalues sigma of (S - lambda D(psi)) u = sigma B u at one
/// lambda, with their B-normalized modes. Uses shift-invert about a shift
/// below the spectrum through the mixed block system
///   [[-lambda D - tau B, A], [A, -B]] [y; w] = [B x; 0].
inline std::pair<std::vector<double>, DenseMatrix> parametrized_eigs(const SchurOperator& schur, const SparseMatrix& d,
                                                                     double lambda, int k, EigenOptions opt = {},
                                                                     const DenseMatrix* start = nullptr)
{
    const PlateOperators& ops = schur.operators();
    const Eigen::Index n = ops.size();
    // sigma >= min_t (t^2 - lambda t) = -lambda^2/4 for the continuous
    // problem; keep a margin for the discrete one.
    const double tau = -0.5 * lambda * lambda - 10.0;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(4 * ops.stiffness.nonZeros()));
    const SparseMatrix top_left = -lambda * d - tau * ops.mass;
    auto push = [&trip](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0, double s) {
        for (int r = 0; r < m.outerSize(); ++r) {
            for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
                trip.emplace_back(static_cast<int>(r0 + it.row()), static_cast<int>(c0 + it.col()), s * it.value());
            }
        }
    };
    push(top_left, 0, 0, 1.0);
    push(ops.stiffness, 0, n, 1.0);
    push(ops.stiffness, n, 0, 1.0);
    push(ops.mass, n, n, -1.0);
    detail::ColMatrix shifted(2 * n, 2 * n);
    shifted.setFromTriplets(trip.begin(), trip.end());
    detail::SparseLUBackend lu;
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) {
        throw SingularSystem("parametrized_eigs: shifted system is singular");
    }

    const int block = static_cast<int>(std::min<Eigen::Index>(k + opt.extra_vectors, n));
    auto apply_k = [&](const DenseMatrix& x) { return DenseMatrix(schur.apply(x) - lambda * (d * x)); };
    const auto res = detail::subspace_iteration(
        n, block, k,
        [&](const DenseMatrix& x) {
            DenseMatrix rhs = DenseMatrix::Zero(2 * n, x.cols());
            rhs.topRows(n) = ops.mass * x;
            DenseMatrix y(2 * n, x.cols());
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                y.col(j) = lu.solve(Vector(rhs.col(j)));
            }
            return DenseMatrix(y.topRows(n));
        },
        [&](const DenseMatrix& x) { return DenseMatrix(ops.mass * x); }, apply_k,
        [](double a, double b) { return a < b; }, [](double) { return true; },
        // Backward error: near a crossing S x and lambda D x cancel, so scale by
        // their separate sizes rather than by K x.
        [&](double sigma, const Vector& x, const Vector& bx, const Vector& kx) {
            const Vector dx = d * x;
            const double scale = (kx + lambda * dx).norm() + lambda * dx.norm() + std::abs(sigma) * bx.norm();
            return (kx - sigma * bx).norm() <= opt.tol * scale;
        },
        opt.max_iter, start);
    if (res.converged < k) {
        throw EigensolverFailure("parametrized_eigs: no convergence at lambda = " + std::to_string(lambda), {});
    }
    std::vector<double> values(res.values.data(), res.values.data() + k);
    return {values, DenseMatrix(res.vectors.leftCols(k))};
}

/// Tracks the k lowest curves sigma(lambda) over an ascending grid. Curves
/// are continued by maximal B-overlap of modes, so they may cross.
inline SpectrumTrace spectrum_vs_lambda(const SchurOperator& schur, const std::vector<double>& lambda_grid, double psi,
                                        int k, EigenOptions opt = {})
{
    if (lambda_grid.empty() || k < 1) {
        throw InvalidArgument("spectrum_vs_lambda: need a nonempty grid and k >= 1");
    }
    for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > lambda_grid[i - 1])) {
            throw InvalidArgument("spectrum_vs_lambda: grid must be strictly ascending");
        }
    }
    const PlateOperators& ops = schur.operators();
    const SparseMatrix d = ops.load(psi);

    SpectrumTrace trace;
    trace.lambda_grid = lambda_grid;
    trace.sigma_curves.assign(k, std::vector<double>(lambda_grid.size(), 0.0));
    DenseMatrix previous;
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
        auto [values, modes] = parametrized_eigs(schur, d, lambda_grid[g], k, opt, g == 0 ? nullptr : &previous);
        if (g == 0) {
            for (int c = 0; c < k; ++c) {
                trace.sigma_curves[c][g] = values[c];
            }
            previous = modes;
            continue;
        }
        // Greedy assignment by largest |<prev_c, new_j>_B|.
        const DenseMatrix overlap = (previous.transpose() * (ops.mass * modes)).cwiseAbs();
        std::vector<int> assign(k, -1);
        std::vector<bool> used(k, false);
        for (int step = 0; step < k; ++step) {
            double best = -1.0;
            int bc = -1;
            int bj = -1;
            for (int c = 0; c < k; ++c) {
                if (assign[c] >= 0) {
                    continue;
                }
                for (int j = 0; j < k; ++j) {
                    if (!used[j] && overlap(c, j) > best) {
                        best = overlap(c, j);
                        bc = c;
                        bj = j;
                    }
                }
            }
            assign[bc] = bj;
            used[bj] = true;
        }
        DenseMatrix next(modes.rows(), k);
        for (int c = 0; c < k; ++c) {
            trace.sigma_curves[c][g] = values[assign[c]];
            next.col(c) = modes.col(assign[c]);
        }
        previous = next;
    }

    for (int c = 0; c < k; ++c) {
        for (std::size_t g = 1; g < lambda_grid.size(); ++g) {
            if (trace.sigma_curves[c][g - 1] > 0.0 && trace.sigma_curves[c][g] <= 0.0) {
                trace.crossings.push_back({c, lambda_grid[g - 1], lambda_grid[g]});
            }
        }
    }
    std::sort(trace.crossings.begin(), trace.crossings.end(),
              [](const Crossing& a, const Crossing& b) { return a.lambda_after < b.lambda_after; });
    return trace;
}

} // namespace vkrom
