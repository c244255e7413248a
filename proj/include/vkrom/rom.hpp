#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "vkrom/assembly.hpp"
#include "vkrom/continuation.hpp"
#include "vkrom/errors.hpp"
#include "vkrom/solver.hpp"

namespace vkrom {

/// Per-field snapshot matrices (interior coefficients, one column per
/// stored state) in sampling order.
struct SnapshotSet {
    SpacePtr space;
    std::array<DenseMatrix, 4> fields;
    std::vector<double> lambdas;
    std::vector<double> psis;

    [[nodiscard]] int count() const { return static_cast<int>(lambdas.size()); }
};

/// Stored, converged states of the given branches in branch order; `stride`
/// keeps every stride-th stored state of each branch.
inline SnapshotSet collect_snapshots(const std::vector<Branch>& branches, int stride = 1)
{
    if (stride < 1) {
        throw InvalidArgument("collect_snapshots: stride must be at least 1");
    }
    std::vector<const BranchPoint*> picked;
    for (const auto& b : branches) {
        int k = 0;
        for (const auto& p : b.points) {
            if (!p.state || !p.converged) {
                continue;
            }
            if (k++ % stride == 0) {
                picked.push_back(&p);
            }
        }
    }
    if (picked.empty()) {
        throw InvalidArgument("collect_snapshots: no stored states to collect");
    }
    SnapshotSet set;
    set.space = picked.front()->state->space;
    const int n = picked.front()->state->block_size();
    for (auto& f : set.fields) {
        f.resize(n, static_cast<Eigen::Index>(picked.size()));
    }
    for (std::size_t c = 0; c < picked.size(); ++c) {
        const State& s = *picked[c]->state;
        for (int f = 0; f < 4; ++f) {
            set.fields[f].col(static_cast<Eigen::Index>(c)) = s.field(all_fields[f]);
        }
        set.lambdas.push_back(picked[c]->lambda);
        set.psis.push_back(picked[c]->psi);
    }
    return set;
}

/// Per-field bases, orthonormal in the H1_0 (stiffness) inner product.
struct ReducedBasis {
    SpacePtr space;
    int N = 0;
    std::array<DenseMatrix, 4> bases;
    std::array<std::vector<double>, 4> energies; ///< fraction of snapshot energy carried by each retained mode

    [[nodiscard]] const DenseMatrix& basis(Field f) const { return bases[static_cast<int>(f)]; }
};

/// Leading n columns of every field basis.
inline ReducedBasis truncate(const ReducedBasis& basis, int n)
{
    if (n < 1 || n > basis.N) {
        throw InvalidArgument("truncate: size must lie in [1, N]");
    }
    ReducedBasis out = basis;
    out.N = n;
    for (int f = 0; f < 4; ++f) {
        out.bases[f] = basis.bases[f].leftCols(n).eval();
        out.energies[f].resize(static_cast<std::size_t>(n));
    }
    return out;
}

namespace detail {

// Two modified Gram-Schmidt passes in the inner product x.G y.
inline DenseMatrix gram_schmidt(const SparseMatrix& g, DenseMatrix v)
{
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                v.col(j) -= v.col(i).dot(g * v.col(j)) * v.col(i);
            }
            const double norm = std::sqrt(v.col(j).dot(g * v.col(j)));
            if (!(norm > 0.0)) {
                throw DegenerateInput("pod: basis vector vanished during orthonormalization");
            }
            v.col(j) /= norm;
        }
    }
    return v;
}

} // namespace detail

/// POD in the H1_0 inner product. With A = P^T L L^T P, the Gram matrix
/// S^T A S of the snapshots equals W^T W for W = L^T P S, so its
/// eigenpairs come from a thin SVD of W; this keeps modes whose energy is
/// far below the square of machine precision. N is the smallest size at
/// which every field keeps 1 - energy_tol of its snapshot energy, capped by
/// n_max and by the numerical rank of the snapshots.
inline ReducedBasis pod(const SnapshotSet& snapshots, const SparseMatrix& stiffness, int n_max, double energy_tol = 0.0)
{
    if (n_max < 1) {
        throw InvalidArgument("pod: n_max must be at least 1");
    }
    if (snapshots.count() == 0) {
        throw InvalidArgument("pod: empty snapshot set");
    }
    const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol{Eigen::SparseMatrix<double>(stiffness)};
    if (chol.info() != Eigen::Success) {
        throw SingularSystem("pod: stiffness matrix is not positive definite");
    }

    std::array<Eigen::BDCSVD<DenseMatrix>, 4> svd;
    std::array<double, 4> total{};
    int wanted = 1;
    int rank = n_max;
    for (int f = 0; f < 4; ++f) {
        const DenseMatrix w = chol.matrixU() * (chol.permutationP() * snapshots.fields[f]);
        svd[f].compute(w, Eigen::ComputeThinU);
        const Vector mu = svd[f].singularValues().array().square();
        total[f] = mu.sum();
        if (!(total[f] > 0.0)) {
            throw DegenerateInput(std::string("pod: snapshots of field ") + field_names[f] + " are all zero");
        }
        const double floor = 50.0 * std::numeric_limits<double>::epsilon() * svd[f].singularValues()[0];
        int r = 0;
        while (r < mu.size() && svd[f].singularValues()[r] > floor) {
            ++r;
        }
        rank = std::min(rank, r);
        // energy_tol <= 0 asks for every mode up to n_max.
        int nf = energy_tol > 0.0 ? 0 : static_cast<int>(mu.size());
        double kept = 0.0;
        while (nf < mu.size() && kept < (1.0 - energy_tol) * total[f]) {
            kept += mu[nf++];
        }
        wanted = std::max(wanted, nf);
    }
    int n = std::min(wanted, n_max);
    if (n > rank) {
        std::clog << "warning: pod: snapshot rank " << rank << " is below the requested size " << n << '\n';
        n = rank;
    }

    ReducedBasis basis;
    basis.space = snapshots.space;
    basis.N = n;
    for (int f = 0; f < 4; ++f) {
        const DenseMatrix q = svd[f].matrixU().leftCols(n);
        DenseMatrix v = chol.permutationPinv() * DenseMatrix(chol.matrixU().solve(q));
        for (int i = 0; i < n; ++i) {
            basis.energies[f].push_back(std::pow(svd[f].singularValues()[i], 2) / total[f]);
        }
        basis.bases[f] = detail::gram_schmidt(stiffness, std::move(v));
    }
    return basis;
}

/// Everything the online solver needs, all of size N or N^3. Blocks are
/// named test-trial: `a_uu` = V_u^T A V_u, `d0_Uu` = V_U^T D(0) V_u, etc.
/// t_phi[p] = V_U^T M(V_phi e_p) V_u and t_u[p] = V_Phi^T M(V_u e_p) V_u.
struct ReducedOperators {
    int N = 0;
    DenseMatrix a_uu, b_uU, a_UU, d0_Uu, d1_Uu, a_pp, b_pP, a_PP;
    std::vector<DenseMatrix> t_phi;
    std::vector<DenseMatrix> t_u;
};

inline ReducedOperators project_operators(const ReducedBasis& basis, const PlateOperators& ops)
{
    if (basis.N < 1 || basis.basis(Field::u).rows() != ops.size()) {
        throw InvalidArgument("project_operators: basis and operators live on different spaces");
    }
    const DenseMatrix& vu = basis.basis(Field::u);
    const DenseMatrix& vU = basis.basis(Field::U);
    const DenseMatrix& vp = basis.basis(Field::phi);
    const DenseMatrix& vP = basis.basis(Field::Phi);
    const FeSpace& space = *ops.space;

    ReducedOperators r;
    r.N = basis.N;
    r.a_uu = vu.transpose() * (ops.stiffness * vu);
    r.b_uU = vu.transpose() * (ops.mass * vU);
    r.a_UU = vU.transpose() * (ops.stiffness * vU);
    r.d0_Uu = vU.transpose() * (ops.load_uniform * vu);
    r.d1_Uu = vU.transpose() * (ops.load_gradient * vu);
    r.a_pp = vp.transpose() * (ops.stiffness * vp);
    r.b_pP = vp.transpose() * (ops.mass * vP);
    r.a_PP = vP.transpose() * (ops.stiffness * vP);
    for (int p = 0; p < basis.N; ++p) {
        const SparseMatrix mphi = assemble_bracket(space, to_full(space, vp.col(p)));
        const SparseMatrix mu = assemble_bracket(space, to_full(space, vu.col(p)));
        r.t_phi.push_back(vU.transpose() * (mphi * vu));
        r.t_u.push_back(vP.transpose() * (mu * vu));
    }
    return r;
}

/// Reduced coefficients, N per field in field order.
using ReducedState = Vector;

/// Reduced residual V^T G(V x) evaluated with the stored blocks and tensors.
inline Vector reduced_residual(const ReducedOperators& r, const ReducedState& x, double lambda, double psi)
{
    const int n = r.N;
    if (x.size() != 4 * n) {
        throw InvalidArgument("reduced_residual: state length must be 4N");
    }
    const auto u = x.segment(0, n);
    const auto U = x.segment(n, n);
    const auto phi = x.segment(2 * n, n);
    const auto Phi = x.segment(3 * n, n);
    DenseMatrix mphi = DenseMatrix::Zero(n, n);
    DenseMatrix mu = DenseMatrix::Zero(n, n);
    for (int p = 0; p < n; ++p) {
        mphi += phi[p] * r.t_phi[p];
        mu += u[p] * r.t_u[p];
    }
    Vector g(4 * n);
    g.segment(0, n) = r.a_uu * u + r.b_uU * U;
    g.segment(n, n) = r.a_UU * U + mphi * u + lambda * (r.d0_Uu * u - psi * (r.d1_Uu * u));
    g.segment(2 * n, n) = r.a_pp * phi + r.b_pP * Phi;
    g.segment(3 * n, n) = r.a_PP * Phi - mu * u;
    return g;
}

/// Reduced Jacobian with the same block layout as the full-order one.
inline DenseMatrix reduced_jacobian(const ReducedOperators& r, const ReducedState& x, double lambda, double psi)
{
    const int n = r.N;
    if (x.size() != 4 * n) {
        throw InvalidArgument("reduced_jacobian: state length must be 4N");
    }
    const auto u = x.segment(0, n);
    const auto phi = x.segment(2 * n, n);
    DenseMatrix mphi = DenseMatrix::Zero(n, n);
    DenseMatrix mu = DenseMatrix::Zero(n, n);
    DenseMatrix cross(n, n); // d/dphi of M(phi) u
    for (int p = 0; p < n; ++p) {
        mphi += phi[p] * r.t_phi[p];
        mu += u[p] * r.t_u[p];
        cross.col(p) = r.t_phi[p] * u;
    }
    DenseMatrix j = DenseMatrix::Zero(4 * n, 4 * n);
    j.block(0, 0, n, n) = r.a_uu;
    j.block(0, n, n, n) = r.b_uU;
    j.block(n, 0, n, n) = mphi + lambda * (r.d0_Uu - psi * r.d1_Uu);
    j.block(n, n, n, n) = r.a_UU;
    j.block(n, 2 * n, n, n) = cross;
    j.block(2 * n, 2 * n, n, n) = r.a_pp;
    j.block(2 * n, 3 * n, n, n) = r.b_pP;
    j.block(3 * n, 0, n, n) = -2.0 * mu;
    j.block(3 * n, 3 * n, n, n) = r.a_PP;
    return j;
}

/// Newton on the 4N reduced system. The increment norm is the Euclidean
/// norm of the coefficients, which equals the stacked H1 norm of the lifted
/// increment for an H1-orthonormal basis.
inline std::pair<ReducedState, NewtonReport> reduced_newton(const ReducedOperators& r, double lambda, double psi,
                                                            ReducedState guess, double tol = 1e-10,
                                                            int max_iter = 20)
{
    if (!(tol > 0.0)) {
        throw InvalidArgument("reduced_newton: tolerance must be positive");
    }
    if (guess.size() != 4 * r.N) {
        throw InvalidArgument("reduced_newton: guess length must be 4N");
    }
    NewtonReport report;
    ReducedState x = std::move(guess);
    while (report.iterations < max_iter) {
        const Eigen::FullPivLU<DenseMatrix> lu(reduced_jacobian(r, x, lambda, psi));
        if (!lu.isInvertible()) {
            report.singular = true;
            break;
        }
        const Vector delta = lu.solve(reduced_residual(r, x, lambda, psi));
        x -= delta;
        const double norm = delta.norm();
        report.increment_norms.push_back(norm);
        ++report.iterations;
        if (!std::isfinite(norm)) {
            break;
        }
        if (norm <= tol) {
            report.converged = true;
            break;
        }
    }
    return {std::move(x), std::move(report)};
}

inline State lift(const ReducedBasis& basis, const ReducedState& x)
{
    if (x.size() != 4 * basis.N) {
        throw InvalidArgument("lift: state length must be 4N");
    }
    State s(basis.space);
    for (int f = 0; f < 4; ++f) {
        s.field(all_fields[f]) = basis.bases[f] * x.segment(f * basis.N, basis.N);
    }
    s.provenance = Provenance::LiftedFromRom;
    return s;
}

/// H1_0-orthogonal projection coefficients.
inline ReducedState project(const ReducedBasis& basis, const SparseMatrix& stiffness, const State& s)
{
    ReducedState x(4 * basis.N);
    for (int f = 0; f < 4; ++f) {
        x.segment(f * basis.N, basis.N) = basis.bases[f].transpose() * (stiffness * s.field(all_fields[f]));
    }
    return x;
}

struct RbErrorReport {
    int N = 0;
    double error = 0.0; ///< E_N, max H1_0 error of u over the accepted samples
    std::vector<double> lambdas;
    std::vector<double> errors;
    std::vector<double> excluded; ///< lambdas where either solver failed
    double mean_online_ms = 0.0;
    double mean_full_ms = 0.0;
};

/// Full and reduced Newton from the same guess at every test lambda; the
/// reduced solver starts from the projection of that guess.
inline RbErrorReport rb_error(const ReducedBasis& basis, const ReducedOperators& reduced, const PlateOperators& ops,
                              const std::vector<double>& test_lambdas, double psi,
                              const std::vector<State>& guesses, NewtonOptions newton = {})
{
    if (test_lambdas.empty() || guesses.size() != test_lambdas.size()) {
        throw InvalidArgument("rb_error: need one guess per test lambda and a nonempty sample");
    }
    using clock = std::chrono::steady_clock;
    NewtonSolver full(ops, newton);
    RbErrorReport rep;
    rep.N = basis.N;
    double online = 0.0;
    double offline = 0.0;
    for (std::size_t i = 0; i < test_lambdas.size(); ++i) {
        const double lambda = test_lambdas[i];
        auto t0 = clock::now();
        auto [xh, fr] = full.solve(guesses[i], lambda, psi);
        auto t1 = clock::now();
        auto [xn, rr] = reduced_newton(reduced, lambda, psi, project(basis, ops.stiffness, guesses[i]), newton.tol,
                                       newton.max_iter);
        auto t2 = clock::now();
        if (!fr.converged || !rr.converged) {
            rep.excluded.push_back(lambda);
            continue;
        }
        offline += std::chrono::duration<double, std::milli>(t1 - t0).count();
        online += std::chrono::duration<double, std::milli>(t2 - t1).count();
        const Vector diff = xh.field(Field::u) - basis.basis(Field::u) * xn.segment(0, basis.N);
        const double err = std::sqrt(std::max(diff.dot(ops.stiffness * diff), 0.0));
        rep.lambdas.push_back(lambda);
        rep.errors.push_back(err);
        rep.error = std::max(rep.error, err);
    }
    if (!rep.errors.empty()) {
        rep.mean_full_ms = offline / static_cast<double>(rep.errors.size());
        rep.mean_online_ms = online / static_cast<double>(rep.errors.size());
    }
    return rep;
}

} // namespace vkrom
