#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "vkrom/assembly.hpp"
#include "vkrom/errors.hpp"
#include "vkrom/fespace.hpp"
#include "vkrom/sparse_lu.hpp"

namespace vkrom {

/// The four unknowns of the split plate system: displacement u, its
/// Laplacian U, Airy potential phi and its Laplacian Phi.
enum class Field : int { u = 0, U = 1, phi = 2, Phi = 3 };

inline constexpr std::array<Field, 4> all_fields{Field::u, Field::U, Field::phi, Field::Phi};
inline constexpr std::array<const char*, 4> field_names{"u", "U", "phi", "Phi"};

enum class Provenance { FullOrder, LiftedFromRom };

/// Discrete solution X = (u, U, phi, Phi), stored as one stacked vector of
/// interior coefficients in field order.
struct State {
    SpacePtr space;
    Vector data;
    Provenance provenance = Provenance::FullOrder;

    State() = default;
    explicit State(SpacePtr s) : space(std::move(s)), data(Vector::Zero(4 * space->num_interior())) {}
    State(SpacePtr s, Vector d, Provenance p = Provenance::FullOrder)
        : space(std::move(s)), data(std::move(d)), provenance(p)
    {
        if (data.size() != 4 * space->num_interior()) {
            throw InvalidArgument("State: data length must be four times the interior dof count");
        }
    }

    [[nodiscard]] int block_size() const { return space->num_interior(); }
    [[nodiscard]] auto field(Field f) { return data.segment(static_cast<int>(f) * block_size(), block_size()); }
    [[nodiscard]] auto field(Field f) const
    {
        return data.segment(static_cast<int>(f) * block_size(), block_size());
    }
    [[nodiscard]] ScalarField scalar(Field f) const { return {space, Vector(field(f))}; }
};

struct NewtonReport {
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    std::vector<double> increment_norms; ///< H1 seminorm of the increment per step
};

/// Sum over fields of the H1 seminorms squared, i.e. the (H1_0)^4 norm of a
/// stacked four-field vector, using the stiffness matrix.
inline double stacked_h1_norm(const SparseMatrix& stiffness, const Vector& x)
{
    const Eigen::Index n = stiffness.rows();
    double s = 0.0;
    for (int f = 0; f < 4; ++f) {
        const auto seg = x.segment(f * n, n);
        s += seg.dot(stiffness * seg);
    }
    return std::sqrt(std::max(s, 0.0));
}

namespace detail {

inline void check_state(const PlateOperators& ops, const State& state)
{
    if (!state.space || state.space.get() != ops.space.get()) {
        if (!state.space || state.space->num_interior() != ops.size() ||
            state.space->num_dofs() != ops.space->num_dofs()) {
            throw InvalidArgument("state and operators live on different spaces");
        }
    }
}

struct BracketPair {
    SparseMatrix of_phi; // M(phi)
    SparseMatrix of_u;   // M(u)
};

inline BracketPair brackets(const PlateOperators& ops, const State& s)
{
    const FeSpace& space = *ops.space;
    return {assemble_bracket(space, to_full(space, s.field(Field::phi))),
            assemble_bracket(space, to_full(space, s.field(Field::u)))};
}

inline Vector residual_from(const PlateOperators& ops, const BracketPair& m, const State& s, double lambda, double psi)
{
    const int n = ops.size();
    const auto u = s.field(Field::u);
    const auto U = s.field(Field::U);
    const auto phi = s.field(Field::phi);
    const auto Phi = s.field(Field::Phi);
    const Vector Mu_u = m.of_u * u;
    Vector r(4 * n);
    r.segment(0, n) = ops.stiffness * u + ops.mass * U;
    r.segment(n, n) = ops.stiffness * U + m.of_phi * u + lambda * (ops.load_uniform * u - psi * (ops.load_gradient * u));
    r.segment(2 * n, n) = ops.stiffness * phi + ops.mass * Phi;
    r.segment(3 * n, n) = ops.stiffness * Phi - Mu_u;
    return r;
}

} // namespace detail

/// Residual blocks (A u + B U, A U + M(phi) u + lambda D(psi) u,
/// A phi + B Phi, A Phi - M(u) u).
inline Vector residual(const PlateOperators& ops, const State& state, double lambda, double psi)
{
    detail::check_state(ops, state);
    return detail::residual_from(ops, detail::brackets(ops, state), state, lambda, psi);
}

/// Assembled 4x4 block Jacobian
///   [[A,               B, 0,    0],
///    [M(phi)+lam D,    A, M(u), 0],
///    [0,               0, A,    B],
///    [-2 M(u),         0, 0,    A]]
/// stored column-compressed for the sparse LU.
struct BlockSystem {
    int block_size = 0;
    Eigen::SparseMatrix<double> matrix;

    [[nodiscard]] Vector apply(const Vector& x) const { return matrix * x; }
};

/// Builds Jacobians with a fixed sparsity structure. Every block shares the
/// interior coupling pattern, so the block matrix structure is computed
/// once and only values are refilled per Newton step.
class JacobianBuilder {
public:
    explicit JacobianBuilder(const PlateOperators& ops) : ops_(&ops)
    {
        const auto& p = ops.space->pattern();
        n_ = ops.size();
        // Position of the transposed entry, to read block columns from rows.
        transpose_pos_.resize(p.columns.size());
        for (int i = 0; i < n_; ++i) {
            for (int k = p.row_offsets[i]; k < p.row_offsets[i + 1]; ++k) {
                const int j = p.columns[k];
                const auto begin = p.columns.begin() + p.row_offsets[j];
                const auto end = p.columns.begin() + p.row_offsets[j + 1];
                transpose_pos_[k] = static_cast<int>(std::lower_bound(begin, end, i) - p.columns.begin());
            }
        }

        const int dim = 4 * n_;
        std::vector<int> outer(dim + 1, 0);
        std::vector<int> inner;
        inner.reserve(static_cast<std::size_t>(p.nnz()) * kBlockCount);
        for (int bj = 0; bj < 4; ++bj) {
            for (int c = 0; c < n_; ++c) {
                const int col = bj * n_ + c;
                int count = 0;
                for (int bi = 0; bi < 4; ++bi) {
                    if (!present(bi, bj)) {
                        continue;
                    }
                    for (int k = p.row_offsets[c]; k < p.row_offsets[c + 1]; ++k) {
                        inner.push_back(bi * n_ + p.columns[k]);
                        ++count;
                    }
                }
                outer[col + 1] = outer[col] + count;
            }
        }
        std::vector<double> zeros(inner.size(), 0.0);
        structure_ = Eigen::Map<const Eigen::SparseMatrix<double>>(dim, dim, static_cast<int>(inner.size()),
                                                                 outer.data(), inner.data(), zeros.data());
    }

    [[nodiscard]] BlockSystem build(const detail::BracketPair& m, double lambda, double psi) const
    {
        const auto& p = ops_->space->pattern();
        const double* A = ops_->stiffness.valuePtr();
        const double* B = ops_->mass.valuePtr();
        const double* D0 = ops_->load_uniform.valuePtr();
        const double* D1 = ops_->load_gradient.valuePtr();
        const double* Mphi = m.of_phi.valuePtr();
        const double* Mu = m.of_u.valuePtr();

        BlockSystem sys{n_, structure_};
        double* out = sys.matrix.valuePtr();
        std::size_t w = 0;
        for (int bj = 0; bj < 4; ++bj) {
            for (int c = 0; c < n_; ++c) {
                for (int bi = 0; bi < 4; ++bi) {
                    if (!present(bi, bj)) {
                        continue;
                    }
                    for (int k = p.row_offsets[c]; k < p.row_offsets[c + 1]; ++k) {
                        const int t = transpose_pos_[k]; // entry (row j, column c) of the block
                        double v = 0.0;
                        switch (bi * 4 + bj) {
                        case 0:  // (0,0)
                        case 5:  // (1,1)
                        case 10: // (2,2)
                        case 15: // (3,3)
                            v = A[t];
                            break;
                        case 1:  // (0,1)
                        case 11: // (2,3)
                            v = B[t];
                            break;
                        case 4: // (1,0)
                            v = Mphi[t] + lambda * (D0[t] - psi * D1[t]);
                            break;
                        case 6: // (1,2)
                            v = Mu[t];
                            break;
                        case 12: // (3,0)
                            v = -2.0 * Mu[t];
                            break;
                        default:
                            break;
                        }
                        out[w++] = v;
                    }
                }
            }
        }
        return sys;
    }

private:
    static constexpr int kBlockCount = 10;

    static constexpr bool present(int bi, int bj)
    {
        constexpr std::array<std::array<bool, 4>, 4> layout{{{true, true, false, false},
                                                             {true, true, true, false},
                                                             {false, false, true, true},
                                                             {true, false, false, true}}};
        return layout[bi][bj];
    }

    const PlateOperators* ops_;
    int n_ = 0;
    std::vector<int> transpose_pos_;
    Eigen::SparseMatrix<double> structure_;
};

inline BlockSystem jacobian(const PlateOperators& ops, const State& state, double lambda, double psi)
{
    detail::check_state(ops, state);
    return JacobianBuilder(ops).build(detail::brackets(ops, state), lambda, psi);
}

/// Sparse LU with reusable symbolic analysis. Throws SingularSystem when
/// the factorization breaks down or the relative residual stays above
/// 1e-10 after one step of iterative refinement.
class LinearSolver {
public:
    static constexpr double kResidualTolerance = 1e-10;

    void factorize(const Eigen::SparseMatrix<double>& matrix)
    {
        if (!analyzed_ || matrix.rows() != rows_ || matrix.nonZeros() != nnz_) {
            lu_.analyzePattern(matrix);
            analyzed_ = true;
            rows_ = matrix.rows();
            nnz_ = matrix.nonZeros();
        }
        lu_.factorize(matrix);
        if (lu_.info() != Eigen::Success) {
            throw SingularSystem("sparse LU factorization failed");
        }
        matrix_ = &matrix;
    }

    [[nodiscard]] Vector solve(const Vector& rhs) const
    {
        const double bnorm = rhs.norm();
        if (bnorm == 0.0) {
            return Vector::Zero(rhs.size());
        }
        Vector x = lu_.solve(rhs);
        Vector r = rhs - (*matrix_) * x;
        if (!(r.norm() <= kResidualTolerance * bnorm)) {
            x += lu_.solve(r);
            r = rhs - (*matrix_) * x;
        }
        if (!x.allFinite() || !(r.norm() <= kResidualTolerance * bnorm)) {
            throw SingularSystem("linear solve did not reach the residual tolerance");
        }
        return x;
    }

private:
    detail::SparseLUBackend lu_;
    const Eigen::SparseMatrix<double>* matrix_ = nullptr;
    bool analyzed_ = false;
    Eigen::Index rows_ = 0;
    Eigen::Index nnz_ = 0;
};

inline Vector solve_linear(const BlockSystem& system, const Vector& rhs)
{
    LinearSolver solver;
    solver.factorize(system.matrix);
    return solver.solve(rhs);
}

struct NewtonOptions {
    double tol = 1e-10; ///< absolute, on the H1 norm of the increment
    int max_iter = 20;
    int singular_retries = 2;
    double perturbation = 1e-8; ///< H1 size of the kick applied on a singular Jacobian
    std::uint64_t seed = 0x5eed; ///< kick direction generator
};

/// Newton-Kantorovich iteration J(X^k) dX = G(X^k), X^{k+1} = X^k - dX.
/// Owns the symbolic factorization, so reuse one instance per branch.
class NewtonSolver {
public:
    explicit NewtonSolver(const PlateOperators& ops, NewtonOptions options = {})
        : ops_(&ops), builder_(ops), options_(options)
    {
        if (!(options_.tol > 0.0)) {
            throw InvalidArgument("newton_solve: tolerance must be positive");
        }
    }

    [[nodiscard]] const NewtonOptions& options() const { return options_; }

    std::pair<State, NewtonReport> solve(const State& guess, double lambda, double psi)
    {
        detail::check_state(*ops_, guess);
        State x = guess;
        x.provenance = Provenance::FullOrder;
        NewtonReport report;
        int retries = 0;
        std::mt19937_64 rng(options_.seed);

        while (report.iterations < options_.max_iter) {
            const auto m = detail::brackets(*ops_, x);
            const Vector g = detail::residual_from(*ops_, m, x, lambda, psi);
            const BlockSystem sys = builder_.build(m, lambda, psi);
            Vector delta;
            try {
                linear_.factorize(sys.matrix);
                delta = linear_.solve(g);
            } catch (const SingularSystem&) {
                if (retries >= options_.singular_retries) {
                    report.singular = true;
                    break;
                }
                ++retries;
                kick(x, rng);
                continue;
            }
            x.data -= delta;
            const double norm = stacked_h1_norm(ops_->stiffness, delta);
            report.increment_norms.push_back(norm);
            ++report.iterations;
            if (!std::isfinite(norm)) {
                break;
            }
            if (norm <= options_.tol) {
                report.converged = true;
                break;
            }
        }
        return {std::move(x), std::move(report)};
    }

private:
    void kick(State& x, std::mt19937_64& rng) const
    {
        std::normal_distribution<double> dist;
        Vector w(x.data.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w[i] = dist(rng);
        }
        const double norm = stacked_h1_norm(ops_->stiffness, w);
        x.data += (options_.perturbation / norm) * w;
    }

    const PlateOperators* ops_;
    JacobianBuilder builder_;
    LinearSolver linear_;
    NewtonOptions options_;
};

inline std::pair<State, NewtonReport> newton_solve(const PlateOperators& ops, const State& guess, double lambda,
                                                   double psi, NewtonOptions options = {})
{
    NewtonSolver solver(ops, options);
    return solver.solve(guess, lambda, psi);
}

} // namespace vkrom
