#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>

#include "vkrom/assembly.hpp"
#include "vkrom/buckling.hpp"
#include "vkrom/errors.hpp"
#include "vkrom/solver.hpp"

namespace vkrom {

struct BranchSeed {
    int m = 1;
    int n = 1;
    double amplitude = 1.0;
    int sign = 1;
};

struct BranchPoint {
    double lambda = 0.0;
    double psi = 0.0;
    double ordinate = 0.0; ///< signed u at its max-modulus dof
    bool converged = false;
    int iterations = 0;
    bool seeded = false;   ///< Newton started from the seed lift rather than the previous point
    bool rejected = false; ///< the seeded solve landed on another mode's branch and was replaced by X = 0
    std::optional<State> state;
};

struct Branch {
    BranchSeed seed;
    std::vector<BranchPoint> points;
    std::optional<double> bifurcation; ///< refined departure from the trivial branch
};

struct BifurcationDiagram {
    std::vector<Branch> branches;
    std::vector<std::pair<double, double>> trivial_branch;
    std::vector<double> detected_bifurcations;
};

struct ContinuationOptions {
    double delta = 1e-4;        ///< buckling threshold on the max norm of u
    int store_every = 5;        ///< keep the full state of every n-th point
    double min_overlap = 0.5;   ///< seeded solves must keep this B-cosine with the seed mode
    bool refine = true;         ///< bisect the departure interval down to d_lambda / 8
    bool first_mode = false;    ///< for psi != 0, seed from the lowest buckling mode at that psi
    NewtonOptions newton;
};

/// Builds Newton guesses from a single buckling mode. Given u it fills the
/// other fields so that every residual row except the equilibrium one
/// vanishes: U = -B^-1 A u, Phi = A^-1 M(u) u, phi = -A^-1 B Phi.
class SeedLifter {
public:
    explicit SeedLifter(const PlateOperators& ops) : ops_(&ops)
    {
        a_.compute(Eigen::SparseMatrix<double>(ops.stiffness));
        b_.compute(Eigen::SparseMatrix<double>(ops.mass));
        if (a_.info() != Eigen::Success || b_.info() != Eigen::Success) {
            throw SingularSystem("SeedLifter: stiffness or mass factorization failed");
        }
    }

    [[nodiscard]] State complete(const Vector& u) const
    {
        const FeSpace& space = *ops_->space;
        State s(ops_->space);
        s.field(Field::u) = u;
        s.field(Field::U) = -b_.solve(Vector(ops_->stiffness * u));
        const Vector Phi = a_.solve(Vector(assemble_bracket(space, to_full(space, u)) * u));
        s.field(Field::Phi) = Phi;
        s.field(Field::phi) = -a_.solve(Vector(ops_->mass * Phi));
        return s;
    }

    /// One-mode Galerkin prediction of the branch amplitude. Projecting the
    /// equilibrium row onto e gives (lambda - lambda_R) e.De + a^2 e.M(phi_e)e = 0
    /// with lambda_R the Rayleigh quotient of e; below lambda_R (or for a
    /// stiffening cubic term) there is no prediction and the seed's own
    /// amplitude is used.
    [[nodiscard]] State seed(const BranchSeed& seed, double lambda, double psi, bool first_mode = false) const
    {
        const Vector e = seed_mode(seed, psi, first_mode);
        const Vector de = ops_->load_uniform * e - psi * (ops_->load_gradient * e);
        const double ede = e.dot(de);
        const Vector ae = ops_->stiffness * e;
        const double rayleigh = ae.dot(b_.solve(ae)) / ede;
        const State unit = complete(e);
        const FeSpace& space = *ops_->space;
        const double cubic = e.dot(assemble_bracket(space, to_full(space, unit.field(Field::phi))) * e);

        double amplitude = seed.amplitude;
        const double a2 = ede > 0.0 && cubic < 0.0 ? -(lambda - rayleigh) * ede / cubic : 0.0;
        if (a2 > 0.0) {
            amplitude *= std::sqrt(a2);
        }
        return complete((seed.sign >= 0 ? amplitude : -amplitude) * e);
    }

    /// Mode a seed starts from: the sine mode without a load gradient, else a
    /// discrete buckling mode at psi (the lowest, or the one nearest the sine).
    [[nodiscard]] Vector seed_mode(const BranchSeed& seed, double psi, bool first_mode = false) const
    {
        return psi == 0.0 ? mode(seed) : loaded_mode(seed, psi, first_mode);
    }

    /// B-cosine between u and the seed mode.
    [[nodiscard]] double overlap(const BranchSeed& seed, const Vector& u, double psi = 0.0,
                                 bool first_mode = false) const
    {
        const Vector e = seed_mode(seed, psi, first_mode);
        const Vector be = ops_->mass * e;
        const double den = std::sqrt(e.dot(be) * u.dot(ops_->mass * u));
        return den > 0.0 ? std::abs(u.dot(be)) / den : 0.0;
    }

private:
    [[nodiscard]] Vector mode(const BranchSeed& seed) const
    {
        return exact_eigenfunction(seed.m, seed.n, ops_->space->mesh().length, ops_->space).coeffs;
    }

    // Under a graded load the sine modes are no longer eigenfunctions; use the
    // discrete buckling mode at this psi that overlaps the seed mode most.
    [[nodiscard]] Vector loaded_mode(const BranchSeed& seed, double psi, bool first_mode) const
    {
        const double length = ops_->space->mesh().length;
        const double target = exact_eigenvalue(seed.m, seed.n, length);
        int k = 2;
        for (int i = 1; i <= 20; ++i) {
            for (int j = 1; j <= 20; ++j) {
                k += exact_eigenvalue(i, j, length) <= 1.5 * target ? 1 : 0;
            }
        }
        k = static_cast<int>(std::min<Eigen::Index>(k, ops_->size() / 3));
        auto it = loaded_modes_.find(psi);
        if (it == loaded_modes_.end()) {
            std::vector<Vector> modes;
            for (const auto& pair : buckling_eigs(*ops_, psi, k)) {
                modes.push_back(pair.mode.coeffs);
            }
            it = loaded_modes_.emplace(psi, std::move(modes)).first;
        }
        const Vector e = mode(seed);
        const Vector be = ops_->mass * e;
        Vector best = e;
        double best_cos = -1.0;
        for (const Vector& v : it->second) {
            if (first_mode && &v != &it->second.front()) {
                break;
            }
            const double c = std::abs(v.dot(be)) / std::sqrt(v.dot(ops_->mass * v) * e.dot(be));
            if (c > best_cos) {
                best_cos = c;
                best = v.dot(be) >= 0.0 ? v : Vector(-v);
            }
        }
        // same B-norm as the sine mode so seed amplitudes keep their meaning
        return best * std::sqrt(e.dot(be) / best.dot(ops_->mass * best));
    }

    const PlateOperators* ops_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> a_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> b_;
    mutable std::map<double, std::vector<Vector>> loaded_modes_;
};

namespace detail {

inline void check_sweep(double lambda_start, double lambda_end, double d_lambda, const ContinuationOptions& opt)
{
    if (!(lambda_start < lambda_end) || !(d_lambda > 0.0) || !(opt.delta > 0.0)) {
        throw InvalidArgument("trace_branch: need lambda_start < lambda_end, d_lambda > 0 and delta > 0");
    }
}

inline void check_seed(const BranchSeed& seed)
{
    if (seed.m < 1 || seed.n < 1 || !(seed.amplitude > 0.0) || (seed.sign != 1 && seed.sign != -1)) {
        throw InvalidArgument("BranchSeed: need m, n >= 1, amplitude > 0 and sign = +-1");
    }
}

inline std::vector<double> lambda_grid(double lambda_start, double lambda_end, double d_lambda)
{
    std::vector<double> grid;
    const auto count = static_cast<long>(std::floor((lambda_end - lambda_start) / d_lambda + 1e-9));
    for (long i = 0; i <= count; ++i) {
        grid.push_back(lambda_start + static_cast<double>(i) * d_lambda);
    }
    return grid;
}

// Newton from the seed lift, with the mode-identity check.
struct SeededSolve {
    State state;
    NewtonReport report;
    bool rejected = false;
};

inline SeededSolve solve_from_seed(NewtonSolver& newton, const SeedLifter& lifter, const BranchSeed& seed,
                                   double lambda, double psi, const ContinuationOptions& opt)
{
    auto [x, rep] = newton.solve(lifter.seed(seed, lambda, psi, opt.first_mode), lambda, psi);
    const Vector u = x.field(Field::u);
    if (rep.converged && u.lpNorm<Eigen::Infinity>() >= opt.delta &&
        lifter.overlap(seed, u, psi, opt.first_mode) < opt.min_overlap) {
        // Another mode's branch; the trivial solution is the honest point on this one.
        auto [zero, zrep] = newton.solve(State(x.space), lambda, psi);
        return {std::move(zero), std::move(zrep), true};
    }
    return {std::move(x), std::move(rep), false};
}

} // namespace detail

/// Continuation in lambda along one seeded branch. While the last solution
/// is trivial every step restarts from the seed lift; once off the trivial
/// branch, steps warm-start from the previous point.
inline Branch trace_branch(const PlateOperators& ops, double lambda_start, double lambda_end, double d_lambda,
                           double psi, const BranchSeed& seed, const ContinuationOptions& opt = {})
{
    detail::check_sweep(lambda_start, lambda_end, d_lambda, opt);
    detail::check_seed(seed);
    const SeedLifter lifter(ops);
    NewtonSolver newton(ops, opt.newton);

    Branch branch;
    branch.seed = seed;
    std::optional<State> previous;
    std::optional<std::size_t> first_nontrivial;
    const auto grid = detail::lambda_grid(lambda_start, lambda_end, d_lambda);

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lambda = grid[i];
        BranchPoint point;
        point.lambda = lambda;
        point.psi = psi;
        point.seeded = !previous.has_value();

        State x;
        NewtonReport rep;
        if (point.seeded) {
            auto s = detail::solve_from_seed(newton, lifter, seed, lambda, psi, opt);
            x = std::move(s.state);
            rep = std::move(s.report);
            point.rejected = s.rejected;
        } else {
            std::tie(x, rep) = newton.solve(*previous, lambda, psi);
            // Close to the departure the branch grows like a square root and a
            // plain step from the last state can fall back onto the trivial one.
            if (!(rep.converged && x.field(Field::u).lpNorm<Eigen::Infinity>() >= opt.delta)) {
                auto s = detail::solve_from_seed(newton, lifter, seed, lambda, psi, opt);
                if (s.report.converged && s.state.field(Field::u).lpNorm<Eigen::Infinity>() >= opt.delta) {
                    x = std::move(s.state);
                    rep = std::move(s.report);
                    point.seeded = true;
                }
            }
        }

        if (rep.converged && x.field(Field::u).lpNorm<Eigen::Infinity>() < opt.delta) {
            // Below the threshold the point is the trivial solution, which is exact.
            x = State(x.space);
        }
        const Vector u = x.field(Field::u);
        point.converged = rep.converged;
        point.iterations = rep.iterations;
        point.ordinate = max_abs(u).value;
        const bool nontrivial = rep.converged && u.lpNorm<Eigen::Infinity>() >= opt.delta;
        if (nontrivial) {
            previous = x;
            if (!first_nontrivial) {
                first_nontrivial = i;
            }
        } else {
            previous.reset();
        }
        if (opt.store_every > 0 && i % static_cast<std::size_t>(opt.store_every) == 0) {
            point.state = std::move(x);
        }
        branch.points.push_back(std::move(point));
    }

    if (first_nontrivial) {
        if (*first_nontrivial == 0) {
            branch.bifurcation = grid.front();
        } else {
            double lo = grid[*first_nontrivial - 1];
            double hi = grid[*first_nontrivial];
            while (opt.refine && hi - lo > d_lambda / 8.0 + 1e-12) {
                const double mid = 0.5 * (lo + hi);
                const auto s = detail::solve_from_seed(newton, lifter, seed, mid, psi, opt);
                const bool buckled =
                    s.report.converged && s.state.field(Field::u).lpNorm<Eigen::Infinity>() >= opt.delta;
                (buckled ? hi : lo) = mid;
            }
            branch.bifurcation = 0.5 * (lo + hi);
        }
    }
    return branch;
}

inline BifurcationDiagram sweep_diagram(const PlateOperators& ops, double lambda_start, double lambda_end,
                                        double d_lambda, double psi, const std::vector<BranchSeed>& seeds,
                                        const ContinuationOptions& opt = {})
{
    detail::check_sweep(lambda_start, lambda_end, d_lambda, opt);
    BifurcationDiagram diagram;
    for (double lambda : detail::lambda_grid(lambda_start, lambda_end, d_lambda)) {
        diagram.trivial_branch.emplace_back(lambda, 0.0);
    }
    for (const auto& seed : seeds) {
        diagram.branches.push_back(trace_branch(ops, lambda_start, lambda_end, d_lambda, psi, seed, opt));
        if (diagram.branches.back().bifurcation) {
            diagram.detected_bifurcations.push_back(*diagram.branches.back().bifurcation);
        }
    }
    std::sort(diagram.detected_bifurcations.begin(), diagram.detected_bifurcations.end());
    return diagram;
}

struct PsiSweepRow {
    double psi = 0.0;
    Branch branch;
    std::optional<double> critical_load;
};

/// First-mode branch and its critical load for each psi on the grid.
inline std::vector<PsiSweepRow> sweep_2d(const PlateOperators& ops, double lambda_start, double lambda_end,
                                         double d_lambda, const std::vector<double>& psi_grid,
                                         const BranchSeed& seed, const ContinuationOptions& opt = {})
{
    for (double psi : psi_grid) {
        if (psi < 0.0 || psi > 2.0) {
            throw InvalidArgument("sweep_2d: psi values must lie in [0, 2]");
        }
    }
    // The lowest mode changes symmetry class as psi grows (two half-waves in x
    // at psi = 2), so each row follows the first mode rather than the seed's.
    ContinuationOptions row_opt = opt;
    row_opt.first_mode = true;
    std::vector<PsiSweepRow> rows;
    for (double psi : psi_grid) {
        PsiSweepRow row;
        row.psi = psi;
        row.branch = trace_branch(ops, lambda_start, lambda_end, d_lambda, psi, seed, row_opt);
        row.critical_load = row.branch.bifurcation;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace vkrom
