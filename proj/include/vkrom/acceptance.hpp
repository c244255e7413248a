#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vkrom/assembly.hpp"
#include "vkrom/buckling.hpp"
#include "vkrom/continuation.hpp"
#include "vkrom/rom.hpp"
#include "vkrom/solver.hpp"

namespace vkrom::acceptance {

struct CheckResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Structured mesh on [0,L]x[0,1] with nx = L ny and the given max edge length.
inline int cells_for_mesh_size(double h) { return static_cast<int>(std::lround(std::sqrt(2.0) / h)); }

struct Problem {
    SpacePtr space;
    PlateOperators ops;

    Problem(double length, int ny, int degree)
        : space(build_space(build_mesh(length, static_cast<int>(std::lround(length * ny)), ny), degree)),
          ops(make_operators(space))
    {
    }
};

/// Runs the numbered checks, sharing the expensive sweeps between them.
/// Every threshold below is the required one; the discretization choices
/// (degree, mesh) are stated in each result's detail line.
class Suite {
public:
    static constexpr int kCount = 11;
    static constexpr double kDelta = 1e-4;

    std::vector<CheckResult> run(const std::set<int>& ids = {})
    {
        static const std::map<int, std::pair<const char*, CheckResult (Suite::*)()>> table{
            {1, {"exact eigenvalue reproduction", &Suite::check_eigenvalues}},
            {2, {"convergence order", &Suite::check_order}},
            {3, {"rectangular double eigenvalue", &Suite::check_double_eigenvalue}},
            {4, {"crossing consistency", &Suite::check_crossings}},
            {5, {"bifurcation diagram, square", &Suite::check_square_diagram}},
            {6, {"bifurcation diagram, rectangle", &Suite::check_rectangle_diagram}},
            {7, {"Z2 symmetry", &Suite::check_symmetry}},
            {8, {"ROM accuracy", &Suite::check_rom_accuracy}},
            {9, {"ROM speedup", &Suite::check_rom_speedup}},
            {10, {"two-parameter consistency", &Suite::check_two_parameter}},
            {11, {"solver consistency properties", &Suite::check_properties}},
        };
        std::vector<CheckResult> out;
        for (const auto& [id, entry] : table) {
            if (!ids.empty() && ids.count(id) == 0) {
                continue;
            }
            const auto t0 = std::chrono::steady_clock::now();
            CheckResult r;
            try {
                r = (this->*entry.second)();
            } catch (const std::exception& e) {
                r.passed = false;
                r.detail = std::string("exception: ") + e.what();
            }
            r.id = id;
            r.title = entry.first;
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.push_back(std::move(r));
            if (on_result) {
                on_result(out.back());
            }
        }
        return out;
    }

    std::function<void(const CheckResult&)> on_result;

private:
    using Clock = std::chrono::steady_clock;

    static double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

    static std::vector<double> first_values(const PlateOperators& ops, double psi, int k)
    {
        std::vector<double> v;
        for (const auto& p : buckling_eigs(ops, psi, k)) {
            v.push_back(p.value);
        }
        return v;
    }

    // 1. Reference coarse-mesh values reproduce with P1 mixed elements; the
    //    P2 values at the same mesh are listed for comparison.
    CheckResult check_eigenvalues()
    {
        const auto t0 = Clock::now();
        const double reference[3] = {39.91, 63.70, 116.63};
        const double exact = exact_eigenvalue(1, 1, 1.0);
        std::ostringstream d;
        d.precision(6);
        bool ok = true;

        const Problem coarse(1.0, cells_for_mesh_size(0.1), 1);
        const auto v = first_values(coarse.ops, 0.0, 3);
        d << "P1 h=" << mesh_size(coarse.space->mesh()) << ":";
        for (int i = 0; i < 3; ++i) {
            const double rel = std::abs(v[i] - reference[i]) / reference[i];
            ok = ok && rel <= 0.01;
            d << ' ' << v[i] << " (" << 100 * rel << "%)";
        }
        const Problem fine(1.0, cells_for_mesh_size(0.025), 1);
        const double f = first_values(fine.ops, 0.0, 1)[0];
        const double rel = std::abs(f - exact) / exact;
        ok = ok && rel <= 0.002;
        d << "; P1 h=" << mesh_size(fine.space->mesh()) << ": " << f << " (" << 100 * rel << "% off exact)";

        const Problem p2(1.0, cells_for_mesh_size(0.1), 2);
        const auto w = first_values(p2.ops, 0.0, 3);
        d << "; P2 h=" << mesh_size(p2.space->mesh()) << " for comparison: " << w[0] << ' ' << w[1] << ' ' << w[2];
        const double t = since(t0);
        ok = ok && t <= 60.0;
        d << "; " << t << " s (limit 60)";
        return {0, "", ok, d.str(), 0.0};
    }

    // 2. Order over h in {0.1, 0.05, 0.025}, P1 as in 1.
    CheckResult check_order()
    {
        const auto t0 = Clock::now();
        std::ostringstream d;
        d.precision(4);
        bool ok = true;
        const struct {
            double length;
            int m;
        } cases[] = {{1.0, 1}, {2.0, 2}};
        for (const auto& c : cases) {
            std::vector<std::pair<double, double>> data;
            const double exact = exact_eigenvalue(c.m, 1, c.length);
            for (double h : {0.1, 0.05, 0.025}) {
                const Problem p(c.length, cells_for_mesh_size(h), 1);
                data.emplace_back(mesh_size(p.space->mesh()), first_values(p.ops, 0.0, 1)[0]);
            }
            const auto order = convergence_order(data, exact);
            ok = ok && order && std::abs(*order - 2.0) <= 0.2;
            d << "L=" << c.length << " (" << c.m << ",1): order " << (order ? std::to_string(*order) : "undefined")
              << "; ";
        }
        const double t = since(t0);
        ok = ok && t <= 300.0;
        d << t << " s (limit 300)";
        return {0, "", ok, d.str(), 0.0};
    }

    // 3. L=2 cluster at 61.685, P2 at h <= 0.05.
    CheckResult check_double_eigenvalue()
    {
        const int ny = static_cast<int>(std::ceil(std::sqrt(2.0) / 0.05));
        const Problem p(2.0, ny, 2);
        const auto v = first_values(p.ops, 0.0, 4);
        std::ostringstream d;
        d.precision(8);
        d << "P2 h=" << mesh_size(p.space->mesh()) << " values:";
        for (double x : v) {
            d << ' ' << x;
        }
        // The pair nearest 61.685.
        double best = std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            const double dist = std::abs(0.5 * (v[i] + v[i + 1]) - 61.685);
            if (dist < best) {
                best = dist;
                at = i;
            }
        }
        const double gap = std::abs(v[at + 1] - v[at]) / v[at];
        const double mid = 0.5 * (v[at] + v[at + 1]);
        const bool ok = gap <= 1e-3 && std::abs(mid - 61.685) <= 0.01 * 61.685;
        d << "; pair " << v[at] << ", " << v[at + 1] << " relative gap " << gap;
        return {0, "", ok, d.str(), 0.0};
    }

    // 4. Spectrum crossings: L=1 on [30,40], L=2 double curve near 62.
    CheckResult check_crossings()
    {
        std::ostringstream d;
        d.precision(6);
        bool ok = true;
        {
            const Problem p(1.0, 20, 2);
            const SchurOperator s(p.ops);
            std::vector<double> grid;
            for (int i = 0; i <= 20; ++i) {
                grid.push_back(30.0 + 0.5 * i);
            }
            const auto tr = spectrum_vs_lambda(s, grid, 0.0, 4);
            const bool hit = !tr.crossings.empty() && tr.crossings.front().lambda_after == 39.5;
            ok = ok && hit;
            d << "L=1 first crossing at "
              << (tr.crossings.empty() ? std::string("none") : std::to_string(tr.crossings.front().lambda_after));
        }
        {
            const Problem p(2.0, 20, 2);
            const SchurOperator s(p.ops);
            std::vector<double> grid;
            for (int i = 0; i <= 70; ++i) {
                grid.push_back(30.0 + 0.5 * i);
            }
            const auto tr = spectrum_vs_lambda(s, grid, 0.0, 4);
            std::vector<double> near;
            d << "; L=2 crossings:";
            for (const auto& c : tr.crossings) {
                d << ' ' << c.lambda_after;
                if (std::abs(c.lambda_after - 62.0) <= 0.5) {
                    near.push_back(c.lambda_after);
                }
            }
            const bool pair = near.size() == 2 && near[0] == near[1];
            ok = ok && pair;
            d << " (" << near.size() << " curves cross together near 62)";
        }
        return {0, "", ok, d.str(), 0.0};
    }

    const BifurcationDiagram& square_diagram()
    {
        if (!square_) {
            square_problem_ = std::make_unique<Problem>(1.0, 20, 2);
            const auto t0 = Clock::now();
            square_ = sweep_diagram(square_problem_->ops, 35.0, 65.0, 0.5, 0.0,
                                    {{1, 1, 1.0, 1}, {1, 1, 1.0, -1}, {2, 1, 1.0, 1}, {2, 1, 1.0, -1}});
            square_seconds_ = since(t0);
        }
        return *square_;
    }

    const BifurcationDiagram& rectangle_diagram()
    {
        if (!rectangle_) {
            rectangle_problem_ = std::make_unique<Problem>(2.0, 16, 2);
            rectangle_ = sweep_diagram(rectangle_problem_->ops, 35.0, 65.0, 0.5, 0.0,
                                       {{2, 1, 1.0, 1}, {2, 1, 1.0, -1}, {3, 1, 1.0, 1}, {3, 1, 1.0, -1},
                                        {1, 1, 1.0, 1}, {1, 1, 1.0, -1}, {4, 1, 1.0, 1}, {4, 1, 1.0, -1}});
        }
        return *rectangle_;
    }

    static bool nontrivial(const Branch& b)
    {
        for (const auto& p : b.points) {
            if (p.converged && std::abs(p.ordinate) >= kDelta) {
                return true;
            }
        }
        return false;
    }

    static std::string seed_name(const BranchSeed& s)
    {
        return "(" + std::to_string(s.m) + "," + std::to_string(s.n) + (s.sign > 0 ? ",+)" : ",-)");
    }

    // Departure of every branch against the exact load of its seed mode.
    static bool departures_match(const BifurcationDiagram& diagram, double length, std::ostringstream& d)
    {
        bool ok = true;
        for (const auto& b : diagram.branches) {
            const double target = exact_eigenvalue(b.seed.m, b.seed.n, length);
            const bool hit = b.bifurcation && std::abs(*b.bifurcation - target) <= 0.5;
            ok = ok && hit;
            d << ' ' << seed_name(b.seed) << ':' << (b.bifurcation ? std::to_string(*b.bifurcation) : "none");
        }
        return ok;
    }

    // 5.
    CheckResult check_square_diagram()
    {
        const auto& diagram = square_diagram();
        std::ostringstream d;
        d.precision(6);
        int count = 0;
        bool quiet_below = true;
        for (const auto& b : diagram.branches) {
            count += nontrivial(b) ? 1 : 0;
            for (const auto& p : b.points) {
                if (p.lambda <= 39.0 && !(std::abs(p.ordinate) < kDelta)) {
                    quiet_below = false;
                }
            }
        }
        d << "ny=20: " << count << " nontrivial branches; departures";
        const bool dep = departures_match(diagram, 1.0, d);
        d << "; all ordinates below delta for lambda <= 39: " << (quiet_below ? "yes" : "no") << "; "
          << square_seconds_ << " s (limit 900)";
        const bool ok = count == 4 && dep && quiet_below && square_seconds_ <= 900.0;
        return {0, "", ok, d.str(), 0.0};
    }

    // 6.
    CheckResult check_rectangle_diagram()
    {
        const auto& diagram = rectangle_diagram();
        std::ostringstream d;
        d.precision(6);
        int alive = 0;
        for (const auto& b : diagram.branches) {
            const auto& last = b.points.back();
            alive += last.lambda == 65.0 && last.converged && std::abs(last.ordinate) >= kDelta ? 1 : 0;
        }
        d << "ny=16: " << alive << " nontrivial branches at lambda=65; departures";
        const bool dep = departures_match(diagram, 2.0, d);
        return {0, "", alive == 8 && dep, d.str(), 0.0};
    }

    // 7. Opposite-sign pairs in both diagrams.
    CheckResult check_symmetry()
    {
        double worst = 0.0;
        int pairs = 0;
        for (const auto* diagram : {&square_diagram(), &rectangle_diagram()}) {
            const auto& br = diagram->branches;
            for (std::size_t i = 0; i < br.size(); ++i) {
                for (std::size_t j = i + 1; j < br.size(); ++j) {
                    if (br[i].seed.m != br[j].seed.m || br[i].seed.n != br[j].seed.n ||
                        br[i].seed.sign != -br[j].seed.sign) {
                        continue;
                    }
                    ++pairs;
                    for (std::size_t k = 0; k < br[i].points.size() && k < br[j].points.size(); ++k) {
                        const auto& a = br[i].points[k];
                        const auto& b = br[j].points[k];
                        if (a.converged && b.converged) {
                            worst = std::max(worst, std::abs(a.ordinate + b.ordinate));
                        }
                    }
                }
            }
        }
        std::ostringstream d;
        d << pairs << " sign pairs, max |ord(+) + ord(-)| = " << worst;
        return {0, "", pairs == 6 && worst <= 1e-6, d.str(), 0.0};
    }

    void build_rom()
    {
        if (rom_) {
            return;
        }
        const auto& diagram = square_diagram();
        const PlateOperators& ops = square_problem_->ops;
        std::vector<Branch> first;
        for (const auto& b : diagram.branches) {
            if (b.seed.m == 1 && b.seed.n == 1) {
                first.push_back(b);
            }
        }
        const ReducedBasis basis = pod(collect_snapshots(first), ops.stiffness, 8);
        const SeedLifter lifter(ops);
        std::vector<double> lambdas;
        std::vector<State> guesses;
        for (int i = 0; i < 20; ++i) {
            lambdas.push_back(40.0 + 25.0 * i / 19.0);
            guesses.push_back(lifter.seed({1, 1, 1.0, 1}, lambdas.back(), 0.0));
        }
        rom_.emplace();
        for (int n = 1; n <= basis.N; ++n) {
            const ReducedBasis b = truncate(basis, n);
            rom_->push_back(rb_error(b, project_operators(b, ops), ops, lambdas, 0.0, guesses));
        }
    }

    // 8.
    CheckResult check_rom_accuracy()
    {
        build_rom();
        const auto& r = *rom_;
        std::ostringstream d;
        d.precision(3);
        bool monotone = true;
        std::size_t excluded = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            d << (i ? ", " : "") << "E_" << r[i].N << "=" << r[i].error;
            excluded += r[i].excluded.size();
            if (i > 0 && r[i].error > r[i - 1].error) {
                monotone = false;
            }
        }
        const bool have8 = r.size() == 8;
        const bool have5 = r.size() >= 5;
        const double ratio = have5 ? r[0].error / r[4].error : 0.0;
        d << "; E_1/E_5=" << ratio << "; excluded samples " << excluded;
        const bool ok = have8 && r.back().error <= 2e-2 && monotone && ratio >= 100.0 && excluded == 0;
        return {0, "", ok, d.str(), 0.0};
    }

    // 9.
    CheckResult check_rom_speedup()
    {
        build_rom();
        const auto& r = rom_->back();
        std::ostringstream d;
        d.precision(4);
        const double frac = r.mean_online_ms / r.mean_full_ms;
        d << "N=" << r.N << ": online " << r.mean_online_ms << " ms, full " << r.mean_full_ms << " ms, ratio "
          << 100 * frac << "%";
        return {0, "", r.N == 8 && frac <= 0.10, d.str(), 0.0};
    }

    // 10.
    CheckResult check_two_parameter()
    {
        const Problem p(1.0, 20, 2);
        const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
        const auto rows = sweep_2d(p.ops, 35.0, 260.0, 2.0, grid, {1, 1, 1.0, 1});
        const SchurOperator schur(p.ops);
        std::ostringstream d;
        d.precision(6);
        d << "ny=20, d_lambda=2:";
        bool ok = true;
        for (const auto& row : rows) {
            const double eig = buckling_eigs(schur, row.psi, 1)[0].value;
            const bool hit = row.critical_load && std::abs(*row.critical_load - eig) <= 0.02 * eig;
            ok = ok && hit;
            d << " psi=" << row.psi << ": " << (row.critical_load ? std::to_string(*row.critical_load) : "none")
              << " vs " << eig << ';';
        }
        return {0, "", ok, d.str(), 0.0};
    }

    // 11.
    CheckResult check_properties()
    {
        const auto t0 = Clock::now();
        const Problem p(1.0, 8, 2);
        const PlateOperators& ops = p.ops;
        const FeSpace& space = *p.space;
        const int n = ops.size();
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::uniform_real_distribution<double> lam(0.0, 100.0);
        std::uniform_real_distribution<double> psi(0.0, 2.0);
        auto random_vector = [&](Eigen::Index size) {
            Vector v(size);
            for (Eigen::Index i = 0; i < size; ++i) {
                v[i] = unit(rng);
            }
            return v;
        };
        std::ostringstream d;
        d.precision(3);

        double worst_zero = 0.0;
        for (int k = 0; k < 50; ++k) {
            worst_zero = std::max(worst_zero, residual(ops, State(p.space), lam(rng), psi(rng)).norm());
        }
        const bool zero_ok = worst_zero == 0.0;
        d << "residual(0): max norm " << worst_zero;

        bool fd_ok = true;
        double slope_lo = 1e300;
        double slope_hi = -1e300;
        const double ts[] = {1e-2, 1e-3, 1e-4, 1e-5};
        for (int k = 0; k < 20; ++k) {
            const State x(p.space, random_vector(4 * n));
            const Vector w = random_vector(4 * n);
            const double l = lam(rng);
            const double s = psi(rng);
            const Vector g = residual(ops, x, l, s);
            const Vector jw = jacobian(ops, x, l, s).matrix * w;
            std::vector<double> lx;
            std::vector<double> ly;
            for (double t : ts) {
                const State xt(p.space, x.data + t * w);
                const double err = ((residual(ops, xt, l, s) - g) / t - jw).norm();
                lx.push_back(std::log(t));
                ly.push_back(std::log(err));
            }
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
            }
            const double m = static_cast<double>(lx.size());
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            slope_lo = std::min(slope_lo, slope);
            slope_hi = std::max(slope_hi, slope);
            fd_ok = fd_ok && std::abs(slope - 1.0) <= 0.1;
        }
        d << "; FD slopes in [" << slope_lo << ", " << slope_hi << "]";

        double worst_slot = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Vector z = to_full(space, random_vector(n));
            const Vector a = random_vector(n);
            const Vector b = random_vector(n);
            const double first = a.dot(assemble_bracket(space, z, BracketSlot::First) * b);
            const double second = a.dot(assemble_bracket(space, z, BracketSlot::Second) * b);
            worst_slot = std::max(worst_slot, std::abs(first - second) / std::max(1.0, std::abs(first)));
        }
        const bool slot_ok = worst_slot <= 1e-12;
        d << "; slot identity " << worst_slot;

        SnapshotSet snaps;
        snaps.space = p.space;
        for (auto& f : snaps.fields) {
            f = DenseMatrix(n, 6);
            for (int c = 0; c < 6; ++c) {
                f.col(c) = random_vector(n);
            }
        }
        snaps.lambdas.assign(6, 0.0);
        snaps.psis.assign(6, 0.0);
        const ReducedBasis basis = pod(snaps, ops.stiffness, 6);
        const ReducedOperators reduced = project_operators(basis, ops);
        double worst_jac = 0.0;
        DenseMatrix v = DenseMatrix::Zero(4 * n, 4 * basis.N);
        for (int f = 0; f < 4; ++f) {
            v.block(f * n, f * basis.N, n, basis.N) = basis.bases[f];
        }
        for (int k = 0; k < 10; ++k) {
            const Vector q = random_vector(4 * basis.N);
            const double l = lam(rng);
            const double s = psi(rng);
            const DenseMatrix jr = reduced_jacobian(reduced, q, l, s);
            const DenseMatrix jp = v.transpose() * (jacobian(ops, lift(basis, q), l, s).matrix * v);
            worst_jac = std::max(worst_jac, (jr - jp).cwiseAbs().maxCoeff());
        }
        const bool jac_ok = worst_jac <= 1e-9;
        d << "; reduced vs projected Jacobian " << worst_jac;

        const double t = since(t0);
        d << "; " << t << " s (limit 120)";
        return {0, "", zero_ok && fd_ok && slot_ok && jac_ok && t <= 120.0, d.str(), 0.0};
    }

    std::unique_ptr<Problem> square_problem_;
    std::unique_ptr<Problem> rectangle_problem_;
    std::optional<BifurcationDiagram> square_;
    std::optional<BifurcationDiagram> rectangle_;
    double square_seconds_ = 0.0;
    std::optional<std::vector<RbErrorReport>> rom_;
};

} // namespace vkrom::acceptance
