#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"
#include "vkrom/buckling.hpp"
#include "vkrom/continuation.hpp"

using namespace vkrom;
using vkrom::testing::Plate;

namespace {

const Plate& square()
{
    static const Plate p(1.0, 10);
    return p;
}

const Branch& first_branch(int sign)
{
    static const Branch plus = trace_branch(square().ops, 35.0, 45.0, 0.5, 0.0, {1, 1, 1.0, 1});
    static const Branch minus = trace_branch(square().ops, 35.0, 45.0, 0.5, 0.0, {1, 1, 1.0, -1});
    return sign > 0 ? plus : minus;
}

} // namespace

TEST(TraceBranch, FirstBranchDepartsBetween39And40)
{
    const Branch& b = first_branch(1);
    ASSERT_EQ(b.points.size(), 21u);
    double previous = 0.0;
    for (const auto& p : b.points) {
        EXPECT_TRUE(p.converged) << p.lambda;
        if (p.lambda <= 39.0) {
            EXPECT_LT(std::abs(p.ordinate), 1e-4) << p.lambda;
        }
        if (p.lambda >= 40.0) {
            EXPECT_GT(std::abs(p.ordinate), 1e-4) << p.lambda;
            EXPECT_GT(std::abs(p.ordinate), previous) << p.lambda;
            previous = std::abs(p.ordinate);
        }
    }
    ASSERT_TRUE(b.bifurcation.has_value());
    EXPECT_GE(*b.bifurcation, 39.0);
    EXPECT_LE(*b.bifurcation, 40.0);
}

TEST(TraceBranch, OppositeSeedGivesNegatedBranch)
{
    const Branch& a = first_branch(1);
    const Branch& b = first_branch(-1);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_NEAR(a.points[i].ordinate, -b.points[i].ordinate, 1e-8) << a.points[i].lambda;
    }
    EXPECT_EQ(a.bifurcation, b.bifurcation);
}

TEST(TraceBranch, DepartureMatchesBucklingLoad)
{
    const double l = buckling_eigs(square().ops, 0.0, 1)[0].value;
    EXPECT_NEAR(*first_branch(1).bifurcation, l, 0.5);
}

TEST(TraceBranch, StoresEveryFifthState)
{
    const Branch& b = first_branch(1);
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        EXPECT_EQ(b.points[i].state.has_value(), i % 5 == 0) << i;
    }
}

TEST(TraceBranch, NoNontrivialSolutionBelowFirstLoad)
{
    const Branch b = trace_branch(square().ops, 35.0, 38.0, 0.5, 0.0, {1, 1, 1.0, 1});
    for (const auto& p : b.points) {
        EXPECT_LT(std::abs(p.ordinate), 1e-4) << p.lambda;
    }
    EXPECT_FALSE(b.bifurcation.has_value());
}

TEST(TraceBranch, RerunIsBitwiseIdentical)
{
    const Branch b = trace_branch(square().ops, 35.0, 45.0, 0.5, 0.0, {1, 1, 1.0, 1});
    const Branch& a = first_branch(1);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].ordinate, b.points[i].ordinate);
        EXPECT_EQ(a.points[i].iterations, b.points[i].iterations);
    }
}

TEST(TraceBranch, RejectsBadInput)
{
    EXPECT_THROW(trace_branch(square().ops, 40.0, 35.0, 0.5, 0.0, {}), InvalidArgument);
    EXPECT_THROW(trace_branch(square().ops, 35.0, 40.0, 0.0, 0.0, {}), InvalidArgument);
    EXPECT_THROW(trace_branch(square().ops, 35.0, 40.0, 0.5, 0.0, {0, 1, 1.0, 1}), InvalidArgument);
    EXPECT_THROW(trace_branch(square().ops, 35.0, 40.0, 0.5, 0.0, {1, 1, 1.0, 0}), InvalidArgument);
}

TEST(SeedLifter, LiftSatisfiesAuxiliaryRows)
{
    const SeedLifter lifter(square().ops);
    const State s = lifter.seed({2, 1, 1.0, -1}, 65.0, 0.0);
    const Vector g = residual(square().ops, s, 65.0, 0.0);
    const int n = s.block_size();
    const double scale = g.norm();
    EXPECT_LE(g.segment(0, n).norm(), 1e-9 * scale);
    EXPECT_LE(g.segment(2 * n, n).norm(), 1e-9 * scale);
    EXPECT_LE(g.segment(3 * n, n).norm(), 1e-9 * scale);
    EXPECT_GT(lifter.overlap({2, 1, 1.0, 1}, s.field(Field::u)), 0.999);
    EXPECT_LT(lifter.overlap({1, 1, 1.0, 1}, s.field(Field::u)), 1e-2);
}

// Under pure in-plane bending the lowest mode has two half-waves in x and
// is orthogonal to the (1,1) sine; the nearest-mode seed stays in the sine's class.
TEST(SeedLifter, GradedLoadSeedsFromDiscreteModes)
{
    const SeedLifter lifter(square().ops);
    const BranchSeed seed{1, 1, 1.0, 1};
    const SchurOperator schur(square().ops);
    const auto pairs = buckling_eigs(schur, 2.0, 2);
    const Vector first = lifter.seed_mode(seed, 2.0, true);
    const Vector nearest = lifter.seed_mode(seed, 2.0, false);
    const Vector sine = lifter.seed_mode(seed, 0.0);
    const auto cosine = [&](const Vector& a, const Vector& b) {
        const SparseMatrix& m = square().ops.mass;
        return std::abs(a.dot(m * b)) / std::sqrt(a.dot(m * a) * b.dot(m * b));
    };
    EXPECT_GT(cosine(first, pairs[0].mode.coeffs), 1.0 - 1e-10);
    EXPECT_LT(cosine(first, sine), 1e-2);
    EXPECT_GT(cosine(nearest, pairs[1].mode.coeffs), 1.0 - 1e-10);
    EXPECT_GT(cosine(nearest, sine), 0.9);
    EXPECT_NEAR(nearest.dot(square().ops.mass * nearest), sine.dot(square().ops.mass * sine), 1e-12);
}

TEST(TraceBranch, TrivialPointsAreExactlyZero)
{
    const Branch& b = first_branch(1);
    for (const auto& p : b.points) {
        if (p.lambda < 39.0) {
            EXPECT_EQ(p.ordinate, 0.0);
            if (p.state) {
                EXPECT_EQ(p.state->data.norm(), 0.0);
            }
        }
    }
}

TEST(SweepDiagram, SquareHasFourBranchesAtTheExpectedLoads)
{
    const auto d = sweep_diagram(square().ops, 35.0, 65.0, 0.5, 0.0,
                                 {{1, 1, 1.0, 1}, {1, 1, 1.0, -1}, {2, 1, 1.0, 1}, {2, 1, 1.0, -1}});
    ASSERT_EQ(d.branches.size(), 4u);
    ASSERT_EQ(d.detected_bifurcations.size(), 4u);
    EXPECT_EQ(d.trivial_branch.size(), 61u);
    const auto eigs = buckling_eigs(square().ops, 0.0, 3);
    for (const auto& b : d.branches) {
        ASSERT_TRUE(b.bifurcation.has_value());
        const double target = b.seed.m == 1 ? 39.48 : 61.69;
        EXPECT_NEAR(*b.bifurcation, target, 0.5);
        double best = 1e300;
        for (const auto& e : eigs) {
            best = std::min(best, std::abs(e.value - *b.bifurcation));
        }
        EXPECT_LE(best, 0.5);
        EXPECT_GT(std::abs(b.points.back().ordinate), 1e-4);
    }
    for (int k : {0, 2}) {
        const auto& p = d.branches[k].points;
        const auto& q = d.branches[k + 1].points;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i].converged && q[i].converged) {
                EXPECT_NEAR(p[i].ordinate, -q[i].ordinate, 1e-8);
            }
        }
    }
}

TEST(SweepDiagram, EmptySeedListGivesTrivialBranchOnly)
{
    const auto d = sweep_diagram(square().ops, 35.0, 65.0, 0.5, 0.0, {});
    EXPECT_TRUE(d.branches.empty());
    EXPECT_TRUE(d.detected_bifurcations.empty());
    EXPECT_EQ(d.trivial_branch.size(), 61u);
}

TEST(Sweep2d, CriticalLoadTracksEigenvalueAcrossPsi)
{
    const Plate p(1.0, 8);
    const std::vector<double> psis{0.0, 0.5, 1.0, 1.5, 2.0};
    const auto rows = sweep_2d(p.ops, 35.0, 260.0, 2.0, psis, {1, 1, 1.0, 1});
    ASSERT_EQ(rows.size(), 5u);
    const SchurOperator s(p.ops);
    double previous = 0.0;
    for (const auto& r : rows) {
        ASSERT_TRUE(r.critical_load.has_value()) << r.psi;
        const double l = buckling_eigs(s, r.psi, 1)[0].value;
        EXPECT_NEAR(*r.critical_load, l, 0.02 * l) << r.psi;
        EXPECT_GE(*r.critical_load, previous);
        previous = *r.critical_load;
    }
    const Branch direct = trace_branch(p.ops, 35.0, 260.0, 2.0, 0.0, {1, 1, 1.0, 1});
    ASSERT_EQ(direct.points.size(), rows[0].branch.points.size());
    for (std::size_t i = 0; i < direct.points.size(); ++i) {
        EXPECT_EQ(direct.points[i].ordinate, rows[0].branch.points[i].ordinate);
    }
}

TEST(Sweep2d, RejectsPsiOutsideRange)
{
    EXPECT_THROW(sweep_2d(square().ops, 35.0, 40.0, 0.5, {0.0, 2.5}, {}), InvalidArgument);
}
