#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "common.hpp"
#include "vkrom/continuation.hpp"
#include "vkrom/solver.hpp"

using namespace vkrom;
using vkrom::testing::Plate;
using vkrom::testing::random_vector;

namespace {

const Plate& plate()
{
    static const Plate p(1.0, 8);
    return p;
}

State random_state(std::mt19937_64& rng, double scale = 1.0)
{
    return State(plate().space, random_vector(rng, 4 * plate().ops.size(), scale));
}

// The quadratic part of the residual: (0, M(phi) u, 0, -M(u) u).
Vector quadratic_part(const State& x)
{
    const FeSpace& s = *plate().space;
    const Vector u = x.field(Field::u);
    const Vector phi = x.field(Field::phi);
    const int n = x.block_size();
    Vector q = Vector::Zero(4 * n);
    q.segment(n, n) = assemble_bracket(s, to_full(s, phi)) * u;
    q.segment(3 * n, n) = -(assemble_bracket(s, to_full(s, u)) * u);
    return q;
}

} // namespace

TEST(Residual, VanishesAtTrivialState)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lam(0.0, 200.0), psi(0.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        EXPECT_EQ(residual(plate().ops, State(plate().space), lam(rng), psi(rng)).norm(), 0.0);
    }
}

TEST(Residual, ScalingIsolatesBracketTerms)
{
    std::mt19937_64 rng(2);
    for (int k = 0; k < 5; ++k) {
        const State x = random_state(rng);
        const State x2(plate().space, 2.0 * x.data);
        const Vector lhs = residual(plate().ops, x2, 40.0, 0.5) - 2.0 * residual(plate().ops, x, 40.0, 0.5);
        const Vector rhs = 2.0 * quadratic_part(x);
        EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
    }
}

TEST(Residual, RejectsStateFromAnotherSpace)
{
    const Plate other(1.0, 4);
    EXPECT_THROW(residual(plate().ops, State(other.space), 1.0, 0.0), InvalidArgument);
}

TEST(Jacobian, LinearizationAtTrivialState)
{
    const PlateOperators& ops = plate().ops;
    const int n = ops.size();
    const double lambda = 37.0, psi = 0.7;
    const DenseMatrix j(jacobian(ops, State(plate().space), lambda, psi).matrix);
    DenseMatrix expected = DenseMatrix::Zero(4 * n, 4 * n);
    const DenseMatrix a(ops.stiffness), b(ops.mass), d(ops.load(psi));
    expected.block(0, 0, n, n) = a;
    expected.block(0, n, n, n) = b;
    expected.block(n, 0, n, n) = lambda * d;
    expected.block(n, n, n, n) = a;
    expected.block(2 * n, 2 * n, n, n) = a;
    expected.block(2 * n, 3 * n, n, n) = b;
    expected.block(3 * n, 3 * n, n, n) = a;
    EXPECT_LT((j - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jacobian, FiniteDifferenceSlopeIsOne)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lam(0.0, 100.0), psi(0.0, 2.0);
    const double ts[] = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    for (int k = 0; k < 20; ++k) {
        const State x = random_state(rng);
        const Vector w = random_vector(rng, x.data.size());
        const double l = lam(rng), p = psi(rng);
        const Vector g = residual(plate().ops, x, l, p);
        const Vector jw = jacobian(plate().ops, x, l, p).apply(w);
        std::vector<double> errs;
        for (double t : ts) {
            const State xt(plate().space, x.data + t * w);
            errs.push_back(((residual(plate().ops, xt, l, p) - g) / t - jw).norm());
        }
        // Quadratic residual: the error is exactly t * q(w), so each decade
        // of t removes a decade of error until roundoff.
        for (std::size_t i = 0; i + 2 < errs.size(); ++i) {
            const double slope = std::log10(errs[i] / errs[i + 1]);
            EXPECT_NEAR(slope, 1.0, 0.05) << "t=" << ts[i];
        }
    }
}

TEST(Jacobian, EulerIdentityForQuadraticResidual)
{
    std::mt19937_64 rng(4);
    for (int k = 0; k < 5; ++k) {
        const State x = random_state(rng);
        const Vector jx = jacobian(plate().ops, x, 50.0, 1.0).apply(x.data);
        const Vector g = residual(plate().ops, x, 50.0, 1.0);
        const Vector q = quadratic_part(x);
        EXPECT_LE((jx - g - q).norm(), 1e-10 * q.norm());
    }
}

TEST(Newton, TrivialGuessBelowBucklingStaysTrivial)
{
    const auto [x, rep] = newton_solve(plate().ops, State(plate().space), 30.0, 0.0);
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    EXPECT_EQ(x.data.norm(), 0.0);
}

class PostBuckling : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        const SeedLifter lifter(plate().ops);
        guess_ = new State(lifter.seed({1, 1, 1.0, 1}, 45.0, 0.0));
        auto [x, rep] = newton_solve(plate().ops, *guess_, 45.0, 0.0);
        solution_ = new State(std::move(x));
        report_ = new NewtonReport(std::move(rep));
    }
    static void TearDownTestSuite()
    {
        delete guess_;
        delete solution_;
        delete report_;
    }
    static State* guess_;
    static State* solution_;
    static NewtonReport* report_;
};

State* PostBuckling::guess_ = nullptr;
State* PostBuckling::solution_ = nullptr;
NewtonReport* PostBuckling::report_ = nullptr;

TEST_F(PostBuckling, ConvergesToNontrivialSolution)
{
    ASSERT_TRUE(report_->converged);
    EXPECT_GT(solution_->field(Field::u).lpNorm<Eigen::Infinity>(), 1e-4);
    EXPECT_LE(residual(plate().ops, *solution_, 45.0, 0.0).norm(), 1e-9);
    EXPECT_EQ(solution_->provenance, Provenance::FullOrder);
}

TEST_F(PostBuckling, NegatedGuessGivesNegatedSolution)
{
    State neg = *guess_;
    neg.field(Field::u) *= -1.0;
    neg.field(Field::U) *= -1.0;
    const auto [y, rep] = newton_solve(plate().ops, neg, 45.0, 0.0);
    ASSERT_TRUE(rep.converged);
    EXPECT_LE((y.field(Field::u) + solution_->field(Field::u)).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE((y.field(Field::phi) - solution_->field(Field::phi)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST_F(PostBuckling, SignFlipOfDisplacementFieldsIsASolution)
{
    State flipped = *solution_;
    flipped.field(Field::u) *= -1.0;
    flipped.field(Field::U) *= -1.0;
    EXPECT_LE(residual(plate().ops, flipped, 45.0, 0.0).norm(), 1e-10);
}

TEST_F(PostBuckling, ConvergenceIsQuadratic)
{
    const auto& e = report_->increment_norms;
    ASSERT_GE(e.size(), 3u);
    // Order estimate from the last three increments before roundoff.
    std::vector<double> tail;
    for (double v : e) {
        if (v > 1e-13) {
            tail.push_back(v);
        }
    }
    ASSERT_GE(tail.size(), 3u);
    const std::size_t k = tail.size() - 1;
    const double order = std::log(tail[k] / tail[k - 1]) / std::log(tail[k - 1] / tail[k - 2]);
    EXPECT_GE(order, 1.8);
}

TEST(Newton, RejectsNonpositiveTolerance)
{
    NewtonOptions opt;
    opt.tol = 0.0;
    EXPECT_THROW(NewtonSolver(plate().ops, opt), InvalidArgument);
}

TEST(Newton, SameInputsGiveBitwiseSameOutput)
{
    std::mt19937_64 rng(8);
    const State g = random_state(rng, 0.1);
    const auto [a, ra] = newton_solve(plate().ops, g, 50.0, 0.3);
    const auto [b, rb] = newton_solve(plate().ops, g, 50.0, 0.3);
    EXPECT_EQ(ra.iterations, rb.iterations);
    EXPECT_TRUE(a.data == b.data);
}

TEST(Norms, StackedSeminormOfSingleField)
{
    std::mt19937_64 rng(6);
    const int n = plate().ops.size();
    Vector x = Vector::Zero(4 * n);
    x.segment(2 * n, n) = random_vector(rng, n);
    EXPECT_NEAR(stacked_h1_norm(plate().ops.stiffness, x), h1_seminorm(*plate().space, x.segment(2 * n, n)), 1e-12);
}
