#include <cmath>
#include <numbers>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "common.hpp"
#include "vkrom/buckling.hpp"

using namespace vkrom;
using vkrom::testing::Plate;

namespace {

constexpr double pi2 = std::numbers::pi * std::numbers::pi;

int cells_for(double mesh_size) { return static_cast<int>(std::lround(std::sqrt(2.0) / mesh_size)); }

double b_cosine(const SparseMatrix& b, const Vector& x, const Vector& y)
{
    return std::abs(x.dot(b * y)) / std::sqrt(x.dot(b * x) * y.dot(b * y));
}

} // namespace

TEST(ExactEigenvalue, ClosedForms)
{
    EXPECT_NEAR(exact_eigenvalue(1, 1, 1.0), 4 * pi2, 1e-12);
    EXPECT_NEAR(exact_eigenvalue(1, 1, 1.0), 39.47841, 1e-5);
    EXPECT_NEAR(exact_eigenvalue(3, 1, 2.0), 169.0 / 36.0 * pi2, 1e-12);
    EXPECT_NEAR(exact_eigenvalue(3, 1, 2.0), 46.33230, 1e-5);
    EXPECT_NEAR(exact_eigenvalue(1, 1, 2.0), 25.0 / 4.0 * pi2, 1e-12);
    EXPECT_NEAR(exact_eigenvalue(4, 1, 2.0), 25.0 / 4.0 * pi2, 1e-12);
    EXPECT_NEAR(exact_eigenvalue(4, 1, 2.0), 61.68502, 1e-5);
    EXPECT_THROW(exact_eigenvalue(0, 1, 1.0), InvalidArgument);
    EXPECT_THROW(exact_eigenvalue(1, 1, 0.0), InvalidArgument);
}

TEST(ExactEigenfunction, ValuesAndZeros)
{
    const auto s = build_space(build_mesh(1.0, 10, 10), 2);
    EXPECT_NEAR(eval(exact_eigenfunction(1, 1, 1.0, s), {0.5, 0.5}), 1.0, 1e-14);
    const auto s2 = build_space(build_mesh(2.0, 20, 10), 2);
    const auto f = exact_eigenfunction(2, 1, 2.0, s2);
    for (double y : {0.1, 0.35, 0.5, 0.9}) {
        EXPECT_NEAR(eval(f, {1.0, y}), 0.0, 1e-14);
    }
}

TEST(ExactEigenfunction, ModesAreMassOrthogonal)
{
    double previous = 1e300;
    for (int n : {4, 8, 16}) {
        const auto s = build_space(build_mesh(1.0, n, n), 2);
        const SparseMatrix b = assemble_mass(*s);
        const double c = b_cosine(b, exact_eigenfunction(1, 1, 1.0, s).coeffs, exact_eigenfunction(2, 1, 1.0, s).coeffs);
        EXPECT_LE(c, std::max(previous, 1e-12));
        previous = c;
    }
    EXPECT_LT(previous, 1e-2);
}

TEST(BucklingEigs, SquarePlateP1CoarseColumn)
{
    const Plate p(1.0, cells_for(0.1), 1);
    const auto v = buckling_eigs(p.ops, 0.0, 3);
    const double reference[] = {39.91, 63.70, 116.63};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(v[i].value, reference[i], 0.01 * reference[i]) << i;
    }
}

TEST(BucklingEigs, RectangularPlateP1CoarseColumn)
{
    const Plate p(2.0, cells_for(0.1), 1);
    const auto v = buckling_eigs(p.ops, 0.0, 4);
    const double reference[] = {40.74, 49.15, 62.08, 67.44};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(v[i].value, reference[i], 0.01 * reference[i]) << i;
    }
}

TEST(BucklingEigs, FineMeshApproachesExact)
{
    const Plate p(1.0, 20);
    const auto v = buckling_eigs(p.ops, 0.0, 1);
    const double h = mesh_size(p.space->mesh());
    EXPECT_NEAR(v[0].value, exact_eigenvalue(1, 1, 1.0), 39.47841 * h * h);
}

TEST(BucklingEigs, P1OrderOverRefinementLadder)
{
    for (const auto [length, m] : {std::pair{1.0, 1}, std::pair{2.0, 2}}) {
        std::vector<std::pair<double, double>> data;
        for (double h : {0.1, 0.05, 0.025}) {
            const Plate p(length, cells_for(h), 1);
            data.emplace_back(mesh_size(p.space->mesh()), buckling_eigs(p.ops, 0.0, 1)[0].value);
        }
        const auto order = convergence_order(data, exact_eigenvalue(m, 1, length));
        ASSERT_TRUE(order.has_value());
        EXPECT_NEAR(*order, 2.0, 0.2) << "L=" << length;
    }
}

TEST(BucklingEigs, ModesMatchExactEigenfunctions)
{
    const Plate p(1.0, 12);
    const auto v = buckling_eigs(p.ops, 0.0, 3);
    const int ms[] = {1, 2, 3};
    for (int i = 0; i < 3; ++i) {
        const Vector e = exact_eigenfunction(ms[i], 1, 1.0, p.space).coeffs;
        EXPECT_GE(b_cosine(p.ops.mass, v[i].mode.coeffs, e), 0.99) << i;
        EXPECT_NEAR(h1_seminorm(v[i].mode), 1.0, 1e-10);
    }
}

TEST(BucklingEigs, DoubleEigenvalueSubspace)
{
    const Plate p(2.0, 12);
    const auto v = buckling_eigs(p.ops, 0.0, 4);
    const int ms[] = {2, 3};
    for (int i = 0; i < 2; ++i) {
        EXPECT_GE(b_cosine(p.ops.mass, v[i].mode.coeffs, exact_eigenfunction(ms[i], 1, 2.0, p.space).coeffs), 0.99);
    }
    // Principal angles between span{v3, v4} and span{u11, u41} in the B inner product.
    const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol{Eigen::SparseMatrix<double>(p.ops.mass)};
    auto orth = [&](const Vector& a, const Vector& b) {
        DenseMatrix m(a.size(), 2);
        m.col(0) = a;
        m.col(1) = b;
        const DenseMatrix w = chol.matrixU() * (chol.permutationP() * m);
        return DenseMatrix(Eigen::HouseholderQR<DenseMatrix>(w).householderQ() * DenseMatrix::Identity(a.size(), 2));
    };
    const DenseMatrix q1 = orth(v[2].mode.coeffs, v[3].mode.coeffs);
    const DenseMatrix q2 = orth(exact_eigenfunction(1, 1, 2.0, p.space).coeffs,
                                exact_eigenfunction(4, 1, 2.0, p.space).coeffs);
    const Eigen::JacobiSVD<DenseMatrix> svd(q1.transpose() * q2);
    const double largest_angle = std::acos(std::min(1.0, svd.singularValues().minCoeff()));
    EXPECT_LE(largest_angle, 5.0 * std::numbers::pi / 180.0);
}

TEST(BucklingEigs, PositiveGradientRaisesFirstLoad)
{
    const Plate p(1.0, 8);
    const SchurOperator s(p.ops);
    double previous = 0.0;
    for (double psi : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        const double l = buckling_eigs(s, psi, 1)[0].value;
        EXPECT_GT(l, previous);
        previous = l;
    }
}

TEST(BucklingEigs, RejectsBadCount)
{
    const Plate p(1.0, 4);
    EXPECT_THROW(buckling_eigs(p.ops, 0.0, 0), InvalidArgument);
}

TEST(Spectrum, SquareCrossesAtGridPoint395)
{
    const Plate p(1.0, 10);
    const SchurOperator s(p.ops);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) {
        grid.push_back(30.0 + 0.5 * i);
    }
    const auto tr = spectrum_vs_lambda(s, grid, 0.0, 3);
    ASSERT_FALSE(tr.crossings.empty());
    EXPECT_EQ(tr.crossings.front().lambda_before, 39.0);
    EXPECT_EQ(tr.crossings.front().lambda_after, 39.5);
    // The bracket contains the eigenvalue of the other formulation.
    const double l = buckling_eigs(s, 0.0, 1)[0].value;
    EXPECT_GT(l, tr.crossings.front().lambda_before);
    EXPECT_LE(l, tr.crossings.front().lambda_after);
}

TEST(Spectrum, RectangleDoubleCurveCrossesNear62)
{
    const Plate p(2.0, 10);
    const SchurOperator s(p.ops);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) {
        grid.push_back(55.0 + 0.5 * i);
    }
    const auto tr = spectrum_vs_lambda(s, grid, 0.0, 4);
    std::vector<double> near;
    for (const auto& c : tr.crossings) {
        if (std::abs(c.lambda_after - 62.0) <= 0.5) {
            near.push_back(c.lambda_after);
        }
    }
    ASSERT_EQ(near.size(), 2u);
    EXPECT_EQ(near[0], near[1]);
}

TEST(Spectrum, PositiveWithoutLoad)
{
    const Plate p(1.0, 6);
    const SchurOperator s(p.ops);
    const auto tr = spectrum_vs_lambda(s, {0.0}, 0.0, 4);
    for (const auto& curve : tr.sigma_curves) {
        EXPECT_GT(curve[0], 0.0);
    }
    EXPECT_TRUE(tr.crossings.empty());
}

// Right next to a buckling load sigma_1 is small and S x, lambda D x cancel;
// convergence must be judged against their separate sizes.
TEST(Spectrum, ConvergesNextToACrossing)
{
    const Plate p(1.0, 20);
    const SchurOperator s(p.ops);
    const auto [values, modes] = parametrized_eigs(s, p.ops.load(0.0), 39.5, 4);
    EXPECT_LT(values[0], 0.0);
    EXPECT_GT(values[0], -1.0);
    const double first = buckling_eigs(s, 0.0, 1)[0].value;
    // sigma_1 is the Rayleigh quotient of the first mode, linear in lambda
    const Vector x = modes.col(0);
    const double sx = x.dot(s.apply(x).col(0));
    const double dx = x.dot(p.ops.load(0.0) * x);
    EXPECT_NEAR(sx - 39.5 * dx, values[0], 1e-8 * sx);
    EXPECT_NEAR(sx / dx, first, 1e-6 * first);
}

TEST(Spectrum, RejectsUnsortedGrid)
{
    const Plate p(1.0, 4);
    const SchurOperator s(p.ops);
    EXPECT_THROW(spectrum_vs_lambda(s, {2.0, 1.0}, 0.0, 1), InvalidArgument);
    EXPECT_THROW(spectrum_vs_lambda(s, {}, 0.0, 1), InvalidArgument);
}

TEST(ConvergenceOrder, SyntheticQuadratic)
{
    std::vector<std::pair<double, double>> data;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
        data.emplace_back(h, 10.0 + h * h);
    }
    EXPECT_NEAR(*convergence_order(data, 10.0), 2.0, 1e-9);
}

TEST(ConvergenceOrder, SquareReferenceLadder)
{
    const std::vector<std::pair<double, double>> data{{1e-1, 39.91}, {6e-2, 39.59}, {1e-2, 39.48}, {6e-3, 39.47}};
    EXPECT_NEAR(*convergence_order(data, 39.47841), 1.98, 0.2);
}

TEST(ConvergenceOrder, RectangleReferenceLadder)
{
    const std::vector<std::pair<double, double>> data{{1e-1, 49.15}, {6e-2, 46.97}, {1e-2, 46.35}, {6e-3, 46.33}};
    EXPECT_NEAR(*convergence_order(data, 46.33230), 2.34, 0.2);
}

TEST(ConvergenceOrder, Preconditions)
{
    EXPECT_THROW(convergence_order({{0.1, 1.0}, {0.05, 1.0}}, 0.0), InvalidArgument);
    EXPECT_THROW(convergence_order({{0.1, 1.0}, {0.2, 1.0}, {0.05, 1.0}}, 0.0), InvalidArgument);
    EXPECT_FALSE(convergence_order({{0.1, 1.0}, {0.05, 2.0}, {0.02, 3.0}}, 3.0).has_value());
}

TEST(Clusters, GroupsCloseValues)
{
    const auto c = cluster_values({39.48, 46.33, 61.685, 61.685 * (1 + 1e-8), 70.0});
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c[2].second, 2);
    EXPECT_EQ(c[0].second, 1);
}
