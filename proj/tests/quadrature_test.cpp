#include <cmath>

#include <gtest/gtest.h>

#include "vkrom/quadrature.hpp"

using namespace vkrom;

namespace {

// int over the reference triangle of l1^a l2^b l3^c, divided by its area,
// is 2 a! b! c! / (a + b + c + 2)!.
double monomial_average(int a, int b, int c)
{
    return 2.0 * std::tgamma(a + 1) * std::tgamma(b + 1) * std::tgamma(c + 1) / std::tgamma(a + b + c + 3);
}

} // namespace

class RuleExactness : public ::testing::TestWithParam<int> {};

TEST_P(RuleExactness, IntegratesBarycentricMonomials)
{
    const int degree = GetParam();
    const QuadratureRule rule = triangle_rule(degree);
    EXPECT_GE(rule.exact_degree, degree);
    double wsum = 0.0;
    for (double w : rule.weights) {
        EXPECT_GT(w, 0.0);
        wsum += w;
    }
    EXPECT_NEAR(wsum, 1.0, 1e-14);
    for (const auto& l : rule.points) {
        EXPECT_NEAR(l[0] + l[1] + l[2], 1.0, 1e-14);
    }
    for (int a = 0; a <= degree; ++a) {
        for (int b = 0; a + b <= degree; ++b) {
            for (int c = 0; a + b + c <= degree; ++c) {
                double q = 0.0;
                for (std::size_t i = 0; i < rule.size(); ++i) {
                    const auto& l = rule.points[i];
                    q += rule.weights[i] * std::pow(l[0], a) * std::pow(l[1], b) * std::pow(l[2], c);
                }
                EXPECT_NEAR(q, monomial_average(a, b, c), 1e-14) << a << ' ' << b << ' ' << c;
            }
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Degrees, RuleExactness, ::testing::Values(1, 2, 3, 4, 5, 6));

TEST(Quadrature, RejectsUnsupportedDegree)
{
    EXPECT_THROW(triangle_rule(40), InvalidArgument);
}
