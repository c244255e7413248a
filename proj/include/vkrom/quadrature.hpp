#pragma once

#include <array>
#include <string>
#include <vector>

#include "vkrom/errors.hpp"

namespace vkrom {

/// Symmetric Gauss rule on a triangle, in barycentric coordinates.
/// Weights sum to one, so an integral is area * sum(w_q f(x_q)).
struct QuadratureRule {
    int exact_degree = 0;
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return weights.size(); }
};

namespace detail {

inline void add_orbit_aab(QuadratureRule& rule, double a, double w)
{
    const double b = 1.0 - 2.0 * a;
    rule.points.push_back({a, a, b});
    rule.points.push_back({a, b, a});
    rule.points.push_back({b, a, a});
    rule.weights.insert(rule.weights.end(), 3, w);
}

inline void add_orbit_abc(QuadratureRule& rule, double a, double b, double w)
{
    const double c = 1.0 - a - b;
    rule.points.push_back({a, b, c});
    rule.points.push_back({a, c, b});
    rule.points.push_back({b, a, c});
    rule.points.push_back({b, c, a});
    rule.points.push_back({c, a, b});
    rule.points.push_back({c, b, a});
    rule.weights.insert(rule.weights.end(), 6, w);
}

} // namespace detail

/// Smallest tabulated symmetric rule that integrates polynomials of
/// total degree `degree` exactly (Dunavant 3-, 6- and 12-point rules).
inline QuadratureRule triangle_rule(int degree)
{
    QuadratureRule rule;
    if (degree <= 2) {
        rule.exact_degree = 2;
        detail::add_orbit_aab(rule, 1.0 / 6.0, 1.0 / 3.0);
    } else if (degree <= 4) {
        rule.exact_degree = 4;
        detail::add_orbit_aab(rule, 0.44594849091596488632, 0.22338158967801146570);
        detail::add_orbit_aab(rule, 0.09157621350977074346, 0.10995174365532186764);
    } else if (degree <= 6) {
        rule.exact_degree = 6;
        detail::add_orbit_aab(rule, 0.24928674517091042129, 0.11678627572637936603);
        detail::add_orbit_aab(rule, 0.06308901449150222834, 0.050844906370206816921);
        detail::add_orbit_abc(rule, 0.053145049844816947353, 0.31035245103378440542,
                              0.082851075618373575194);
    } else {
        throw InvalidArgument("triangle_rule: no rule tabulated for degree " + std::to_string(degree));
    }
    return rule;
}

} // namespace vkrom
