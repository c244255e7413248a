#pragma once

#include <random>

#include "vkrom/assembly.hpp"
#include "vkrom/fespace.hpp"
#include "vkrom/mesh.hpp"

namespace vkrom::testing {

struct Plate {
    SpacePtr space;
    PlateOperators ops;

    Plate(double length, int ny, int degree = 2)
        : space(build_space(build_mesh(length, static_cast<int>(length * ny + 0.5), ny), degree)),
          ops(make_operators(space))
    {
    }
};

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0)
{
    std::uniform_real_distribution<double> d(-scale, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = d(rng);
    }
    return v;
}

inline double max_abs_entry(const SparseMatrix& m)
{
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            out = std::max(out, std::abs(it.value()));
        }
    }
    return out;
}

} // namespace vkrom::testing
