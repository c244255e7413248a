#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#ifdef VKROM_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

namespace vkrom::detail {

// UMFPACK is several times faster than Eigen's own supernodal LU on the
// four-field Jacobian; fall back to the latter when it is not available.
#ifdef VKROM_HAVE_UMFPACK
using SparseLUBackend = Eigen::UmfPackLU<Eigen::SparseMatrix<double>>;
#else
using SparseLUBackend = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
#endif

} // namespace vkrom::detail
