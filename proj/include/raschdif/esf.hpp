#pragma once

#include <span>
#include <vector>

#include "raschdif/common.hpp"

namespace raschdif {

/// Elementary symmetric functions gamma_0..gamma_m of the item easiness
/// values, with optional derivatives with respect to the easiness values.
struct EsfResult {
  Eigen::VectorXd gamma;           // m+1
  Eigen::MatrixXd d1;              // (m+1) x m, d1(r, j) = gamma_{r-1} without item j
  std::vector<Eigen::MatrixXd> d2;  // m+1 matrices m x m, d2[r](j, k) = gamma_{r-2} without items j, k
};

/// Summation algorithm: gamma_r^(k) = gamma_r^(k-1) + eps_k gamma_{r-1}^(k-1).
/// Derivatives use the removal identity (gamma of the reduced item set), once
/// for order 1 and twice for order 2. Throws DataError on non-positive input.
EsfResult esf(std::span<const double> eps, int order = 0);

}  // namespace raschdif
