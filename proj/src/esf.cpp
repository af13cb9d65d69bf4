#include "raschdif/esf.hpp"

#include <cmath>
#include <string>

namespace raschdif {

namespace {

// gamma over all items except `skip1` and `skip2` (pass -1 to skip none), into out[0..].
void summation(std::span<const double> eps, Index skip1, Index skip2, Eigen::Ref<Eigen::VectorXd> out) {
  out.setZero();
  out(0) = 1.0;
  Index used = 0;
  for (Index k = 0; k < static_cast<Index>(eps.size()); ++k) {
    if (k == skip1 || k == skip2) continue;
    ++used;
    const double e = eps[static_cast<std::size_t>(k)];
    for (Index r = used; r >= 1; --r) out(r) += e * out(r - 1);
  }
}

}  // namespace

EsfResult esf(std::span<const double> eps, int order) {
  const auto m = static_cast<Index>(eps.size());
  if (m < 1) throw DataError("esf requires at least one item");
  if (order < 0 || order > 2) throw std::invalid_argument("esf order must be 0, 1, or 2");
  for (std::size_t j = 0; j < eps.size(); ++j)
    if (!(eps[j] > 0.0) || !std::isfinite(eps[j]))
      throw DataError("esf requires positive finite easiness values (item " + std::to_string(j + 1) + ")");

  EsfResult res;
  res.gamma.resize(m + 1);
  summation(eps, -1, -1, res.gamma);
  if (order == 0) return res;

  res.d1 = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd reduced(m + 1);
  for (Index j = 0; j < m; ++j) {
    summation(eps, j, -1, reduced);
    res.d1.block(1, j, m, 1) = reduced.head(m);
  }
  if (order == 1) return res;

  res.d2.assign(static_cast<std::size_t>(m + 1), Eigen::MatrixXd::Zero(m, m));
  for (Index j = 0; j < m; ++j) {
    for (Index k = j + 1; k < m; ++k) {
      summation(eps, j, k, reduced);
      for (Index r = 2; r <= m; ++r) {
        res.d2[static_cast<std::size_t>(r)](j, k) = reduced(r - 2);
        res.d2[static_cast<std::size_t>(r)](k, j) = reduced(r - 2);
      }
    }
  }
  return res;
}

}  // namespace raschdif
