#include "raschdif/diftest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "raschdif/sctest.hpp"

namespace raschdif {

namespace {

constexpr int kChunk = 1000;

RaschFit fit_group(const ExamDataset& ds, const std::string& label, const FitOptions& options = {}) {
  try {
    return fit_cml(ds.responses, {}, options);
  } catch (const DataError& e) {
    throw DataError("group '" + label + "' cannot be fitted: " + e.what());
  } catch (const ConvergenceError& e) {
    throw DataError("group '" + label + "' cannot be fitted: " + e.what());
  }
}

}  // namespace

std::string_view to_string(GlobalTestKind kind) {
  switch (kind) {
    case GlobalTestKind::likelihood_ratio: return "LR";
    case GlobalTestKind::wald: return "Wald";
    case GlobalTestKind::score: return "score";
  }
  return "unknown";
}

double chi_squared_upper(double statistic, int df) {
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, std::max(0.0, statistic)));
}

GroupSplit split_groups(const ExamDataset& ds, std::string_view grouping) {
  const Covariate& cov = ds.covariate(grouping);
  std::vector<double> keys(cov.values);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (keys.size() != 2)
    throw DataError("grouping '" + std::string(grouping) + "' must have exactly two groups, found " +
                    std::to_string(keys.size()));
  std::vector<bool> ref(cov.size());
  std::size_t first_ref = cov.size(), first_foc = cov.size();
  for (std::size_t i = 0; i < cov.size(); ++i) {
    ref[i] = cov.values[i] == keys[0];
    std::size_t& first = ref[i] ? first_ref : first_foc;
    first = std::min(first, i);
  }
  std::vector<bool> foc(ref.size());
  std::transform(ref.begin(), ref.end(), foc.begin(), [](bool b) { return !b; });
  return {subset(ds, ref), subset(ds, foc), cov.label(first_ref), cov.label(first_foc)};
}

GlobalDifTest lr_test(const ExamDataset& ds, std::string_view grouping) {
  const GroupSplit groups = split_groups(ds, grouping);
  const RaschFit full = fit_group(ds, "full sample");
  const RaschFit ref = fit_group(groups.reference, groups.reference_label);
  const RaschFit foc = fit_group(groups.focal, groups.focal_label);
  GlobalDifTest t;
  t.kind = GlobalTestKind::likelihood_ratio;
  t.statistic = -2.0 * (full.loglik - (ref.loglik + foc.loglik));
  t.df = static_cast<int>(ds.m() - 1);
  t.p_value = chi_squared_upper(t.statistic, t.df);
  return t;
}

GlobalDifTest wald_test_global(const ExamDataset& ds, std::string_view grouping, Index reference_item) {
  const GroupSplit groups = split_groups(ds, grouping);
  FitOptions opts;
  opts.parameterization = Parameterization::reference(reference_item);
  const RaschFit ref = fit_group(groups.reference, groups.reference_label, opts);
  const RaschFit foc = fit_group(groups.focal, groups.focal_label, opts);
  const Eigen::VectorXd d = ref.beta_free - foc.beta_free;
  const Eigen::MatrixXd v = ref.vcov_free + foc.vcov_free;
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) throw DataError("covariance of the parameter differences is singular");
  GlobalDifTest t;
  t.kind = GlobalTestKind::wald;
  t.statistic = d.dot(llt.solve(d));
  t.df = static_cast<int>(ds.m() - 1);
  t.p_value = chi_squared_upper(t.statistic, t.df);
  return t;
}

GlobalDifTest score_test_global(const ExamDataset& ds, std::string_view grouping) {
  split_groups(ds, grouping);  // validates two nonempty groups
  const RaschFit full = fit_group(ds, "full sample");
  const InstabilityResult r =
      instability_test(full, ds.responses, ds.covariate(grouping), Functional::lm_nominal);
  GlobalDifTest t;
  t.kind = GlobalTestKind::score;
  t.statistic = r.statistic;
  t.df = r.df;
  t.p_value = r.p_value;
  return t;
}

double gini(std::span<const double> d) {
  if (d.size() < 2) throw DataError("Gini coefficient needs at least two values");
  std::vector<double> sorted(d.begin(), d.end());
  std::sort(sorted.begin(), sorted.end());
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  if (total <= 0.0) return 0.0;
  // sum_i sum_j |d_i - d_j| = 2 sum_i (2i - k + 1) d_(i) over the sorted values.
  const auto k = static_cast<double>(sorted.size());
  double pairwise = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) pairwise += (2.0 * static_cast<double>(i) - k + 1.0) * sorted[i];
  return 2.0 * pairwise / (2.0 * k * total);
}

Eigen::VectorXd anchor_gini_profile(const RaschFit& fit_ref, const RaschFit& fit_foc) {
  const Index m = fit_ref.m();
  if (fit_foc.m() != m) throw DataError("fits have different numbers of items");
  if (m < 3) throw DataError("Gini anchor selection needs at least three items");
  Eigen::VectorXd g(m);
  std::vector<double> d;
  for (Index k = 0; k < m; ++k) {
    const Eigen::VectorXd a = itempar(fit_ref, Constraint::reference(k)).beta;
    const Eigen::VectorXd b = itempar(fit_foc, Constraint::reference(k)).beta;
    d.clear();
    for (Index j = 0; j < m; ++j)
      if (j != k) d.push_back(std::abs(a(j) - b(j)));
    g(k) = gini(d);
  }
  return g;
}

Index anchor_select_gini(const RaschFit& fit_ref, const RaschFit& fit_foc, GiniDirection direction) {
  const Eigen::VectorXd g = anchor_gini_profile(fit_ref, fit_foc);
  Index best = 0;
  for (Index k = 1; k < g.size(); ++k) {
    const bool better = direction == GiniDirection::maximize ? g(k) > g(best) : g(k) < g(best);
    if (better) best = k;
  }
  return best;
}

double simultaneous_critical_value(const Eigen::MatrixXd& correlation, double coverage, int nsim,
                                   std::uint64_t seed) {
  if (!(coverage > 0.0 && coverage < 1.0)) throw DataError("coverage must lie in (0,1)");
  if (nsim < 1) throw DataError("nsim must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(correlation);
  if (llt.info() != Eigen::Success) throw DataError("correlation matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const Index dim = correlation.rows();

  std::vector<double> sims(static_cast<std::size_t>(nsim));
  const std::size_t chunks = (sims.size() + kChunk - 1) / kChunk;
  parallel_for_chunks(chunks, [&](std::size_t chunk) {
    auto gen = substream(seed, chunk);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(dim);
    const std::size_t end = std::min(sims.size(), (chunk + 1) * kChunk);
    for (std::size_t s = chunk * kChunk; s < end; ++s) {
      for (Index d = 0; d < dim; ++d) z(d) = normal(gen);
      sims[s] = (l * z).cwiseAbs().maxCoeff();
    }
  });
  std::sort(sims.begin(), sims.end());
  const auto idx = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(sims.size()))) - 1;
  return sims[std::min(idx, sims.size() - 1)];
}

AnchoredWaldReport anchored_wald(const ExamDataset& ds, std::string_view grouping, const AnchorOptions& options) {
  if (!(options.coverage > 0.0 && options.coverage < 1.0)) throw DataError("coverage must lie in (0,1)");
  const GroupSplit groups = split_groups(ds, grouping);
  const RaschFit ref = fit_group(groups.reference, groups.reference_label);
  const RaschFit foc = fit_group(groups.focal, groups.focal_label);
  const Index m = ds.m();

  AnchoredWaldReport rep;
  if (options.anchor) {
    if (*options.anchor < 0 || *options.anchor >= m)
      throw DataError("anchor item " + std::to_string(*options.anchor + 1) + " out of range 1.." + std::to_string(m));
    rep.anchor = *options.anchor;
  } else {
    rep.anchor = anchor_select_gini(ref, foc, options.direction);
  }
  rep.item_labels = ds.responses.item_labels();
  rep.coverage = options.coverage;
  rep.reference_label = groups.reference_label;
  rep.focal_label = groups.focal_label;
  rep.reference = itempar(ref, Constraint::reference(rep.anchor));
  rep.focal = itempar(foc, Constraint::reference(rep.anchor));

  rep.diff = rep.reference.beta - rep.focal.beta;
  const Eigen::MatrixXd cov = rep.reference.vcov + rep.focal.vcov;
  rep.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  rep.diff(rep.anchor) = 0.0;
  rep.se(rep.anchor) = 0.0;

  std::vector<Index> free;
  for (Index j = 0; j < m; ++j)
    if (j != rep.anchor) free.push_back(j);
  const auto k = static_cast<Index>(free.size());
  Eigen::MatrixXd corr(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b)
      corr(a, b) = cov(free[a], free[b]) / (rep.se(free[a]) * rep.se(free[b]));
  rep.critical = simultaneous_critical_value(corr, options.coverage, options.nsim, options.seed);

  rep.t = Eigen::VectorXd::Zero(m);
  rep.ci_lower = Eigen::VectorXd::Zero(m);
  rep.ci_upper = Eigen::VectorXd::Zero(m);
  rep.significant.assign(static_cast<std::size_t>(m), false);
  for (Index j : free) {
    rep.t(j) = rep.diff(j) / rep.se(j);
    rep.ci_lower(j) = rep.diff(j) - rep.critical * rep.se(j);
    rep.ci_upper(j) = rep.diff(j) + rep.critical * rep.se(j);
    rep.significant[static_cast<std::size_t>(j)] = std::abs(rep.t(j)) > rep.critical;
  }
  return rep;
}

}  // namespace raschdif
