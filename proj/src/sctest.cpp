#include "raschdif/sctest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "raschdif/esf.hpp"

namespace raschdif {

namespace {

constexpr int kChunk = 1000;

Eigen::MatrixXd whitening_root(const Eigen::MatrixXd& information, Index n) {
  Eigen::LLT<Eigen::MatrixXd> llt(information / static_cast<double>(n));
  if (llt.info() != Eigen::Success) throw DataError("information matrix is singular");
  return llt.matrixL();
}

struct Group {
  double key;
  Index count;
};

// Distinct covariate values in ascending order with their counts; `order` is
// the stable person ordering by covariate.
std::vector<Group> sorted_groups(const Covariate& cov, std::vector<Index>& order) {
  order.resize(cov.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return cov.values[static_cast<std::size_t>(a)] < cov.values[static_cast<std::size_t>(b)];
  });
  std::vector<Group> groups;
  for (Index p : order) {
    const double v = cov.values[static_cast<std::size_t>(p)];
    if (groups.empty() || groups.back().key != v)
      groups.push_back({v, 1});
    else
      ++groups.back().count;
  }
  return groups;
}

std::string key_label(const Covariate& cov, double key) {
  if (cov.categorical()) return cov.levels[static_cast<std::size_t>(key)];
  Covariate tmp{cov.name, cov.kind, {key}, {}, {}};
  return tmp.label(0);
}

}  // namespace

std::string_view to_string(Functional f) {
  switch (f) {
    case Functional::lm_nominal: return "LM-nominal";
    case Functional::maxlm_numeric: return "maxLM-numeric";
    case Functional::maxlm_ordinal: return "maxLM-ordinal-L2";
  }
  return "unknown";
}

Functional functional_for(CovariateKind kind) {
  switch (kind) {
    case CovariateKind::numeric: return Functional::maxlm_numeric;
    case CovariateKind::ordinal: return Functional::maxlm_ordinal;
    case CovariateKind::nominal: return Functional::lm_nominal;
  }
  return Functional::lm_nominal;
}

ScoreProcess casewise_scores(const RaschFit& fit, const ItemResponses& responses) {
  const Index m = fit.m();
  if (responses.m() != m) throw DataError("responses and fit have different numbers of items");
  const Eigen::VectorXd eps = (-fit.beta.array()).exp();
  const EsfResult g = esf(std::span<const double>(eps.data(), static_cast<std::size_t>(m)), 1);

  // Conditional solving probabilities per raw score.
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(m + 1, m);
  for (Index r = 1; r < m; ++r) pi.row(r) = eps.transpose().cwiseProduct(g.d1.row(r)) / g.gamma(r);

  const Eigen::VectorXi scores = responses.raw_scores();
  const bool weighted = fit.weights.size() == responses.n();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(responses.n(), m);
  for (Index i = 0; i < responses.n(); ++i) {
    const int r = scores(i);
    if (r == 0 || r == m) continue;
    full.row(i) = pi.row(r) - responses.values().row(i).cast<double>();
    if (weighted) full.row(i) *= fit.weights(i);
  }

  ScoreProcess proc;
  proc.contributions = full * fit.basis;
  std::vector<Index> order(static_cast<std::size_t>(responses.n()));
  std::iota(order.begin(), order.end(), Index{0});
  proc.whitened_cumsum = whitened_cumsum(proc.contributions, fit.information, order);
  return proc;
}

Eigen::MatrixXd whitened_cumsum(const Eigen::MatrixXd& contributions, const Eigen::MatrixXd& information,
                                std::span<const Index> order) {
  const Index n = contributions.rows();
  const Eigen::MatrixXd root = whitening_root(information, n);
  Eigen::MatrixXd cum(n, contributions.cols());
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(contributions.cols());
  for (Index k = 0; k < n; ++k) {
    running += contributions.row(order[static_cast<std::size_t>(k)]);
    cum.row(k) = running;
  }
  // W = n^{-1/2} L^{-1} S, row-wise.
  Eigen::MatrixXd w = root.triangularView<Eigen::Lower>().solve(cum.transpose()).transpose();
  return w / std::sqrt(static_cast<double>(n));
}

std::vector<double> simulate_max_bridge(std::span<const double> fractions, Index dim, int nrep, std::uint64_t seed) {
  if (fractions.empty()) throw DataError("at least one split fraction is required");
  if (dim < 1) throw DataError("dimension must be positive");
  if (nrep < 1) throw DataError("number of replications must be positive");
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (!(fractions[k] > 0.0 && fractions[k] < 1.0)) throw DataError("split fractions must lie in (0,1)");
    if (k > 0 && !(fractions[k] > fractions[k - 1])) throw DataError("split fractions must be strictly increasing");
  }
  const std::size_t segments = fractions.size() + 1;
  std::vector<double> sd(segments);
  double prev = 0.0;
  for (std::size_t k = 0; k < segments; ++k) {
    const double t = k < fractions.size() ? fractions[k] : 1.0;
    sd[k] = std::sqrt(t - prev);
    prev = t;
  }

  std::vector<double> sims(static_cast<std::size_t>(nrep));
  const std::size_t chunks = (static_cast<std::size_t>(nrep) + kChunk - 1) / kChunk;
  parallel_for_chunks(chunks, [&](std::size_t chunk) {
    auto gen = substream(seed, chunk);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd partial(static_cast<Index>(segments), dim);
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(sims.size(), begin + kChunk);
    for (std::size_t rep = begin; rep < end; ++rep) {
      Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(dim);
      for (std::size_t k = 0; k < segments; ++k) {
        for (Index d = 0; d < dim; ++d) running(d) += sd[k] * normal(gen);
        partial.row(static_cast<Index>(k)) = running;
      }
      double best = 0.0;
      for (std::size_t k = 0; k < fractions.size(); ++k) {
        const double t = fractions[k];
        const double s = (partial.row(static_cast<Index>(k)) - t * running).squaredNorm() / (t * (1.0 - t));
        best = std::max(best, s);
      }
      sims[rep] = best;
    }
  });
  std::sort(sims.begin(), sims.end());
  return sims;
}

double critical_value(Functional functional, std::span<const double> fractions, Index dim, double level, int nrep,
                      std::uint64_t seed) {
  if (fractions.empty()) throw DataError("at least one split fraction is required");
  if (!(level > 0.0 && level < 1.0)) throw DataError("level must lie in (0,1)");
  if (functional == Functional::lm_nominal) {
    boost::math::chi_squared dist(static_cast<double>(dim * static_cast<Index>(fractions.size())));
    return boost::math::quantile(dist, level);
  }
  const auto sims = simulate_max_bridge(fractions, dim, nrep, seed);
  const auto idx = static_cast<std::size_t>(std::ceil(level * static_cast<double>(sims.size()))) - 1;
  return sims[std::min(idx, sims.size() - 1)];
}

InstabilityResult instability_test(const RaschFit& fit, const ItemResponses& responses, const Covariate& covariate,
                                   Functional functional, const InstabilityOptions& options) {
  const Index n = responses.n();
  if (static_cast<Index>(covariate.size()) != n)
    throw DataError("covariate '" + covariate.name + "' length does not match responses");
  if (functional == Functional::maxlm_ordinal && covariate.kind != CovariateKind::ordinal)
    throw DataError("maxLM-ordinal requires an ordinal covariate ('" + covariate.name + "' is " +
                    std::string(to_string(covariate.kind)) + ")");
  if (functional == Functional::maxlm_numeric && covariate.kind != CovariateKind::numeric)
    throw DataError("maxLM-numeric requires a numeric covariate ('" + covariate.name + "' is " +
                    std::string(to_string(covariate.kind)) + ")");

  const ScoreProcess proc = casewise_scores(fit, responses);
  std::vector<Index> order;
  const std::vector<Group> groups = sorted_groups(covariate, order);
  const Index dim = fit.m() - 1;

  InstabilityResult res;
  res.functional = functional;

  if (functional == Functional::lm_nominal) {
    if (groups.size() < 2) throw DataError("covariate '" + covariate.name + "' has a single category");
    const Eigen::MatrixXd root = whitening_root(fit.information, n);
    Index pos = 0;
    for (const Group& g : groups) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
      for (Index k = pos; k < pos + g.count; ++k) sum += proc.contributions.row(order[static_cast<std::size_t>(k)]).transpose();
      pos += g.count;
      const Eigen::VectorXd w = root.triangularView<Eigen::Lower>().solve(sum) / std::sqrt(static_cast<double>(n));
      res.statistic += w.squaredNorm() / (static_cast<double>(g.count) / static_cast<double>(n));
    }
    res.df = static_cast<int>(dim * static_cast<Index>(groups.size() - 1));
    boost::math::chi_squared dist(res.df);
    res.p_value = boost::math::cdf(boost::math::complement(dist, std::max(0.0, res.statistic)));
    return res;
  }

  const Eigen::MatrixXd w = whitened_cumsum(proc.contributions, fit.information, order);
  std::vector<double> fractions;
  Index cum = 0;
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    cum += groups[g].count;
    const double t = static_cast<double>(cum) / static_cast<double>(n);
    if (functional == Functional::maxlm_numeric && (t < options.trim || t > 1.0 - options.trim)) continue;
    const double stat = w.row(cum - 1).squaredNorm() / (t * (1.0 - t));
    res.per_threshold.push_back({key_label(covariate, groups[g].key), groups[g].key, t, stat});
    fractions.push_back(t);
  }
  if (res.per_threshold.size() < 2)
    throw DataError("covariate '" + covariate.name + "' yields fewer than 2 usable split points");

  const auto best = std::max_element(res.per_threshold.begin(), res.per_threshold.end(),
                                     [](const auto& a, const auto& b) { return a.statistic < b.statistic; });
  res.argmax = static_cast<std::size_t>(best - res.per_threshold.begin());
  res.statistic = best->statistic;

  const auto sims = simulate_max_bridge(fractions, dim, options.nrep, options.seed);
  const auto exceed = sims.end() - std::lower_bound(sims.begin(), sims.end(), res.statistic);
  // (count + 1) / (nrep + 1): never exactly zero, so simulated and exact
  // p-values stay comparable when covariates are ranked.
  res.p_value = static_cast<double>(exceed + 1) / static_cast<double>(sims.size() + 1);
  const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sims.size()))) - 1;
  res.critical_95 = sims[std::min(idx, sims.size() - 1)];
  return res;
}

}  // namespace raschdif
