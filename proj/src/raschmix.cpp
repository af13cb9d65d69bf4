#include "raschdif/raschmix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "raschdif/esf.hpp"

namespace raschdif {

namespace {

ScoreModel saturated_model(const Eigen::VectorXd& counts, bool fallback) {
  ScoreModel sm;
  sm.kind = ScoreKind::saturated;
  sm.m = counts.size() + 1;
  sm.probs = counts / counts.sum();
  sm.fallback = fallback;
  for (Index r = 0; r < counts.size(); ++r)
    if (counts(r) > 0.0) sm.loglik += counts(r) * std::log(sm.probs(r));
  return sm;
}

double meanvar_loglik(const Eigen::VectorXd& counts, const Eigen::MatrixXd& z, const Eigen::Vector2d& delta) {
  const Eigen::VectorXd eta = z * delta;
  const double shift = eta.maxCoeff();
  const double lse = shift + std::log((eta.array() - shift).exp().sum());
  return counts.dot(eta) - counts.sum() * lse;
}

struct EmRun {
  std::vector<MixtureComponent> components;
  Eigen::MatrixXd posterior;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

// Row-wise log-sum-exp of log weights + log densities; fills responsibilities.
double e_step(const Eigen::MatrixXd& log_density, const std::vector<MixtureComponent>& comps, Eigen::MatrixXd& post) {
  const Index n = log_density.rows();
  const auto k = static_cast<Index>(comps.size());
  post.resize(n, k);
  double ll = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      post(i, c) = std::log(comps[static_cast<std::size_t>(c)].weight) + log_density(i, c);
      best = std::max(best, post(i, c));
    }
    double s = 0.0;
    for (Index c = 0; c < k; ++c) {
      post(i, c) = std::exp(post(i, c) - best);
      s += post(i, c);
    }
    post.row(i) /= s;
    ll += best + std::log(s);
  }
  return ll;
}

std::optional<EmRun> run_em(const ItemResponses& responses, const Eigen::VectorXi& scores, Eigen::MatrixXd post,
                            ScoreKind kind, const MixtureOptions& opts) {
  const Index m = responses.m();
  const auto k = post.cols();
  EmRun run;
  run.components.resize(static_cast<std::size_t>(k));
  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opts.maxiter; ++iter) {
    for (Index c = 0; c < k; ++c) {
      auto& comp = run.components[static_cast<std::size_t>(c)];
      const Eigen::VectorXd w = post.col(c);
      if (w.sum() < static_cast<double>(m)) return std::nullopt;
      FitOptions fo;
      fo.parameterization = Parameterization::sum_zero();
      fo.check_connectivity = false;
      if (iter > 1) fo.start = comp.beta;
      try {
        comp.beta = fit_cml(sufficient_stats(responses, std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))),
                            responses.item_labels(), fo)
                        .beta;
      } catch (const DataError&) {
        return std::nullopt;
      } catch (const ConvergenceError&) {
        return std::nullopt;
      }
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(m - 1);
      for (Index i = 0; i < responses.n(); ++i) counts(scores(i) - 1) += w(i);
      comp.scores = score_model_fit(counts, kind);
      comp.weight = w.mean();
    }
    const double ll = e_step(component_log_density(run.components, responses), run.components, post);
    run.trace.push_back(ll);
    run.iterations = iter;
    if (iter > 1 && ll - prev < opts.tol) {
      run.converged = true;
      break;
    }
    prev = ll;
  }
  run.posterior = std::move(post);
  return run;
}

}  // namespace

std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::meanvar ? "meanvar" : "saturated"; }

Index ScoreModel::free_parameters() const { return kind == ScoreKind::meanvar ? 2 : m - 2; }

Eigen::MatrixXd meanvar_basis(Index m) {
  Eigen::MatrixXd z(m - 1, 2);
  const auto md = static_cast<double>(m);
  for (Index r = 1; r < m; ++r) {
    const auto rd = static_cast<double>(r);
    z(r - 1, 0) = rd / md;
    z(r - 1, 1) = 4.0 * rd * (md - rd) / (md * md);
  }
  return z;
}

Eigen::VectorXd meanvar_probs(Index m, const Eigen::Vector2d& delta) {
  const Eigen::VectorXd eta = meanvar_basis(m) * delta;
  Eigen::VectorXd p = (eta.array() - eta.maxCoeff()).exp();
  return p / p.sum();
}

ScoreModel score_model_fit(const Eigen::VectorXd& counts, ScoreKind kind) {
  if (counts.size() < 1) throw DataError("score model needs at least one score");
  if ((counts.array() < 0.0).any()) throw DataError("score counts must be nonnegative");
  const double total = counts.sum();
  if (!(total > 0.0)) throw DataError("score counts have zero total weight");
  if (kind == ScoreKind::saturated) return saturated_model(counts, false);

  const Index m = counts.size() + 1;
  if ((counts.array() > 0.0).count() < 3) return saturated_model(counts, true);

  const Eigen::MatrixXd z = meanvar_basis(m);
  const Eigen::Vector2d observed = z.transpose() * counts;
  Eigen::Vector2d delta = Eigen::Vector2d::Zero();
  double ll = meanvar_loglik(counts, z, delta);
  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd p = meanvar_probs(m, delta);
    const Eigen::Vector2d mean = z.transpose() * p;
    const Eigen::Vector2d grad = observed - total * mean;
    if (grad.cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, total)) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd centered = z.rowwise() - mean.transpose();
    const Eigen::Matrix2d info = total * centered.transpose() * p.asDiagonal() * centered;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::Vector2d step = ldlt.solve(grad);
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= 30; ++h, scale *= 0.5) {
      const Eigen::Vector2d next = delta + scale * step;
      const double next_ll = meanvar_loglik(counts, z, next);
      if (std::isfinite(next_ll) && next_ll >= ll - 1e-12 * std::abs(ll)) {
        delta = next;
        ll = next_ll;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!converged) return saturated_model(counts, true);

  ScoreModel sm;
  sm.kind = ScoreKind::meanvar;
  sm.m = m;
  sm.delta = delta;
  sm.probs = meanvar_probs(m, delta);
  sm.loglik = ll;
  return sm;
}

Eigen::MatrixXd component_log_density(const std::vector<MixtureComponent>& components,
                                      const ItemResponses& responses) {
  const Index m = responses.m();
  const Index n = responses.n();
  const auto k = static_cast<Index>(components.size());
  const Eigen::VectorXi scores = responses.raw_scores();
  const Eigen::MatrixXd y = responses.values().cast<double>();
  Eigen::MatrixXd out(n, k);
  for (Index c = 0; c < k; ++c) {
    const auto& comp = components[static_cast<std::size_t>(c)];
    const Eigen::VectorXd eps = (-comp.beta.array()).exp();
    const Eigen::VectorXd gamma = esf(std::span<const double>(eps.data(), static_cast<std::size_t>(m))).gamma;
    const Eigen::VectorXd pattern = -(y * comp.beta);
    for (Index i = 0; i < n; ++i) {
      const int r = scores(i);
      if (r == 0 || r == m) throw DataError("mixture densities are undefined for extreme raw scores");
      out(i, c) = comp.scores.log_prob(r) + pattern(i) - std::log(gamma(r));
    }
  }
  return out;
}

Eigen::MatrixXd posterior(const MixtureFit& fit, const ItemResponses& responses) {
  if (!fit.components.empty() && fit.components.front().beta.size() != responses.m())
    throw DataError("responses and mixture have different numbers of items");
  Eigen::MatrixXd post;
  e_step(component_log_density(fit.components, responses), fit.components, post);
  return post;
}

Eigen::VectorXd MixtureFit::weights() const {
  Eigen::VectorXd w(static_cast<Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c) w(static_cast<Index>(c)) = components[c].weight;
  return w;
}

Index MixtureFit::free_parameters() const {
  Index p = k - 1;
  for (const auto& c : components) p += c.beta.size() - 1 + c.scores.free_parameters();
  return p;
}

MixtureFit fit_em(const ItemResponses& responses, Index k, ScoreKind score_kind, const MixtureOptions& options) {
  if (k < 1) throw DataError("number of components must be at least 1");
  if (options.restarts < 1) throw DataError("restarts must be at least 1");
  if (options.maxiter < 1) throw DataError("maxiter must be at least 1");
  const Index m = responses.m();
  const Index n = responses.n();
  const Eigen::VectorXi scores = responses.raw_scores();
  for (Index i = 0; i < n; ++i)
    if (scores(i) == 0 || scores(i) == m)
      throw DataError("person " + std::to_string(i + 1) + " has an extreme raw score; exclude extreme scores first");
  fit_cml(responses);  // rejects data for which no component could be estimated

  std::vector<std::optional<EmRun>> runs(static_cast<std::size_t>(options.restarts));
  parallel_for_chunks(runs.size(), [&](std::size_t s) {
    auto gen = substream(options.seed, s);
    std::exponential_distribution<double> expo(1.0);
    Eigen::MatrixXd init(n, k);
    for (Index i = 0; i < n; ++i) {
      for (Index c = 0; c < k; ++c) init(i, c) = expo(gen);
      init.row(i) /= init.row(i).sum();
    }
    runs[s] = run_em(responses, scores, std::move(init), score_kind, options);
  });

  MixtureFit fit;
  fit.k = k;
  fit.score_kind = score_kind;
  const EmRun* best = nullptr;
  for (const auto& run : runs) {
    fit.restart_logliks.push_back(run ? run->trace.back() : std::numeric_limits<double>::quiet_NaN());
    if (run && (!best || run->trace.back() > best->trace.back())) best = &*run;
  }
  if (!best) throw DataError("all " + std::to_string(options.restarts) + " EM restarts collapsed a component");

  // Hard assignment sizes, then relabel by decreasing size.
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < n; ++i) {
    Index arg = 0;
    best->posterior.row(i).maxCoeff(&arg);
    ++sizes[static_cast<std::size_t>(arg)];
  }
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (sizes[static_cast<std::size_t>(a)] != sizes[static_cast<std::size_t>(b)])
      return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
    return best->components[static_cast<std::size_t>(a)].weight > best->components[static_cast<std::size_t>(b)].weight;
  });
  fit.posterior.resize(n, k);
  for (Index c = 0; c < k; ++c) {
    const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(c)]);
    fit.components.push_back(best->components[src]);
    fit.cluster_sizes.push_back(sizes[src]);
    fit.posterior.col(c) = best->posterior.col(static_cast<Index>(src));
  }
  fit.loglik = best->trace.back();
  fit.loglik_trace = best->trace;
  fit.iterations = best->iterations;
  fit.converged = best->converged;
  return fit;
}

}  // namespace raschdif
