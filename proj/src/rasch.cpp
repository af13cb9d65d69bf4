#include "raschdif/rasch.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "raschdif/esf.hpp"

namespace raschdif {

namespace {

std::string item_name(const std::vector<std::string>& labels, Index j) {
  if (j >= 0 && j < static_cast<Index>(labels.size())) return "'" + labels[static_cast<std::size_t>(j)] + "'";
  return std::to_string(j + 1);
}

// Forward reachability over the "solved j but not k" graph, in both directions.
void check_connected(const ItemResponses& responses, std::span<const double> weights) {
  const Index m = responses.m();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> adj = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, m, false);
  const Eigen::VectorXi scores = responses.raw_scores();
  for (Index i = 0; i < responses.n(); ++i) {
    if (!weights.empty() && !(weights[static_cast<std::size_t>(i)] > 0.0)) continue;
    if (scores(i) == 0 || scores(i) == m) continue;
    for (Index j = 0; j < m; ++j) {
      if (responses(i, j) != 1) continue;
      for (Index k = 0; k < m; ++k)
        if (responses(i, k) == 0) adj(j, k) = true;
    }
  }
  for (bool reverse : {false, true}) {
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    std::vector<Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const Index j = stack.back();
      stack.pop_back();
      for (Index k = 0; k < m; ++k) {
        const bool edge = reverse ? adj(k, j) : adj(j, k);
        if (edge && !seen[static_cast<std::size_t>(k)]) {
          seen[static_cast<std::size_t>(k)] = true;
          stack.push_back(k);
        }
      }
    }
    for (Index k = 0; k < m; ++k)
      if (!seen[static_cast<std::size_t>(k)])
        throw DegenerateItemError("item " + item_name(responses.item_labels(), k) +
                                      " is separated from item " + item_name(responses.item_labels(), 0) +
                                      " (no CML estimate exists)",
                                  k);
  }
}

}  // namespace

Eigen::MatrixXd Parameterization::basis(Index m) const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m - 1);
  if (kind == Kind::reference_item) {
    if (item < 0 || item >= m) throw DataError("reference item out of range");
    for (Index j = 0, col = 0; j < m; ++j)
      if (j != item) b(j, col++) = 1.0;
  } else {
    // Columns e_j - 1/m for j = 2..m span the sum-zero subspace.
    for (Index col = 0; col < m - 1; ++col) {
      b.col(col).setConstant(-1.0 / static_cast<double>(m));
      b(col + 1, col) += 1.0;
    }
  }
  return b;
}

SufficientStats sufficient_stats(const ItemResponses& responses, std::span<const double> weights) {
  if (!weights.empty() && static_cast<Index>(weights.size()) != responses.n())
    throw DataError("weights have " + std::to_string(weights.size()) + " entries, expected " +
                    std::to_string(responses.n()));
  const Index m = responses.m();
  SufficientStats s{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m + 1), 0.0};
  const auto& y = responses.values();
  for (Index i = 0; i < responses.n(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    if (w < 0.0 || !std::isfinite(w)) throw DataError("weights must be finite and nonnegative");
    if (w == 0.0) continue;
    const int r = y.row(i).sum();
    if (r == 0 || r == m) continue;
    s.item_totals += w * y.row(i).transpose().cast<double>();
    s.score_counts(r) += w;
    s.total += w;
  }
  return s;
}

CmlEvaluation evaluate_cml(const SufficientStats& stats, const Eigen::VectorXd& beta, int order) {
  const Index m = stats.m();
  const Eigen::VectorXd eps = (-beta.array()).exp();
  const EsfResult g = esf(std::span<const double>(eps.data(), static_cast<std::size_t>(m)), order);

  CmlEvaluation ev;
  ev.loglik = -stats.item_totals.dot(beta);
  for (Index r = 1; r < m; ++r)
    if (stats.score_counts(r) > 0.0) ev.loglik -= stats.score_counts(r) * std::log(g.gamma(r));
  if (order == 0) return ev;

  ev.gradient = -stats.item_totals;
  if (order == 2) ev.hessian = Eigen::MatrixXd::Zero(m, m);
  for (Index r = 1; r < m; ++r) {
    const double nr = stats.score_counts(r);
    if (nr <= 0.0) continue;
    // pi(j): conditional probability of solving item j given raw score r.
    const Eigen::VectorXd pi = eps.cwiseProduct(g.d1.row(r).transpose()) / g.gamma(r);
    ev.gradient += nr * pi;
    if (order == 2) {
      Eigen::MatrixXd block = pi * pi.transpose();
      block -= (eps * eps.transpose()).cwiseProduct(g.d2[static_cast<std::size_t>(r)]) / g.gamma(r);
      block.diagonal() = pi.array().square() - pi.array();
      ev.hessian += nr * block;
    }
  }
  return ev;
}

namespace {

void check_items(const SufficientStats& stats, const std::vector<std::string>& item_labels) {
  if (stats.m() < 2) throw DataError("at least two items are required");
  if (!(stats.total > 0.0)) throw DataError("no persons with non-extreme raw scores");
  const double slack = 1e-12 * stats.total;
  for (Index j = 0; j < stats.m(); ++j) {
    if (stats.item_totals(j) <= slack)
      throw DegenerateItemError("item " + item_name(item_labels, j) + " is solved by no effective person", j);
    if (stats.item_totals(j) >= stats.total - slack)
      throw DegenerateItemError("item " + item_name(item_labels, j) + " is solved by every effective person", j);
  }
}

}  // namespace

RaschFit fit_cml(const SufficientStats& stats, std::vector<std::string> item_labels, const FitOptions& options) {
  const Index m = stats.m();
  check_items(stats, item_labels);

  RaschFit fit;
  fit.item_labels = std::move(item_labels);
  fit.parameterization = options.parameterization;
  fit.basis = options.parameterization.basis(m);
  const Eigen::MatrixXd& b = fit.basis;

  // The likelihood is shift invariant: normalize the start to the
  // parameterization's constraint, then solve for the free parameters.
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m - 1);
  if (options.start) {
    if (options.start->size() != m) throw std::invalid_argument("start vector has wrong length");
    const double shift = options.parameterization.kind == Parameterization::Kind::reference_item
                             ? (*options.start)(options.parameterization.item)
                             : options.start->mean();
    phi = b.colPivHouseholderQr().solve((options.start->array() - shift).matrix());
  }

  CmlEvaluation ev = evaluate_cml(stats, b * phi, 2);
  Eigen::VectorXd grad = b.transpose() * ev.gradient;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (grad.cwiseAbs().maxCoeff() < options.tolerance) break;
    const Eigen::MatrixXd info = -(b.transpose() * ev.hessian * b);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive())
      step = ldlt.solve(grad);
    else
      step = grad / std::max(1.0, stats.total);

    double scale = 1.0;
    CmlEvaluation next;
    Eigen::VectorXd phi_next;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving, scale *= 0.5) {
      phi_next = phi + scale * step;
      next = evaluate_cml(stats, b * phi_next, 2);
      if (std::isfinite(next.loglik) && next.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    phi = phi_next;
    ev = std::move(next);
    grad = b.transpose() * ev.gradient;
  }

  // One extra Newton step once the tolerance is met (quadratic convergence
  // takes the estimate to machine precision); kept only if it helps.
  if (grad.cwiseAbs().maxCoeff() < options.tolerance && grad.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-(b.transpose() * ev.hessian * b));
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::VectorXd phi_next = phi + ldlt.solve(grad);
      CmlEvaluation next = evaluate_cml(stats, b * phi_next, 2);
      const Eigen::VectorXd grad_next = b.transpose() * next.gradient;
      if (std::isfinite(next.loglik) && grad_next.cwiseAbs().maxCoeff() < grad.cwiseAbs().maxCoeff()) {
        phi = phi_next;
        ev = std::move(next);
        grad = grad_next;
      }
    }
  }

  fit.beta_free = phi;
  fit.beta = b * phi;
  fit.loglik = ev.loglik;
  fit.iterations = iter;
  fit.max_gradient = grad.cwiseAbs().maxCoeff();
  fit.converged = fit.max_gradient < options.tolerance;
  if (!fit.converged)
    throw ConvergenceError("CML estimation did not converge (max |gradient| = " + std::to_string(fit.max_gradient) +
                               " after " + std::to_string(iter) + " iterations)",
                           fit.beta);
  fit.information = -(b.transpose() * ev.hessian * b);
  fit.information = 0.5 * (fit.information + fit.information.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(fit.information);
  if (llt.info() != Eigen::Success) throw DataError("observed information is not positive definite");
  fit.vcov_free = llt.solve(Eigen::MatrixXd::Identity(m - 1, m - 1));
  fit.vcov_free = 0.5 * (fit.vcov_free + fit.vcov_free.transpose());
  fit.score_counts = stats.score_counts;
  fit.item_totals = stats.item_totals;
  return fit;
}

RaschFit fit_cml(const ItemResponses& responses, std::span<const double> weights, const FitOptions& options) {
  const SufficientStats stats = sufficient_stats(responses, weights);
  check_items(stats, responses.item_labels());
  if (options.check_connectivity) check_connected(responses, weights);
  RaschFit fit = fit_cml(stats, responses.item_labels(), options);
  fit.weights = weights.empty() ? Eigen::VectorXd::Ones(responses.n())
                                : Eigen::Map<const Eigen::VectorXd>(weights.data(), responses.n()).eval();
  return fit;
}

Eigen::MatrixXd constraint_transform(Index m, const Constraint& constraint) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  switch (constraint.kind) {
    case Constraint::Kind::sum_zero:
      c.setConstant(1.0 / static_cast<double>(m));
      break;
    case Constraint::Kind::reference_item:
      if (constraint.item < 0 || constraint.item >= m)
        throw DataError("reference item " + std::to_string(constraint.item + 1) + " out of range 1.." +
                        std::to_string(m));
      c(constraint.item) = 1.0;
      break;
    case Constraint::Kind::reference_set:
      if (constraint.set.empty()) throw DataError("reference set is empty");
      for (Index j : constraint.set) {
        if (j < 0 || j >= m) throw DataError("reference set item " + std::to_string(j + 1) + " out of range");
        c(j) = 1.0;
      }
      c /= c.sum();
      break;
  }
  return Eigen::MatrixXd::Identity(m, m) - Eigen::VectorXd::Ones(m) * c.transpose();
}

ItemParameterView itempar(const RaschFit& fit, const Constraint& constraint) {
  const Eigen::MatrixXd a = constraint_transform(fit.m(), constraint);
  ItemParameterView view;
  view.beta = a * fit.beta;
  view.vcov = a * fit.vcov_full() * a.transpose();
  view.constraint = constraint;
  return view;
}

Eigen::VectorXd ability_for_scores(const Eigen::VectorXd& beta) {
  const Index m = beta.size();
  auto expected = [&](double theta) {
    double s = 0.0, d = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double p = 1.0 / (1.0 + std::exp(beta(j) - theta));
      s += p;
      d += p * (1.0 - p);
    }
    return std::pair{s, d};
  };
  Eigen::VectorXd theta(m - 1);
  for (Index r = 1; r < m; ++r) {
    double lo = beta.minCoeff() - 40.0, hi = beta.maxCoeff() + 40.0;
    for (int it = 0; it < 200 && hi - lo > 1e-6; ++it) {
      const double mid = 0.5 * (lo + hi);
      (expected(mid).first < static_cast<double>(r) ? lo : hi) = mid;
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
      const auto [s, d] = expected(t);
      const double delta = (s - static_cast<double>(r)) / d;
      t -= delta;
      if (std::abs(delta) < 1e-12) break;
    }
    theta(r - 1) = t;
  }
  return theta;
}

PersonParameters personpar(const RaschFit& fit, const ItemResponses& responses, const Constraint& constraint) {
  if (!fit.converged) throw DataError("person parameters require a converged fit");
  if (responses.m() != fit.m()) throw DataError("responses and fit have different numbers of items");
  PersonParameters pp;
  pp.theta = ability_for_scores(itempar(fit, constraint).beta);
  const Eigen::VectorXi scores = responses.raw_scores();
  pp.assignment.resize(static_cast<std::size_t>(responses.n()));
  for (Index i = 0; i < responses.n(); ++i) {
    const int r = scores(i);
    pp.assignment[static_cast<std::size_t>(i)] =
        (r > 0 && r < fit.m()) ? pp.theta(r - 1) : std::numeric_limits<double>::quiet_NaN();
  }
  return pp;
}

}  // namespace raschdif
