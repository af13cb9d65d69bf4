#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raschdif/dataset.hpp"

namespace raschdif {

/// How the m item difficulties are mapped onto m-1 free parameters during
/// estimation: beta = basis * beta_free.
struct Parameterization {
  enum class Kind { reference_item, sum_zero };
  Kind kind = Kind::reference_item;
  Index item = 0;  // reference item for Kind::reference_item

  static Parameterization reference(Index item) { return {Kind::reference_item, item}; }
  static Parameterization sum_zero() { return {Kind::sum_zero, 0}; }

  Eigen::MatrixXd basis(Index m) const;
};

/// Item-side sufficient statistics of the conditional likelihood. Only persons
/// with non-extreme raw scores enter.
struct SufficientStats {
  Eigen::VectorXd item_totals;   // m, weighted number correct per item
  Eigen::VectorXd score_counts;  // m+1, weighted persons per raw score (0 and m stay zero)
  double total = 0.0;            // sum of score_counts

  Index m() const noexcept { return item_totals.size(); }
};

SufficientStats sufficient_stats(const ItemResponses& responses, std::span<const double> weights = {});

/// Conditional log-likelihood with gradient and Hessian in the full m-vector beta.
struct CmlEvaluation {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

CmlEvaluation evaluate_cml(const SufficientStats& stats, const Eigen::VectorXd& beta, int order = 2);

struct FitOptions {
  Parameterization parameterization{};
  int max_iter = 100;
  double tolerance = 1e-8;
  // Starting beta (full m-vector); zero when absent.
  std::optional<Eigen::VectorXd> start;
  // Check that the item graph is strongly connected, which is necessary and
  // sufficient for the CML estimate to exist.
  bool check_connectivity = true;
};

/// Thrown when an item is all-correct/all-incorrect among effective persons or
/// the response pattern is separable.
class DegenerateItemError : public DataError {
 public:
  DegenerateItemError(const std::string& what, Index item) : DataError(what), item_(item) {}
  Index item() const noexcept { return item_; }

 private:
  Index item_;
};

struct RaschFit {
  std::vector<std::string> item_labels;
  Parameterization parameterization;
  Eigen::MatrixXd basis;       // m x (m-1)
  Eigen::VectorXd beta_free;   // m-1
  Eigen::VectorXd beta;        // m, basis * beta_free
  double loglik = 0.0;
  Eigen::MatrixXd vcov_free;   // inverse observed information
  Eigen::MatrixXd information; // observed information in the free parameters
  Eigen::VectorXd score_counts;
  Eigen::VectorXd item_totals;
  Eigen::VectorXd weights;     // n
  int iterations = 0;
  bool converged = false;
  double max_gradient = 0.0;

  Index m() const noexcept { return beta.size(); }
  Eigen::MatrixXd vcov_full() const { return basis * vcov_free * basis.transpose(); }
};

/// Newton-Raphson CML estimation with step halving. Zero-weight rows and
/// extreme raw scores do not contribute. Throws DegenerateItemError for
/// non-estimable data and ConvergenceError (carrying the last beta) when the
/// gradient does not fall below the tolerance within max_iter iterations.
RaschFit fit_cml(const ItemResponses& responses, std::span<const double> weights = {},
                 const FitOptions& options = {});

/// Same as above from precomputed statistics; no connectivity check.
RaschFit fit_cml(const SufficientStats& stats, std::vector<std::string> item_labels,
                 const FitOptions& options = {});

inline double loglik(const RaschFit& fit) { return fit.loglik; }

/// Identifiability constraint of a reported item-parameter vector.
struct Constraint {
  enum class Kind { sum_zero, reference_item, reference_set };
  Kind kind = Kind::sum_zero;
  Index item = 0;
  std::vector<Index> set;

  static Constraint sum_zero() { return {}; }
  static Constraint reference(Index item) { return {Kind::reference_item, item, {}}; }
  static Constraint reference_set(std::vector<Index> items) { return {Kind::reference_set, 0, std::move(items)}; }
};

struct ItemParameterView {
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;  // m x m, rank m-1
  Constraint constraint;
};

/// Linear re-centering of the estimates: beta - c'beta for the constraint's weight vector c.
ItemParameterView itempar(const RaschFit& fit, const Constraint& constraint = Constraint::sum_zero());

/// Centering matrix A = I - 1 c' of a constraint.
Eigen::MatrixXd constraint_transform(Index m, const Constraint& constraint);

struct PersonParameters {
  Eigen::VectorXd theta;            // m-1 abilities for raw scores 1..m-1
  std::vector<double> assignment;   // per person; NaN for extreme scores
};

/// Ability for each non-extreme raw score r: solves sum_j logistic(theta - beta_j) = r.
Eigen::VectorXd ability_for_scores(const Eigen::VectorXd& beta);

PersonParameters personpar(const RaschFit& fit, const ItemResponses& responses,
                           const Constraint& constraint = Constraint::sum_zero());

}  // namespace raschdif
