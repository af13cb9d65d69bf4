#pragma once

#include <string_view>
#include <vector>

#include "raschdif/rasch.hpp"

namespace raschdif {

enum class ScoreKind { meanvar, saturated };

std::string_view to_string(ScoreKind kind);

/// Distribution of non-extreme raw scores r = 1..m-1.
///
/// meanvar: p(r) proportional to exp(delta_1 z_r + delta_2 z2_r) with
/// z_r = r/m and z2_r = 4 r (m - r) / m^2. saturated: free probabilities.
struct ScoreModel {
  ScoreKind kind = ScoreKind::meanvar;
  Index m = 0;
  Eigen::Vector2d delta = Eigen::Vector2d::Zero();
  Eigen::VectorXd probs;  // m-1 entries, index r-1
  double loglik = 0.0;    // weighted multinomial loglik at the fit
  bool fallback = false;  // meanvar requested but not estimable; saturated used

  double log_prob(int r) const { return std::log(probs(r - 1)); }
  Index free_parameters() const;
};

/// Basis values (z_r, z2_r) for r = 1..m-1, one row per score.
Eigen::MatrixXd meanvar_basis(Index m);

/// Probabilities of the meanvar family for given delta.
Eigen::VectorXd meanvar_probs(Index m, const Eigen::Vector2d& delta);

/// Fits the score model to weighted counts over r = 1..m-1 (counts(r-1)).
/// meanvar falls back to saturated (flagged) when fewer than three scores are
/// occupied, where the maximum likelihood estimate does not exist.
ScoreModel score_model_fit(const Eigen::VectorXd& counts, ScoreKind kind);

struct MixtureOptions {
  int maxiter = 500;
  double tol = 1e-8;
  int restarts = 5;
  std::uint64_t seed = kDefaultSeed;
};

struct MixtureComponent {
  double weight = 0.0;
  Eigen::VectorXd beta;  // sum-zero
  ScoreModel scores;
};

struct MixtureFit {
  Index k = 0;
  ScoreKind score_kind = ScoreKind::meanvar;
  std::vector<MixtureComponent> components;  // by decreasing cluster size
  Eigen::MatrixXd posterior;                 // n x k
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // observed-data loglik after every iteration
  int iterations = 0;
  bool converged = false;
  std::vector<Index> cluster_sizes;
  std::vector<double> restart_logliks;  // NaN for discarded restarts

  Eigen::VectorXd weights() const;
  Index free_parameters() const;
  double bic(Index n) const { return -2.0 * loglik + static_cast<double>(free_parameters()) * std::log(static_cast<double>(n)); }
};

/// EM for a k-component Rasch mixture. Every person must have a non-extreme
/// raw score. Each restart starts from Dirichlet(1) responsibilities; the
/// restart with the highest loglik is kept. Restarts where a component's
/// effective size falls below m are discarded; DataError if all are.
MixtureFit fit_em(const ItemResponses& responses, Index k, ScoreKind score_kind = ScoreKind::meanvar,
                  const MixtureOptions& options = {});

/// Responsibilities pi_c P_c(y_i), normalized per person.
Eigen::MatrixXd posterior(const MixtureFit& fit, const ItemResponses& responses);

/// log P_c(y_i) for each person and component (without the mixing weight).
Eigen::MatrixXd component_log_density(const std::vector<MixtureComponent>& components,
                                      const ItemResponses& responses);

}  // namespace raschdif
