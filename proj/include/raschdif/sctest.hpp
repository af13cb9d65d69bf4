#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raschdif/rasch.hpp"

namespace raschdif {

enum class Functional {
  lm_nominal,     // LM statistic over the categories of an unordered covariate
  maxlm_numeric,  // max LM over (trimmed) split points of a numeric covariate
  maxlm_ordinal,  // max LM over all level boundaries of an ordinal covariate
};

std::string_view to_string(Functional f);
Functional functional_for(CovariateKind kind);

/// Casewise gradients of the conditional log-likelihood at the fitted
/// parameters, in the fit's free parameterization.
struct ScoreProcess {
  Eigen::MatrixXd contributions;    // n x (m-1)
  Eigen::MatrixXd whitened_cumsum;  // n x (m-1), persons in input order
};

ScoreProcess casewise_scores(const RaschFit& fit, const ItemResponses& responses);

/// Cumulative sums of contributions taken in `order`, premultiplied by the
/// inverse Cholesky root of information/n and scaled by n^(-1/2).
Eigen::MatrixXd whitened_cumsum(const Eigen::MatrixXd& contributions, const Eigen::MatrixXd& information,
                                std::span<const Index> order);

struct ThresholdStatistic {
  std::string label;  // covariate value at which the left group ends
  double value = 0;   // numeric value (numeric) or level code (ordinal)
  double fraction = 0;
  double statistic = 0;
};

struct InstabilityResult {
  Functional functional = Functional::lm_nominal;
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;  // chi-square degrees of freedom of the nominal functional
  std::vector<ThresholdStatistic> per_threshold;
  std::optional<std::size_t> argmax;
  // 95% simulated critical value of the max functionals.
  std::optional<double> critical_95;
};

struct InstabilityOptions {
  int nrep = 100000;
  std::uint64_t seed = kDefaultSeed;
  double trim = 0.1;
};

/// Score-based test of parameter instability along `covariate`. Persons are
/// ordered by the covariate (stable in ties) and never separated within ties.
/// Nominal p-values come from the chi-square distribution with
/// (m-1)(C-1) degrees of freedom; max functionals are calibrated by simulating
/// Brownian bridges at the observed split fractions.
InstabilityResult instability_test(const RaschFit& fit, const ItemResponses& responses, const Covariate& covariate,
                                   Functional functional, const InstabilityOptions& options = {});

/// Simulated draws of max_k |B(t_k)|^2 / (t_k (1 - t_k)) for a dim-dimensional
/// Brownian bridge B at strictly increasing fractions t_k in (0,1). Sorted.
std::vector<double> simulate_max_bridge(std::span<const double> fractions, Index dim, int nrep, std::uint64_t seed);

/// Level-quantile of the null distribution of the functional. For lm_nominal
/// this is the chi-square quantile with dim * fractions.size() degrees of freedom.
double critical_value(Functional functional, std::span<const double> fractions, Index dim, double level, int nrep,
                      std::uint64_t seed);

}  // namespace raschdif
