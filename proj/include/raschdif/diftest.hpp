#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raschdif/rasch.hpp"

namespace raschdif {

enum class GlobalTestKind { likelihood_ratio, wald, score };

std::string_view to_string(GlobalTestKind kind);

struct GlobalDifTest {
  GlobalTestKind kind = GlobalTestKind::likelihood_ratio;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// The two groups of a binary covariate; the reference group is the lower
/// level (first level for categorical covariates).
struct GroupSplit {
  ExamDataset reference;
  ExamDataset focal;
  std::string reference_label;
  std::string focal_label;
};

GroupSplit split_groups(const ExamDataset& ds, std::string_view grouping);

double chi_squared_upper(double statistic, int df);

/// -2 (l_full - l_ref - l_foc), chi-square with m-1 df.
GlobalDifTest lr_test(const ExamDataset& ds, std::string_view grouping);

/// Quadratic form of the free-parameter differences with common reference
/// item `reference_item` (0-based), using the sum of the group covariances.
GlobalDifTest wald_test_global(const ExamDataset& ds, std::string_view grouping, Index reference_item = 0);

/// LM statistic of the full-sample fit with the grouping as a nominal covariate.
GlobalDifTest score_test_global(const ExamDataset& ds, std::string_view grouping);

/// sum_i sum_j |d_i - d_j| / (2 k sum d); zero when all entries are zero.
double gini(std::span<const double> d);

enum class GiniDirection { maximize, minimize };

/// Candidate anchor k aligns both fits at item k; the Gini coefficient of
/// |beta_ref_j - beta_foc_j| over j != k scores the candidate. Ties go to the
/// lowest index.
Index anchor_select_gini(const RaschFit& fit_ref, const RaschFit& fit_foc,
                         GiniDirection direction = GiniDirection::maximize);

/// Per-candidate Gini values in item order.
Eigen::VectorXd anchor_gini_profile(const RaschFit& fit_ref, const RaschFit& fit_foc);

struct AnchorOptions {
  std::optional<Index> anchor;  // 0-based; Gini selection when empty
  double coverage = 0.95;
  int nsim = 100000;
  std::uint64_t seed = kDefaultSeed;
  GiniDirection direction = GiniDirection::maximize;
};

struct AnchoredWaldReport {
  Index anchor = 0;
  std::vector<std::string> item_labels;
  Eigen::VectorXd diff;  // beta_ref - beta_foc, anchored
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  std::vector<bool> significant;
  double critical = 0.0;
  double coverage = 0.95;
  ItemParameterView reference;
  ItemParameterView focal;
  std::string reference_label;
  std::string focal_label;
};

/// Item-wise Wald tests after anchoring both groups at one item, with
/// single-step simultaneous intervals: the critical value is the
/// coverage-quantile of max_j |Z_j| for Z normal with the correlation of the
/// m-1 differences (Monte Carlo, nsim draws).
AnchoredWaldReport anchored_wald(const ExamDataset& ds, std::string_view grouping, const AnchorOptions& options = {});

/// coverage-quantile of max_j |Z_j|, Z ~ N(0, correlation).
double simultaneous_critical_value(const Eigen::MatrixXd& correlation, double coverage, int nsim, std::uint64_t seed);

}  // namespace raschdif
