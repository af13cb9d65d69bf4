#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raschdif/sctest.hpp"

namespace raschdif {

struct TreeOptions {
  double alpha = 0.05;
  Index minsize = 50;
  int nrep = 100000;
  std::uint64_t seed = kDefaultSeed;
  double trim = 0.1;
};

/// Binary split of one covariate. Ordered covariates (numeric, ordinal) send
/// value <= threshold to the left child; nominal covariates send the levels in
/// `left_levels` to the left.
struct SplitRule {
  std::string covariate;
  CovariateKind kind = CovariateKind::numeric;
  double threshold = 0.0;  // number (numeric) or level code (ordinal)
  std::string threshold_label;
  std::vector<int> left_levels;
  std::vector<std::string> levels;
  std::vector<double> level_numbers;

  bool goes_left(const Covariate& cov, std::size_t person) const;
  // Routing by a display value; throws DataError for values that cannot be placed.
  bool goes_left(const std::string& value) const;
  std::string describe(bool left) const;
};

struct CovariateTest {
  std::string covariate;
  InstabilityResult result;
  double p_adjusted = 1.0;
};

struct TreeNode {
  int id = 0;
  RaschFit fit;
  Index n = 0;
  std::vector<Index> persons;  // rows of the dataset passed to grow()
  std::vector<CovariateTest> tests;
  std::optional<SplitRule> split;
  double split_loglik = 0.0;  // summed child loglik of the chosen split
  std::vector<TreeNode> children;

  bool is_leaf() const noexcept { return children.empty(); }
};

/// Recursive partitioning: fit, test every covariate (Bonferroni adjusted),
/// split on the most significant one at the loglik-maximizing admissible
/// split point, recurse. Node ids follow depth-first pre-order from 1.
TreeNode grow(const ExamDataset& ds, const std::vector<std::string>& covariate_names, const TreeOptions& options = {});

std::vector<const TreeNode*> leaves(const TreeNode& root);

struct NodeProfile {
  int id = 0;
  Index n = 0;
  ItemParameterView view;
};

/// Sum-zero item parameters of every leaf, in leaf order.
std::vector<NodeProfile> node_profiles(const TreeNode& root);

/// Leaf id for a person described by covariate display values.
int predict_node(const TreeNode& root, const std::map<std::string, std::string>& values);

/// Indented text rendering.
std::string render_text(const TreeNode& root);

}  // namespace raschdif
