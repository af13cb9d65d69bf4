#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raschdif/common.hpp"

namespace raschdif {

/// Complete binary response matrix, persons in rows and items in columns.
///
/// Construction validates the invariants: every entry is 0 or 1, at least two
/// items, at least one person, distinct item labels.
class ItemResponses {
 public:
  ItemResponses(Eigen::MatrixXi values, std::vector<std::string> item_labels);

  const Eigen::MatrixXi& values() const noexcept { return values_; }
  const std::vector<std::string>& item_labels() const noexcept { return labels_; }
  Index n() const noexcept { return values_.rows(); }
  Index m() const noexcept { return values_.cols(); }
  int operator()(Index person, Index item) const { return values_(person, item); }

  Eigen::VectorXi raw_scores() const { return values_.rowwise().sum(); }

  // Rows in the given order (duplicates allowed).
  ItemResponses rows(std::span<const Index> persons) const;

 private:
  Eigen::MatrixXi values_;
  std::vector<std::string> labels_;
};

enum class CovariateKind { numeric, ordinal, nominal };

std::string_view to_string(CovariateKind kind);

/// One person-level covariate.
///
/// numeric: `values` holds the numbers, `levels` is empty.
/// ordinal/nominal: `values` holds 0-based level codes into `levels`; for
/// ordinal covariates the level order is the total order. `level_numbers` is
/// filled when every level label parses as a number.
struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::numeric;
  std::vector<double> values;
  std::vector<std::string> levels;
  std::vector<double> level_numbers;

  std::size_t size() const noexcept { return values.size(); }
  bool categorical() const noexcept { return kind != CovariateKind::numeric; }
  // Display label of person i's value.
  std::string label(std::size_t i) const;
  Covariate rows(std::span<const Index> persons) const;
};

struct ExamDataset {
  ItemResponses responses;
  std::vector<Covariate> covariates;
  Eigen::VectorXi raw_scores;

  ExamDataset(ItemResponses r, std::vector<Covariate> c);

  Index n() const noexcept { return responses.n(); }
  Index m() const noexcept { return responses.m(); }
  const Covariate& covariate(std::string_view name) const;
  bool has_covariate(std::string_view name) const;
  ExamDataset rows(std::span<const Index> persons) const;
};

/// Reads a comma-separated file with a header row. Columns whose name starts
/// with `item_prefix` are items (labels are the names without the prefix,
/// unless that leaves nothing), in file order; all other named columns are
/// covariates. Columns with an empty header (R row names) are skipped.
ExamDataset load_csv(const std::filesystem::path& path, std::string_view item_prefix = "item");
ExamDataset parse_csv(std::string_view text, std::string_view item_prefix = "item");

/// Keeps persons with 0 < raw score < m.
ExamDataset exclude_extreme_scores(const ExamDataset& ds);

ExamDataset subset(const ExamDataset& ds, const std::vector<bool>& mask);

/// Mask of persons whose covariate label equals `value` (numbers compare
/// numerically, so "1" matches 1.0).
std::vector<bool> covariate_equals(const ExamDataset& ds, std::string_view name, std::string_view value);

/// Converts a covariate to ordinal with levels sorted ascending (numerically
/// when all levels are numbers). Ordinal input is returned unchanged.
ExamDataset as_ordered(const ExamDataset& ds, std::string_view name);

/// Converts a covariate to nominal; numeric values become levels in ascending order.
ExamDataset as_nominal(const ExamDataset& ds, std::string_view name);

/// Proportion of persons solving each item.
Eigen::VectorXd item_summary(const ExamDataset& ds);

}  // namespace raschdif
