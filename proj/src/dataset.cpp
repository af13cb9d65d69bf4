#include "raschdif/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace raschdif {

namespace {

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<double> numbers_of(const std::vector<std::string>& labels) {
  std::vector<double> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto v = parse_number(l);
    if (!v) return {};
    out.push_back(*v);
  }
  return out;
}

Covariate infer_covariate(std::string name, const std::vector<std::string>& cells) {
  Covariate cov;
  cov.name = std::move(name);
  std::vector<double> nums;
  nums.reserve(cells.size());
  for (const auto& c : cells) {
    auto v = parse_number(c);
    if (!v) break;
    nums.push_back(*v);
  }
  if (nums.size() == cells.size()) {
    cov.kind = CovariateKind::numeric;
    cov.values = std::move(nums);
    return cov;
  }
  // Nominal levels in order of first appearance.
  cov.kind = CovariateKind::nominal;
  std::map<std::string, int> code;
  for (const auto& c : cells) {
    auto [it, inserted] = code.try_emplace(c, static_cast<int>(cov.levels.size()));
    if (inserted) cov.levels.push_back(c);
    cov.values.push_back(it->second);
  }
  cov.level_numbers = numbers_of(cov.levels);
  return cov;
}

// Rebuilds a categorical covariate so that its levels follow `order` (indices
// into the old levels).
void reorder_levels(Covariate& cov, const std::vector<std::size_t>& order) {
  std::vector<int> new_code(cov.levels.size());
  std::vector<std::string> levels;
  for (std::size_t k = 0; k < order.size(); ++k) {
    new_code[order[k]] = static_cast<int>(k);
    levels.push_back(cov.levels[order[k]]);
  }
  for (auto& v : cov.values) v = new_code[static_cast<std::size_t>(v)];
  cov.levels = std::move(levels);
  cov.level_numbers = numbers_of(cov.levels);
}

Covariate& find_mut(std::vector<Covariate>& covs, std::string_view name) {
  for (auto& c : covs)
    if (c.name == name) return c;
  throw DataError("unknown covariate '" + std::string(name) + "'");
}

}  // namespace

ItemResponses::ItemResponses(Eigen::MatrixXi values, std::vector<std::string> item_labels)
    : values_(std::move(values)), labels_(std::move(item_labels)) {
  if (values_.cols() < 2) throw DataError("at least two items are required");
  if (values_.rows() < 1) throw DataError("at least one person is required");
  if (static_cast<Index>(labels_.size()) != values_.cols())
    throw DataError("number of item labels does not match number of items");
  if (std::set<std::string>(labels_.begin(), labels_.end()).size() != labels_.size())
    throw DataError("item labels must be distinct");
  for (Index i = 0; i < values_.rows(); ++i)
    for (Index j = 0; j < values_.cols(); ++j)
      if (values_(i, j) != 0 && values_(i, j) != 1)
        throw DataError("non-binary response at row " + std::to_string(i + 1) + ", item '" +
                        labels_[static_cast<std::size_t>(j)] + "'");
}

ItemResponses ItemResponses::rows(std::span<const Index> persons) const {
  Eigen::MatrixXi out(static_cast<Index>(persons.size()), m());
  for (std::size_t k = 0; k < persons.size(); ++k) out.row(static_cast<Index>(k)) = values_.row(persons[k]);
  return {std::move(out), labels_};
}

std::string_view to_string(CovariateKind kind) {
  switch (kind) {
    case CovariateKind::numeric: return "numeric";
    case CovariateKind::ordinal: return "ordinal";
    case CovariateKind::nominal: return "nominal";
  }
  return "unknown";
}

std::string Covariate::label(std::size_t i) const {
  if (categorical()) return levels[static_cast<std::size_t>(values[i])];
  return format_number(values[i]);
}

Covariate Covariate::rows(std::span<const Index> persons) const {
  Covariate out{name, kind, {}, levels, level_numbers};
  out.values.reserve(persons.size());
  for (Index p : persons) out.values.push_back(values[static_cast<std::size_t>(p)]);
  return out;
}

ExamDataset::ExamDataset(ItemResponses r, std::vector<Covariate> c)
    : responses(std::move(r)), covariates(std::move(c)), raw_scores(responses.raw_scores()) {
  std::set<std::string> names;
  for (const auto& cov : covariates) {
    if (static_cast<Index>(cov.size()) != responses.n())
      throw DataError("covariate '" + cov.name + "' has " + std::to_string(cov.size()) +
                      " values, expected " + std::to_string(responses.n()));
    if (!names.insert(cov.name).second) throw DataError("duplicate covariate '" + cov.name + "'");
  }
}

const Covariate& ExamDataset::covariate(std::string_view name) const {
  for (const auto& c : covariates)
    if (c.name == name) return c;
  throw DataError("unknown covariate '" + std::string(name) + "'");
}

bool ExamDataset::has_covariate(std::string_view name) const {
  return std::any_of(covariates.begin(), covariates.end(), [&](const Covariate& c) { return c.name == name; });
}

ExamDataset ExamDataset::rows(std::span<const Index> persons) const {
  std::vector<Covariate> covs;
  covs.reserve(covariates.size());
  for (const auto& c : covariates) covs.push_back(c.rows(persons));
  return {responses.rows(persons), std::move(covs)};
}

ExamDataset parse_csv(std::string_view text, std::string_view item_prefix) {
  std::vector<std::vector<std::string>> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line == "\r") continue;
    records.push_back(split_record(line));
  }
  if (records.empty()) throw DataError("CSV has no header row");
  const auto& header = records.front();
  const std::size_t n = records.size() - 1;
  if (n == 0) throw DataError("CSV has no data rows");

  std::vector<std::size_t> item_cols, cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) continue;
    if (header[c].starts_with(item_prefix))
      item_cols.push_back(c);
    else
      cov_cols.push_back(c);
  }
  if (item_cols.empty())
    throw DataError("no item columns with prefix '" + std::string(item_prefix) + "'");

  for (std::size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != header.size())
      throw DataError("row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                      " fields, header has " + std::to_string(header.size()));

  Eigen::MatrixXi values(static_cast<Index>(n), static_cast<Index>(item_cols.size()));
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < item_cols.size(); ++j) {
    const std::string& col = header[item_cols[j]];
    std::string label = col.substr(item_prefix.size());
    labels.push_back(label.empty() ? col : label);
    for (std::size_t r = 0; r < n; ++r) {
      const auto v = parse_number(records[r + 1][item_cols[j]]);
      if (!v || (*v != 0.0 && *v != 1.0))
        throw DataError("row " + std::to_string(r + 1) + ", column '" + col + "': item response '" +
                        records[r + 1][item_cols[j]] + "' is not 0 or 1");
      values(static_cast<Index>(r), static_cast<Index>(j)) = static_cast<int>(*v);
    }
  }

  std::vector<Covariate> covs;
  for (std::size_t c : cov_cols) {
    std::vector<std::string> cells;
    cells.reserve(n);
    for (std::size_t r = 0; r < n; ++r) cells.push_back(records[r + 1][c]);
    covs.push_back(infer_covariate(header[c], cells));
  }
  return {ItemResponses(std::move(values), std::move(labels)), std::move(covs)};
}

ExamDataset load_csv(const std::filesystem::path& path, std::string_view item_prefix) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), item_prefix);
}

ExamDataset exclude_extreme_scores(const ExamDataset& ds) {
  std::vector<Index> keep;
  for (Index i = 0; i < ds.n(); ++i)
    if (ds.raw_scores(i) > 0 && ds.raw_scores(i) < ds.m()) keep.push_back(i);
  if (keep.empty()) throw DataError("no persons left after excluding extreme scores");
  return ds.rows(keep);
}

ExamDataset subset(const ExamDataset& ds, const std::vector<bool>& mask) {
  if (static_cast<Index>(mask.size()) != ds.n())
    throw DataError("subset mask has " + std::to_string(mask.size()) + " entries, expected " +
                    std::to_string(ds.n()));
  std::vector<Index> keep;
  for (Index i = 0; i < ds.n(); ++i)
    if (mask[static_cast<std::size_t>(i)]) keep.push_back(i);
  if (keep.empty()) throw DataError("subset mask selects no persons");
  return ds.rows(keep);
}

std::vector<bool> covariate_equals(const ExamDataset& ds, std::string_view name, std::string_view value) {
  const Covariate& cov = ds.covariate(name);
  const auto num = parse_number(value);
  std::vector<bool> mask(cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) {
    if (!cov.categorical() && num)
      mask[i] = cov.values[i] == *num;
    else if (cov.categorical() && num && !cov.level_numbers.empty())
      mask[i] = cov.level_numbers[static_cast<std::size_t>(cov.values[i])] == *num;
    else
      mask[i] = cov.label(i) == value;
  }
  return mask;
}

ExamDataset as_ordered(const ExamDataset& ds, std::string_view name) {
  ExamDataset out = ds;
  Covariate& cov = find_mut(out.covariates, name);
  if (cov.kind == CovariateKind::ordinal) return out;
  if (cov.kind == CovariateKind::numeric) {
    std::vector<double> distinct(cov.values);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto& v : cov.values)
      v = static_cast<double>(std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin());
    cov.levels.clear();
    for (double d : distinct) cov.levels.push_back(format_number(d));
    cov.level_numbers = distinct;
  } else {
    std::vector<std::size_t> order(cov.levels.size());
    std::iota(order.begin(), order.end(), 0);
    if (!cov.level_numbers.empty())
      std::stable_sort(order.begin(), order.end(),
                       [&](auto a, auto b) { return cov.level_numbers[a] < cov.level_numbers[b]; });
    else
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cov.levels[a] < cov.levels[b]; });
    reorder_levels(cov, order);
  }
  cov.kind = CovariateKind::ordinal;
  return out;
}

ExamDataset as_nominal(const ExamDataset& ds, std::string_view name) {
  ExamDataset out = as_ordered(ds, name);
  find_mut(out.covariates, name).kind = CovariateKind::nominal;
  return out;
}

Eigen::VectorXd item_summary(const ExamDataset& ds) {
  return ds.responses.values().cast<double>().colwise().mean().transpose();
}

}  // namespace raschdif
