#include "raschdif/raschtree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace raschdif {

namespace {

constexpr std::size_t kMaxExhaustiveLevels = 10;

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<double> distinct_values(const Covariate& cov) {
  std::vector<double> v(cov.values);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct Candidate {
  SplitRule rule;
  std::vector<Index> left, right;  // root-level person indices
};

SplitRule base_rule(const Covariate& cov) {
  SplitRule rule;
  rule.covariate = cov.name;
  rule.kind = cov.kind;
  rule.levels = cov.levels;
  rule.level_numbers = cov.level_numbers;
  return rule;
}

Candidate partition(const SplitRule& rule, const Covariate& cov, const std::vector<Index>& persons) {
  Candidate c{rule, {}, {}};
  for (std::size_t k = 0; k < persons.size(); ++k) (rule.goes_left(cov, k) ? c.left : c.right).push_back(persons[k]);
  return c;
}

// All binary partitions considered for the node's covariate (node-local covariate `cov`).
std::vector<Candidate> split_candidates(const Covariate& cov, const std::vector<Index>& persons,
                                        const ExamDataset& node_ds) {
  std::vector<Candidate> out;
  const std::vector<double> keys = distinct_values(cov);
  if (keys.size() < 2) return out;

  auto ordered_thresholds = [&](const std::vector<double>& order_keys) {
    for (std::size_t k = 0; k + 1 < order_keys.size(); ++k) {
      SplitRule rule = base_rule(cov);
      rule.threshold = order_keys[k];
      if (cov.categorical()) {
        rule.threshold_label = cov.levels[static_cast<std::size_t>(order_keys[k])];
      } else {
        Covariate tmp{cov.name, cov.kind, {order_keys[k]}, {}, {}};
        rule.threshold_label = tmp.label(0);
      }
      out.push_back(partition(rule, cov, persons));
    }
  };

  if (cov.kind != CovariateKind::nominal) {
    ordered_thresholds(keys);
    return out;
  }

  std::vector<int> present;
  for (double k : keys) present.push_back(static_cast<int>(k));
  if (present.size() <= kMaxExhaustiveLevels) {
    // Subsets containing the first present level, excluding the full set.
    const std::size_t others = present.size() - 1;
    for (std::uint32_t mask = 0; mask + 1 < (1u << others); ++mask) {
      SplitRule rule = base_rule(cov);
      rule.left_levels.push_back(present[0]);
      for (std::size_t b = 0; b < others; ++b)
        if (mask & (1u << b)) rule.left_levels.push_back(present[b + 1]);
      out.push_back(partition(rule, cov, persons));
    }
    return out;
  }
  // Many levels: order levels by mean raw score and split as if ordinal.
  std::vector<double> mean(cov.levels.size(), 0.0), count(cov.levels.size(), 0.0);
  for (std::size_t i = 0; i < cov.size(); ++i) {
    const auto lvl = static_cast<std::size_t>(cov.values[i]);
    mean[lvl] += node_ds.raw_scores(static_cast<Index>(i));
    count[lvl] += 1.0;
  }
  std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
    return mean[static_cast<std::size_t>(a)] / count[static_cast<std::size_t>(a)] <
           mean[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)];
  });
  for (std::size_t k = 0; k + 1 < present.size(); ++k) {
    SplitRule rule = base_rule(cov);
    rule.left_levels.assign(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    out.push_back(partition(rule, cov, persons));
  }
  return out;
}

std::optional<RaschFit> try_fit(const ItemResponses& responses) {
  try {
    return fit_cml(responses);
  } catch (const DataError&) {
  } catch (const ConvergenceError&) {
  }
  return std::nullopt;
}

TreeNode grow_node(const ExamDataset& ds, std::vector<Index> persons, RaschFit fit,
                   const std::vector<std::string>& names, const TreeOptions& opts, int& next_id) {
  TreeNode node;
  node.id = next_id++;
  node.n = static_cast<Index>(persons.size());
  node.fit = std::move(fit);
  const ExamDataset node_ds = ds.rows(persons);

  for (std::size_t c = 0; c < names.size(); ++c) {
    const Covariate& cov = node_ds.covariate(names[c]);
    const std::size_t distinct = distinct_values(cov).size();
    if (distinct < 2) continue;
    // With two values every functional reduces to the single LM statistic,
    // whose null distribution is exactly chi-square.
    const Functional f = distinct == 2 ? Functional::lm_nominal : functional_for(cov.kind);
    InstabilityOptions io;
    io.nrep = opts.nrep;
    io.trim = opts.trim;
    io.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(node.id), c);
    try {
      node.tests.push_back({cov.name, instability_test(node.fit, node_ds.responses, cov, f, io), 1.0});
    } catch (const DataError&) {
      // Not testable in this node (e.g. too few split points after trimming).
    }
  }
  const auto tested = static_cast<double>(node.tests.size());
  for (auto& t : node.tests) t.p_adjusted = std::min(1.0, t.result.p_value * tested);

  const auto best = std::min_element(node.tests.begin(), node.tests.end(),
                                     [](const auto& a, const auto& b) { return a.p_adjusted < b.p_adjusted; });
  if (best == node.tests.end() || !(best->p_adjusted < opts.alpha) || node.n < 2 * opts.minsize) return node;

  const Covariate& cov = node_ds.covariate(best->covariate);
  std::optional<Candidate> chosen;
  std::optional<RaschFit> chosen_left, chosen_right;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (auto& cand : split_candidates(cov, persons, node_ds)) {
    if (static_cast<Index>(cand.left.size()) < opts.minsize || static_cast<Index>(cand.right.size()) < opts.minsize)
      continue;
    auto left = try_fit(ds.responses.rows(cand.left));
    if (!left) continue;
    auto right = try_fit(ds.responses.rows(cand.right));
    if (!right) continue;
    const double ll = left->loglik + right->loglik;
    if (ll > best_ll) {
      best_ll = ll;
      chosen = std::move(cand);
      chosen_left = std::move(left);
      chosen_right = std::move(right);
    }
  }
  if (!chosen) return node;

  node.split = chosen->rule;
  node.split_loglik = best_ll;
  node.children.push_back(grow_node(ds, std::move(chosen->left), std::move(*chosen_left), names, opts, next_id));
  node.children.push_back(grow_node(ds, std::move(chosen->right), std::move(*chosen_right), names, opts, next_id));
  return node;
}

void collect_leaves(const TreeNode& node, std::vector<const TreeNode*>& out) {
  if (node.is_leaf()) {
    out.push_back(&node);
    return;
  }
  for (const auto& child : node.children) collect_leaves(child, out);
}

std::string format_p(double p) {
  std::ostringstream os;
  os.precision(4);
  os << p;
  return os.str();
}

void render(const TreeNode& node, const std::string& indent, const std::string& edge, std::ostringstream& os) {
  os << indent << "[" << node.id << "] " << edge << (edge.empty() ? "" : ": ") << "n = " << node.n;
  if (node.is_leaf()) {
    os << "\n";
    return;
  }
  const auto& t = *std::find_if(node.tests.begin(), node.tests.end(),
                                [&](const auto& x) { return x.covariate == node.split->covariate; });
  os << " (split on " << node.split->covariate << ", adjusted p = " << format_p(t.p_adjusted) << ")\n";
  render(node.children[0], indent + "|   ", node.split->describe(true), os);
  render(node.children[1], indent + "|   ", node.split->describe(false), os);
}

}  // namespace

bool SplitRule::goes_left(const Covariate& cov, std::size_t person) const {
  const double v = cov.values[person];
  if (kind == CovariateKind::nominal)
    return std::find(left_levels.begin(), left_levels.end(), static_cast<int>(v)) != left_levels.end();
  return v <= threshold;
}

bool SplitRule::goes_left(const std::string& value) const {
  if (kind == CovariateKind::numeric) {
    const auto v = to_number(value);
    if (!v) throw DataError("value '" + value + "' of '" + covariate + "' is not numeric");
    return *v <= threshold;
  }
  const auto it = std::find(levels.begin(), levels.end(), value);
  if (kind == CovariateKind::ordinal) {
    if (it != levels.end()) return static_cast<double>(it - levels.begin()) <= threshold;
    const auto v = to_number(value);
    if (v && !level_numbers.empty()) return *v <= level_numbers[static_cast<std::size_t>(threshold)];
    throw DataError("value '" + value + "' is not a level of '" + covariate + "'");
  }
  if (it == levels.end()) throw DataError("value '" + value + "' is not a level of '" + covariate + "'");
  const int code = static_cast<int>(it - levels.begin());
  return std::find(left_levels.begin(), left_levels.end(), code) != left_levels.end();
}

std::string SplitRule::describe(bool left) const {
  if (kind != CovariateKind::nominal) return covariate + (left ? " <= " : " > ") + threshold_label;
  std::string out = covariate + " in {";
  bool first = true;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const bool is_left = std::find(left_levels.begin(), left_levels.end(), static_cast<int>(l)) != left_levels.end();
    if (is_left != left) continue;
    out += (first ? "" : ", ") + levels[l];
    first = false;
  }
  return out + "}";
}

TreeNode grow(const ExamDataset& ds, const std::vector<std::string>& covariate_names, const TreeOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw DataError("alpha must lie in (0,1)");
  if (options.minsize < ds.m() + 1)
    throw DataError("minsize must be at least m + 1 = " + std::to_string(ds.m() + 1));
  for (const auto& name : covariate_names) ds.covariate(name);
  std::vector<Index> all(static_cast<std::size_t>(ds.n()));
  std::iota(all.begin(), all.end(), Index{0});
  RaschFit root_fit = fit_cml(ds.responses);
  int next_id = 1;
  return grow_node(ds, std::move(all), std::move(root_fit), covariate_names, options, next_id);
}

std::vector<const TreeNode*> leaves(const TreeNode& root) {
  std::vector<const TreeNode*> out;
  collect_leaves(root, out);
  return out;
}

std::vector<NodeProfile> node_profiles(const TreeNode& root) {
  std::vector<NodeProfile> out;
  for (const TreeNode* leaf : leaves(root)) out.push_back({leaf->id, leaf->n, itempar(leaf->fit)});
  return out;
}

int predict_node(const TreeNode& root, const std::map<std::string, std::string>& values) {
  const TreeNode* node = &root;
  while (!node->is_leaf()) {
    const auto it = values.find(node->split->covariate);
    if (it == values.end()) throw DataError("missing value for split covariate '" + node->split->covariate + "'");
    node = &node->children[node->split->goes_left(it->second) ? 0 : 1];
  }
  return node->id;
}

std::string render_text(const TreeNode& root) {
  std::ostringstream os;
  render(root, "", "", os);
  return os.str();
}

}  // namespace raschdif
