#include "raschdif/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace raschdif::report {

namespace {

void round_floats(Json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      j = nullptr;
      return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    double r = std::strtod(buf, nullptr);
    if (r == 0.0) r = 0.0;  // drops the sign of -0
    j = r;
  } else if (j.is_structured()) {
    for (auto& child : j) round_floats(child);
  }
}

Json labelled(const std::vector<std::string>& labels, const Eigen::VectorXd& v) {
  Json out = Json::object();
  for (Index j = 0; j < v.size(); ++j) out[labels[static_cast<std::size_t>(j)]] = v(j);
  return out;
}

}  // namespace

std::string dump(const Json& j) {
  Json copy = j;
  round_floats(copy);
  return copy.dump(2) + "\n";
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json fit_json(const RaschFit& fit) {
  const ItemParameterView view = itempar(fit);
  Json out;
  out["items"] = fit.item_labels;
  out["beta"] = labelled(fit.item_labels, view.beta);
  out["se"] = labelled(fit.item_labels, view.vcov.diagonal().cwiseMax(0.0).cwiseSqrt());
  out["constraint"] = "sum-zero";
  out["loglik"] = fit.loglik;
  out["n_effective"] = fit.score_counts.sum();
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["max_gradient"] = fit.max_gradient;
  return out;
}

Json global_test_json(const GlobalDifTest& t) {
  Json out;
  out["test"] = std::string(to_string(t.kind));
  out["statistic"] = t.statistic;
  out["df"] = t.df;
  out["p_value"] = t.p_value;
  return out;
}

Json anchored_wald_json(const AnchoredWaldReport& r) {
  Json out;
  out["reference_group"] = r.reference_label;
  out["focal_group"] = r.focal_label;
  out["anchor"] = r.item_labels[static_cast<std::size_t>(r.anchor)];
  out["coverage"] = r.coverage;
  out["critical_value"] = r.critical;
  Json items = Json::array();
  for (std::size_t j = 0; j < r.item_labels.size(); ++j) {
    const auto i = static_cast<Index>(j);
    Json item;
    item["item"] = r.item_labels[j];
    item["difference"] = r.diff(i);
    item["se"] = r.se(i);
    item["statistic"] = r.t(i);
    item["ci"] = {r.ci_lower(i), r.ci_upper(i)};
    item["significant"] = static_cast<bool>(r.significant[j]);
    item["harder_for"] = !r.significant[j] ? "" : (r.diff(i) < 0 ? r.focal_label : r.reference_label);
    items.push_back(std::move(item));
  }
  out["items"] = std::move(items);
  out["beta_reference"] = vector_json(r.reference.beta);
  out["beta_focal"] = vector_json(r.focal.beta);
  return out;
}

Json instability_json(const InstabilityResult& r) {
  Json out;
  out["functional"] = std::string(to_string(r.functional));
  out["statistic"] = r.statistic;
  out["p_value"] = r.p_value;
  if (r.functional == Functional::lm_nominal) out["df"] = r.df;
  if (r.critical_95) out["critical_95"] = *r.critical_95;
  if (r.argmax) out["argmax"] = r.per_threshold[*r.argmax].label;
  Json seq = Json::array();
  for (const auto& t : r.per_threshold)
    seq.push_back({{"threshold", t.label}, {"fraction", t.fraction}, {"statistic", t.statistic}});
  out["thresholds"] = std::move(seq);
  return out;
}

Json tree_json(const TreeNode& node) {
  Json out;
  out["id"] = node.id;
  out["n"] = node.n;
  out["loglik"] = node.fit.loglik;
  Json tests = Json::array();
  for (const auto& t : node.tests) {
    tests.push_back({{"covariate", t.covariate},
                     {"functional", std::string(to_string(t.result.functional))},
                     {"statistic", t.result.statistic},
                     {"p_value", t.result.p_value},
                     {"p_adjusted", t.p_adjusted}});
  }
  out["tests"] = std::move(tests);
  if (node.is_leaf()) {
    out["beta"] = labelled(node.fit.item_labels, itempar(node.fit).beta);
    return out;
  }
  Json split;
  split["covariate"] = node.split->covariate;
  split["left"] = node.split->describe(true);
  split["right"] = node.split->describe(false);
  if (node.split->kind != CovariateKind::nominal) split["threshold"] = node.split->threshold_label;
  out["split"] = std::move(split);
  out["children"] = {tree_json(node.children[0]), tree_json(node.children[1])};
  return out;
}

Json mixture_json(const MixtureFit& fit, const std::vector<std::string>& item_labels, Index n) {
  Json out;
  out["k"] = fit.k;
  out["scores"] = std::string(to_string(fit.score_kind));
  out["loglik"] = fit.loglik;
  out["bic"] = fit.bic(n);
  out["free_parameters"] = fit.free_parameters();
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["cluster_sizes"] = fit.cluster_sizes;
  out["restart_logliks"] = fit.restart_logliks;
  Json comps = Json::array();
  for (const auto& c : fit.components) {
    Json comp;
    comp["weight"] = c.weight;
    comp["beta"] = labelled(item_labels, c.beta);
    Json sm;
    sm["model"] = std::string(to_string(c.scores.kind));
    if (c.scores.kind == ScoreKind::meanvar) sm["delta"] = {c.scores.delta(0), c.scores.delta(1)};
    else sm["probabilities"] = vector_json(c.scores.probs);
    if (c.scores.fallback) sm["fallback"] = true;
    comp["score_model"] = std::move(sm);
    comps.push_back(std::move(comp));
  }
  out["components"] = std::move(comps);
  return out;
}

}  // namespace raschdif::report
