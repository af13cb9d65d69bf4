#include "raschdif/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "raschdif/report.hpp"
#include "raschdif/svg.hpp"

namespace raschdif::cli {

namespace {

using report::Json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("RASCHDIF_SEED");
  if (env == nullptr || *env == '\0') return kDefaultSeed;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw UsageError(std::string("RASCHDIF_SEED is not an unsigned integer: ") + env);
  return v;
}

Json config_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["input"] = c.input;
  j["output"] = c.output;
  j["item_prefix"] = c.item_prefix;
  j["seed"] = c.seed;
  j["keep_extremes"] = c.keep_extremes;
  j["svg"] = c.svg;
  j["subset"] = c.subsets;
  j["ordinal"] = c.ordinal;
  j["nominal"] = c.nominal;
  if (c.command == "lrtest" || c.command == "anchortest") j["group"] = c.group;
  if (c.command == "anchortest") {
    j["anchor"] = c.anchor;
    j["coverage"] = c.coverage;
    j["nsim"] = c.nsim;
    j["gini_direction"] = c.gini_direction;
  }
  if (c.command == "sctest") {
    j["covariate"] = c.covariate;
    j["functional"] = c.functional;
  }
  if (c.command == "sctest" || c.command == "tree") {
    j["nrep"] = c.nrep;
    j["trim"] = c.trim;
  }
  if (c.command == "tree") {
    j["covariates"] = c.covariates;
    j["minsize"] = c.minsize;
    j["alpha"] = c.alpha;
  }
  if (c.command == "mix") {
    j["k"] = c.k;
    j["scores"] = c.scores;
    j["restarts"] = c.restarts;
    j["maxiter"] = c.maxiter;
    j["tol"] = c.tol;
  }
  return j;
}

struct Prepared {
  ExamDataset data;
  Index n_loaded = 0;
  Index n_excluded = 0;
};

Prepared prepare(const RunConfig& c) {
  ExamDataset ds = load_csv(c.input, c.item_prefix);
  Prepared p{ds, ds.n(), 0};
  for (const auto& name : c.ordinal) p.data = as_ordered(p.data, name);
  for (const auto& name : c.nominal) p.data = as_nominal(p.data, name);
  if (!c.subsets.empty()) {
    std::vector<bool> mask(static_cast<std::size_t>(p.data.n()), true);
    for (const auto& s : c.subsets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--subset expects column=value, got '" + s + "'");
      const auto m = covariate_equals(p.data, s.substr(0, eq), s.substr(eq + 1));
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && m[i];
    }
    p.data = subset(p.data, mask);
  }
  if (!c.keep_extremes) {
    const Index before = p.data.n();
    p.data = exclude_extreme_scores(p.data);
    p.n_excluded = before - p.data.n();
  }
  return p;
}

Json data_json(const Prepared& p) {
  Json j;
  j["n_loaded"] = p.n_loaded;
  j["n_excluded_extreme"] = p.n_excluded;
  j["n"] = p.data.n();
  j["m"] = p.data.m();
  return j;
}

Json labelled(const std::vector<std::string>& labels, const Eigen::VectorXd& v) {
  Json out = Json::object();
  for (Index j = 0; j < v.size(); ++j) out[labels[static_cast<std::size_t>(j)]] = v(j);
  return out;
}

class Writer {
 public:
  Writer(const RunConfig& c, std::ostream& out) : c_(c), out_(out) {}

  void figure(const std::string& name, const std::string& content) {
    if (!c_.svg) return;
    const std::string path = c_.output + "-" + name + ".svg";
    svg::write_file(path, content);
    out_ << "wrote " << path << "\n";
  }
  void json(const Json& result) {
    Json doc;
    doc["config"] = config_json(c_);
    doc["result"] = result;
    const std::string path = c_.output + ".json";
    svg::write_file(path, report::dump(doc));
    out_ << "wrote " << path << "\n";
  }

 private:
  const RunConfig& c_;
  std::ostream& out_;
};

Json cmd_summary(const RunConfig& c, Writer& w) {
  const Prepared p = prepare(c);
  const ExamDataset& ds = p.data;
  const Eigen::VectorXd props = item_summary(ds);
  Json j;
  j["data"] = data_json(p);
  Json items = Json::array();
  for (Index i = 0; i < ds.m(); ++i)
    items.push_back({{"item", ds.responses.item_labels()[static_cast<std::size_t>(i)]}, {"proportion", props(i)}});
  j["items"] = std::move(items);
  std::vector<Index> dist(static_cast<std::size_t>(ds.m() + 1), 0);
  for (Index i = 0; i < ds.n(); ++i) ++dist[static_cast<std::size_t>(ds.raw_scores(i))];
  j["score_distribution"] = dist;
  Json covs = Json::array();
  for (const auto& cov : ds.covariates) {
    Json cj;
    cj["name"] = cov.name;
    cj["kind"] = std::string(to_string(cov.kind));
    if (cov.categorical()) {
      cj["levels"] = cov.levels;
    } else if (cov.size() > 0) {
      const auto [lo, hi] = std::minmax_element(cov.values.begin(), cov.values.end());
      cj["min"] = *lo;
      cj["max"] = *hi;
    }
    covs.push_back(std::move(cj));
  }
  j["covariates"] = std::move(covs);
  w.figure("items", svg::item_frequency_bars(ds.responses.item_labels(), props));
  return j;
}

Json cmd_fit(const RunConfig& c, Writer& w) {
  const Prepared p = prepare(c);
  const RaschFit fit = fit_cml(p.data.responses);
  const PersonParameters pp = personpar(fit, p.data.responses);
  Json j;
  j["data"] = data_json(p);
  j["fit"] = report::fit_json(fit);
  Json persons = Json::array();
  for (Index r = 1; r < fit.m(); ++r)
    persons.push_back({{"score", r}, {"n", fit.score_counts(r)}, {"theta", pp.theta(r - 1)}});
  j["person_parameters"] = std::move(persons);
  const Eigen::VectorXd beta = itempar(fit).beta;
  w.figure("profile", svg::profile_plot(fit.item_labels, {{"all", beta, ""}}, "Item difficulty profile"));
  w.figure("personitem", svg::person_item_plot(fit.item_labels, beta, pp.theta, fit.score_counts));
  return j;
}

void require(const std::string& value, const std::string& flag, const std::string& command) {
  if (value.empty()) throw UsageError(command + " requires " + flag);
}

Json cmd_lrtest(const RunConfig& c, Writer& w) {
  require(c.group, "--group", c.command);
  const Prepared p = prepare(c);
  const GroupSplit g = split_groups(p.data, c.group);
  const RaschFit fr = fit_cml(g.reference.responses);
  const RaschFit ff = fit_cml(g.focal.responses);
  Json j;
  j["data"] = data_json(p);
  j["groups"] = {{"reference", g.reference_label}, {"focal", g.focal_label},
                 {"n_reference", g.reference.n()}, {"n_focal", g.focal.n()}};
  j["tests"] = {report::global_test_json(lr_test(p.data, c.group)),
                report::global_test_json(wald_test_global(p.data, c.group)),
                report::global_test_json(score_test_global(p.data, c.group))};
  const auto& labels = p.data.responses.item_labels();
  const Eigen::VectorXd br = itempar(fr).beta, bf = itempar(ff).beta;
  j["beta_reference"] = labelled(labels, br);
  j["beta_focal"] = labelled(labels, bf);
  w.figure("profiles", svg::profile_plot(labels,
                                         {{c.group + " " + g.reference_label, br, ""},
                                          {c.group + " " + g.focal_label, bf, ""}},
                                         "Item profiles by " + c.group));
  return j;
}

Json cmd_anchortest(const RunConfig& c, Writer& w) {
  require(c.group, "--group", c.command);
  AnchorOptions o;
  o.coverage = c.coverage;
  o.nsim = c.nsim;
  o.seed = c.seed;
  if (c.gini_direction == "maximize") o.direction = GiniDirection::maximize;
  else if (c.gini_direction == "minimize") o.direction = GiniDirection::minimize;
  else throw UsageError("--gini-direction must be maximize or minimize");
  if (!(c.coverage > 0.0 && c.coverage < 1.0)) throw UsageError("--coverage must lie in (0,1)");
  if (c.nsim < 1) throw UsageError("--nsim must be positive");

  const Prepared p = prepare(c);
  const auto& labels = p.data.responses.item_labels();
  if (c.anchor != "auto") {
    const auto it = std::find(labels.begin(), labels.end(), c.anchor);
    if (it != labels.end()) {
      o.anchor = it - labels.begin();
    } else {
      char* end = nullptr;
      const long v = std::strtol(c.anchor.c_str(), &end, 10);
      if (*end != '\0' || v < 1 || v > static_cast<long>(labels.size()))
        throw UsageError("--anchor must be auto, an item label or an index in 1.." + std::to_string(labels.size()));
      o.anchor = v - 1;
    }
  }
  const AnchoredWaldReport r = anchored_wald(p.data, c.group, o);
  Json j;
  j["data"] = data_json(p);
  j["anchor_selection"] = o.anchor ? "fixed" : "gini-" + c.gini_direction;
  if (!o.anchor) {
    const GroupSplit g = split_groups(p.data, c.group);
    j["gini"] = labelled(labels, anchor_gini_profile(fit_cml(g.reference.responses), fit_cml(g.focal.responses)));
  }
  j["anchortest"] = report::anchored_wald_json(r);
  w.figure("ci", svg::ci_plot(r));
  return j;
}

Functional parse_functional(const std::string& s, CovariateKind kind) {
  if (s == "auto") return functional_for(kind);
  for (Functional f : {Functional::lm_nominal, Functional::maxlm_numeric, Functional::maxlm_ordinal}) {
    std::string name(to_string(f));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == name || s == to_string(f)) return f;
  }
  throw UsageError("unknown functional '" + s + "'");
}

Json cmd_sctest(const RunConfig& c, Writer& w) {
  require(c.covariate, "--covariate", c.command);
  if (c.nrep < 1) throw UsageError("--nrep must be positive");
  const Prepared p = prepare(c);
  const Covariate& cov = p.data.covariate(c.covariate);
  const Functional f = parse_functional(c.functional, cov.kind);
  InstabilityOptions io;
  io.nrep = c.nrep;
  io.seed = c.seed;
  io.trim = c.trim;
  const RaschFit fit = fit_cml(p.data.responses);
  const InstabilityResult r = instability_test(fit, p.data.responses, cov, f, io);
  Json j;
  j["data"] = data_json(p);
  j["covariate"] = {{"name", cov.name}, {"kind", std::string(to_string(cov.kind))}};
  j["sctest"] = report::instability_json(r);
  if (!r.per_threshold.empty()) w.figure("statistics", svg::statistic_sequence(r, cov.name));
  return j;
}

Json cmd_tree(const RunConfig& c, Writer& w) {
  if (c.covariates.empty()) throw UsageError("tree requires --covariates");
  if (c.nrep < 1) throw UsageError("--nrep must be positive");
  const Prepared p = prepare(c);
  TreeOptions o;
  o.alpha = c.alpha;
  o.minsize = c.minsize;
  o.nrep = c.nrep;
  o.seed = c.seed;
  o.trim = c.trim;
  const TreeNode root = grow(p.data, c.covariates, o);
  Json j;
  j["data"] = data_json(p);
  j["n_leaves"] = leaves(root).size();
  j["tree"] = report::tree_json(root);
  j["text"] = render_text(root);
  w.figure("tree", svg::tree_diagram(root));
  return j;
}

Json cmd_mix(const RunConfig& c, Writer& w) {
  ScoreKind kind;
  if (c.scores == "meanvar") kind = ScoreKind::meanvar;
  else if (c.scores == "saturated") kind = ScoreKind::saturated;
  else throw UsageError("--scores must be meanvar or saturated");
  if (c.keep_extremes) throw UsageError("mix cannot use --keep-extremes: mixture densities need non-extreme scores");
  MixtureOptions o;
  o.maxiter = c.maxiter;
  o.tol = c.tol;
  o.restarts = c.restarts;
  o.seed = c.seed;
  const Prepared p = prepare(c);
  const MixtureFit fit = fit_em(p.data.responses, c.k, kind, o);
  Json j;
  j["data"] = data_json(p);
  j["mixture"] = report::mixture_json(fit, p.data.responses.item_labels(), p.data.n());
  w.figure("profiles", svg::mixture_profiles(p.data.responses.item_labels(), fit));
  return j;
}

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--input", c.input, "CSV file with a header row")->required();
  sub->add_option("--output", c.output, "Output prefix (default: the command name)");
  sub->add_option("--seed", c.seed, "Random seed (env RASCHDIF_SEED)");
  sub->add_option("--item-prefix", c.item_prefix, "Prefix of item columns")->capture_default_str();
  sub->add_flag("--keep-extremes", c.keep_extremes, "Keep persons with raw score 0 or m");
  sub->add_flag("--svg", c.svg, "Also write SVG figures");
  sub->add_option("--subset", c.subsets, "Keep rows with column=value (repeatable)");
  sub->add_option("--ordinal", c.ordinal, "Covariates to treat as ordinal")->delimiter(',');
  sub->add_option("--nominal", c.nominal, "Covariates to treat as nominal")->delimiter(',');
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c.seed = default_seed();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  CLI::App app{"Rasch models and differential item functioning", "raschdif"};
  app.require_subcommand(1);
  std::map<std::string, Json (*)(const RunConfig&, Writer&)> commands;

  auto* summary = app.add_subcommand("summary", "Item proportions and covariate overview");
  add_common(summary, c);
  commands["summary"] = cmd_summary;

  auto* fit = app.add_subcommand("fit", "Conditional maximum likelihood Rasch fit");
  add_common(fit, c);
  commands["fit"] = cmd_fit;

  auto* lrtest = app.add_subcommand("lrtest", "Global LR, Wald and score tests between two groups");
  add_common(lrtest, c);
  lrtest->add_option("--group", c.group, "Binary grouping covariate")->required();
  commands["lrtest"] = cmd_lrtest;

  auto* anchortest = app.add_subcommand("anchortest", "Item-wise anchored Wald tests");
  add_common(anchortest, c);
  anchortest->add_option("--group", c.group, "Binary grouping covariate")->required();
  anchortest->add_option("--anchor", c.anchor, "auto, an item label, or a 1-based item index")->capture_default_str();
  anchortest->add_option("--coverage", c.coverage, "Simultaneous coverage")->capture_default_str();
  anchortest->add_option("--nsim", c.nsim, "Monte Carlo draws for the critical value")->capture_default_str();
  anchortest->add_option("--gini-direction", c.gini_direction, "maximize or minimize")->capture_default_str();
  commands["anchortest"] = cmd_anchortest;

  auto* sctest = app.add_subcommand("sctest", "Score-based instability test along one covariate");
  add_common(sctest, c);
  sctest->add_option("--covariate", c.covariate, "Covariate to order by")->required();
  sctest->add_option("--functional", c.functional, "auto, lm-nominal, maxlm-numeric or maxlm-ordinal-l2")
      ->capture_default_str();
  sctest->add_option("--nrep", c.nrep, "Simulated bridges")->capture_default_str();
  sctest->add_option("--trim", c.trim, "Trimming of numeric split fractions")->capture_default_str();
  commands["sctest"] = cmd_sctest;

  auto* tree = app.add_subcommand("tree", "Rasch tree");
  add_common(tree, c);
  tree->add_option("--covariates", c.covariates, "Partitioning covariates")->delimiter(',')->required();
  tree->add_option("--minsize", c.minsize, "Minimum node size")->capture_default_str();
  tree->add_option("--alpha", c.alpha, "Significance level")->capture_default_str();
  tree->add_option("--nrep", c.nrep, "Simulated bridges per test")->capture_default_str();
  tree->add_option("--trim", c.trim, "Trimming of numeric split fractions")->capture_default_str();
  commands["tree"] = cmd_tree;

  auto* mix = app.add_subcommand("mix", "Rasch mixture model");
  add_common(mix, c);
  mix->add_option("--k", c.k, "Number of components")->capture_default_str();
  mix->add_option("--scores", c.scores, "meanvar or saturated")->capture_default_str();
  mix->add_option("--restarts", c.restarts, "EM restarts")->capture_default_str();
  mix->add_option("--maxiter", c.maxiter, "EM iterations per restart")->capture_default_str();
  mix->add_option("--tol", c.tol, "EM convergence tolerance")->capture_default_str();
  commands["mix"] = cmd_mix;

  std::vector<const char*> argv;
  argv.push_back("raschdif");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  c.command = app.get_subcommands().front()->get_name();
  if (c.output.empty()) c.output = c.command;
  try {
    Writer w(c, out);
    w.json(commands.at(c.command)(c, w));
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace raschdif::cli
