// Acceptance suite. Run all criteria, or one with --criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "raschdif/diftest.hpp"
#include "raschdif/esf.hpp"
#include "raschdif/rasch.hpp"
#include "raschdif/raschmix.hpp"
#include "raschdif/raschtree.hpp"
#include "raschdif/sctest.hpp"
#include "support/simulate.hpp"

using namespace raschdif;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---------------------------------------------------------------------------
// MathExam

const ExamDataset& mathexam_full() {
  static const std::optional<ExamDataset> data = [] {
    const std::filesystem::path path = RASCHDIF_MATHEXAM_CSV;
    if (!std::filesystem::exists(path)) return std::optional<ExamDataset>{};
    ExamDataset ds = load_csv(path, "solved.");
    for (const char* name : {"tests", "nsolved", "attempt", "semester"}) ds = as_ordered(ds, name);
    return std::optional<ExamDataset>{std::move(ds)};
  }();
  if (!data) throw DataError(std::string("MathExam data not found at ") + RASCHDIF_MATHEXAM_CSV);
  return *data;
}

const ExamDataset& mathexam() {
  static const ExamDataset mex = exclude_extreme_scores(mathexam_full());
  return mex;
}

const ExamDataset& mathexam_group1() {
  static const ExamDataset mex1 = subset(mathexam(), covariate_equals(mathexam(), "group", "1"));
  return mex1;
}

Outcome lr_by_group() {
  const ExamDataset& mex = mathexam();
  const Clock clock;
  const GlobalDifTest t = lr_test(mex, "group");
  const double secs = clock.seconds();
  const bool pass = std::abs(t.statistic - 264.9577) <= 0.01 && t.df == 12 && secs < 1.0;
  return {pass, "LR = " + fmt("%.4f", t.statistic) + ", df = " + std::to_string(t.df) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome wald_and_score() {
  const double wald = wald_test_global(mathexam(), "group").statistic;
  const double score = score_test_global(mathexam(), "group").statistic;
  return {std::abs(wald - 249.4) <= 0.5 && std::abs(score - 260.8) <= 0.5,
          "Wald = " + fmt("%.3f", wald) + ", score = " + fmt("%.3f", score)};
}

Outcome gini_anchor() {
  const GroupSplit g = split_groups(mathexam(), "group");
  const Index anchor = anchor_select_gini(fit_cml(g.reference.responses), fit_cml(g.focal.responses));
  return {anchor == 11, "anchor = item " + std::to_string(anchor + 1)};
}

Outcome anchored_items() {
  AnchorOptions o;
  o.nsim = 100000;
  const AnchoredWaldReport r = anchored_wald(mathexam(), "group", o);
  std::vector<Index> flagged;
  bool harder_for_2 = true;
  for (Index j = 0; j < static_cast<Index>(r.significant.size()); ++j)
    if (r.significant[static_cast<std::size_t>(j)]) {
      flagged.push_back(j + 1);
      harder_for_2 = harder_for_2 && r.diff(j) < 0.0;
    }
  std::string list;
  for (Index j : flagged) list += (list.empty() ? "" : ",") + std::to_string(j);
  return {flagged == std::vector<Index>{1, 7, 9} && harder_for_2,
          "anchor " + std::to_string(r.anchor + 1) + ", flagged {" + list + "}" +
              (harder_for_2 ? ", all harder for group 2" : ", not all harder for group 2")};
}

Outcome maxlm_tests() {
  const ExamDataset& mex1 = mathexam_group1();
  const Clock clock;
  const RaschFit fit = fit_cml(mex1.responses);
  InstabilityOptions o;
  o.nrep = 100000;
  const InstabilityResult r =
      instability_test(fit, mex1.responses, mex1.covariate("tests"), Functional::maxlm_ordinal, o);
  const double secs = clock.seconds();
  const std::string argmax = r.argmax ? r.per_threshold[*r.argmax].label : "none";
  const bool pass = std::abs(r.statistic - 35.543) <= 0.01 && std::abs(r.p_value - 0.0054) <= 0.003 &&
                    argmax == "16" && secs < 30.0;
  return {pass, "statistic = " + fmt("%.3f", r.statistic) + ", p = " + fmt("%.6f", r.p_value) + ", argmax tests <= " +
                    argmax + ", " + fmt("%.2f", secs) + " s"};
}

Outcome tree_structure() {
  TreeOptions o;
  o.minsize = 50;
  o.alpha = 0.05;
  o.nrep = 100000;
  const Clock clock;
  const TreeNode root =
      grow(mathexam(), {"group", "tests", "nsolved", "gender", "attempt", "study", "semester"}, o);
  const double secs = clock.seconds();
  std::ostringstream d;
  const auto count = leaves(root).size();
  d << count << " leaves, " << fmt("%.1f", secs) << " s";
  bool pass = secs < 300.0 && count == 4 && root.split && root.split->covariate == "group" &&
              root.children.size() == 2;
  if (pass) {
    const TreeNode& g1 = root.children[0];
    const TreeNode& g2 = root.children[1];
    pass = root.split->goes_left(std::string("1")) && g1.split && g1.split->covariate == "tests" &&
           g1.split->threshold_label == "16" && g2.split && g2.split->covariate == "nsolved";
  }
  return {pass, render_text(root) + d.str()};
}

Outcome mixture_sizes() {
  const MixtureFit fit = fit_em(mathexam_group1().responses, 2, ScoreKind::meanvar, MixtureOptions{});
  const Index a = fit.cluster_sizes[0], b = fit.cluster_sizes[1];
  return {std::abs(a - 235) <= 5 && std::abs(b - 73) <= 5,
          "cluster sizes " + std::to_string(a) + " " + std::to_string(b)};
}

Outcome item_proportions() {
  const ExamDataset& ds = mathexam_full();
  const Eigen::VectorXd p = item_summary(ds);
  const auto& labels = ds.responses.item_labels();
  const auto it = std::find(labels.begin(), labels.end(), "payflow");
  if (it == labels.end()) return {false, "no item labelled payflow"};
  const double payflow = p(it - labels.begin());
  const auto mid = std::count_if(p.data(), p.data() + p.size(), [](double x) { return x >= 0.40 && x <= 0.80; });
  return {payflow < 0.15 && mid >= 10 && p.size() == 13,
          "payflow = " + fmt("%.3f", payflow) + ", " + std::to_string(mid) + " of " + std::to_string(p.size()) +
              " items in [0.40, 0.80]"};
}

// ---------------------------------------------------------------------------
// Self-contained properties

Outcome esf_oracle() {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> size(1, 10);
  std::normal_distribution<double> z(0.0, 1.5);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    Eigen::VectorXd eps(size(gen));
    for (Index j = 0; j < eps.size(); ++j) eps(j) = std::exp(z(gen));
    const EsfResult r = esf(std::span<const double>(eps.data(), static_cast<std::size_t>(eps.size())), 1);
    const testsupport::BruteEsf b = testsupport::esf_bruteforce(eps);
    auto rel = [](double a, double e) { return e == 0.0 ? std::abs(a) : std::abs(a - e) / std::abs(e); };
    for (Index k = 0; k < b.gamma.size(); ++k) {
      worst = std::max(worst, rel(r.gamma(k), b.gamma(k)));
      for (Index j = 0; j < eps.size(); ++j) worst = std::max(worst, rel(r.d1(k, j), b.d1(k, j)));
    }
  }
  return {worst <= 1e-10, "max relative error " + fmt("%.2e", worst)};
}

Outcome cml_oracle() {
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<int> items(2, 4), persons(6, 12);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_beta = 0.0, worst_grad = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index m = items(gen);
    const ItemResponses y = testsupport::random_estimable(persons(gen), m, gen);
    const RaschFit fit = fit_cml(y);
    const Eigen::VectorXd beta = fit.beta.array() - fit.beta(0);
    worst_beta = std::max(worst_beta, (beta - testsupport::cml_grid_search(y)).cwiseAbs().maxCoeff());

    const SufficientStats st = sufficient_stats(y);
    Eigen::VectorXd at(m);
    for (Index j = 0; j < m; ++j) at(j) = z(gen);
    const Eigen::VectorXd g = evaluate_cml(st, at, 1).gradient;
    Eigen::VectorXd fd(m);
    const double h = 1e-5;
    for (Index j = 0; j < m; ++j) {
      Eigen::VectorXd up = at, down = at;
      up(j) += h;
      down(j) -= h;
      fd(j) = (evaluate_cml(st, up, 0).loglik - evaluate_cml(st, down, 0).loglik) / (2 * h);
    }
    worst_grad = std::max(worst_grad, (g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
  }
  return {worst_beta <= 1e-3 && worst_grad <= 1e-5,
          "max |beta - grid| " + fmt("%.2e", worst_beta) + ", gradient relative error " + fmt("%.2e", worst_grad)};
}

Outcome two_item_closed_form() {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> count(1, 500), extreme(0, 20);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n10 = count(gen), n01 = count(gen), n11 = extreme(gen), n00 = extreme(gen);
    Eigen::MatrixXi y(n10 + n01 + n11 + n00, 2);
    Index row = 0;
    auto put = [&](int times, int a, int b) {
      for (int i = 0; i < times; ++i, ++row) y.row(row) << a, b;
    };
    put(n10, 1, 0);
    put(n01, 0, 1);
    put(n11, 1, 1);
    put(n00, 0, 0);
    const RaschFit fit = fit_cml(ItemResponses(y, {"a", "b"}));
    worst = std::max(worst, std::abs(fit.beta(1) - fit.beta(0) - std::log(static_cast<double>(n10) / n01)));
  }
  return {worst <= 1e-10, "max error " + fmt("%.2e", worst)};
}

Outcome null_calibration() {
  Eigen::VectorXd beta(6);
  beta << -1.0, -0.5, 0.0, 0.3, 0.7, 1.0;
  std::mt19937_64 gen(12);
  const ExamDataset ds = exclude_extreme_scores(testsupport::simulate_two_groups(250, 250, beta, beta, gen));
  const RaschFit fit = fit_cml(ds.responses);
  Covariate x = ds.covariate("noise");
  InstabilityOptions io;
  io.nrep = 5000;
  std::vector<double> ps;
  for (int rep = 0; rep < 200; ++rep) {
    std::shuffle(x.values.begin(), x.values.end(), gen);
    io.seed = 1000 + static_cast<std::uint64_t>(rep);
    ps.push_back(instability_test(fit, ds.responses, x, Functional::maxlm_numeric, io).p_value);
  }
  const double ks = testsupport::ks_uniform_pvalue(ps);

  TreeOptions to;
  to.nrep = 5000;
  int splits = 0;
  const int trees = 200;
  for (int rep = 0; rep < trees; ++rep) {
    const ExamDataset null =
        exclude_extreme_scores(testsupport::simulate_two_groups(150, 150, beta, beta, gen));
    to.seed = 5000 + static_cast<std::uint64_t>(rep);
    if (grow(null, {"noise", "level"}, to).split) ++splits;
  }
  const double rate = static_cast<double>(splits) / trees;
  return {ks > 0.01 && rate >= 0.01 && rate <= 0.10,
          "KS p = " + fmt("%.3f", ks) + ", false-split rate " + fmt("%.3f", rate)};
}

Outcome em_monotone() {
  double worst_drop = 0.0, worst_k1 = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 gen(seed);
    Eigen::VectorXd b1 = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0), b2 = b1;
    for (Index j = 0; j < 4; ++j) {
      b1(j) += 1.5;
      b2(j) -= 1.5;
    }
    const ExamDataset ds = exclude_extreme_scores(testsupport::simulate_two_groups(250, 250, b1, b2, gen));
    MixtureOptions o;
    o.seed = seed;
    const MixtureFit fit = fit_em(ds.responses, 2, ScoreKind::meanvar, o);
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
      worst_drop = std::max(worst_drop, fit.loglik_trace[t - 1] - fit.loglik_trace[t]);
    const MixtureFit one = fit_em(ds.responses, 1, ScoreKind::meanvar, o);
    const Eigen::VectorXd cml = itempar(fit_cml(ds.responses)).beta;
    worst_k1 = std::max(worst_k1, (one.components[0].beta - cml).cwiseAbs().maxCoeff());
  }
  return {worst_drop <= 1e-8 && worst_k1 <= 1e-8,
          "largest loglik decrease " + fmt("%.2e", worst_drop) + ", k = 1 vs CML " + fmt("%.2e", worst_k1)};
}

Outcome constraint_invariance() {
  FitOptions first, sumzero;
  first.parameterization = Parameterization::reference(0);
  sumzero.parameterization = Parameterization::sum_zero();
  double worst_diff = 0.0, worst_lr = 0.0, worst_score = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 gen(seed);
    Eigen::VectorXd b1(7);
    b1 << -1.2, -0.7, -0.2, 0.1, 0.5, 0.9, 1.3;
    Eigen::VectorXd b2 = b1;
    b2(2) += 0.6;
    const ExamDataset ds = exclude_extreme_scores(testsupport::simulate_two_groups(200, 200, b1, b2, gen));
    const GroupSplit g = split_groups(ds, "group");

    const RaschFit fa = fit_cml(ds.responses, {}, first), fb = fit_cml(ds.responses, {}, sumzero);
    for (Index j = 0; j < ds.m(); ++j)
      for (Index k = 0; k < ds.m(); ++k)
        worst_diff = std::max(worst_diff, std::abs((fa.beta(j) - fa.beta(k)) - (fb.beta(j) - fb.beta(k))));

    auto lr = [&](const FitOptions& o) {
      return -2.0 * (fit_cml(ds.responses, {}, o).loglik - fit_cml(g.reference.responses, {}, o).loglik -
                     fit_cml(g.focal.responses, {}, o).loglik);
    };
    worst_lr = std::max(worst_lr, std::abs(lr(first) - lr(sumzero)));

    for (const char* name : {"group", "colour"}) {
      const Covariate& cov = ds.covariate(name);
      const double sa = instability_test(fa, ds.responses, cov, Functional::lm_nominal).statistic;
      const double sb = instability_test(fb, ds.responses, cov, Functional::lm_nominal).statistic;
      worst_score = std::max(worst_score, std::abs(sa - sb));
    }
  }
  return {worst_diff <= 1e-8 && worst_lr <= 1e-8 && worst_score <= 1e-8,
          "beta differences " + fmt("%.2e", worst_diff) + ", LR " + fmt("%.2e", worst_lr) + ", score " +
              fmt("%.2e", worst_score)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"MathExam LR test by group", lr_by_group},
      {"MathExam global Wald and score tests", wald_and_score},
      {"MathExam Gini anchor", gini_anchor},
      {"MathExam anchored Wald items", anchored_items},
      {"MathExam maxLM along tests in group 1", maxlm_tests},
      {"MathExam Rasch tree", tree_structure},
      {"MathExam Rasch mixture cluster sizes", mixture_sizes},
      {"MathExam item proportions", item_proportions},
      {"ESF against pattern enumeration", esf_oracle},
      {"CML against grid search and finite differences", cml_oracle},
      {"two-item closed form", two_item_closed_form},
      {"null calibration of maxLM and tree", null_calibration},
      {"EM monotonicity and one-component mixture", em_monotone},
      {"constraint invariance", constraint_invariance},
  };
  return all;
}

bool run_one(std::size_t number) {
  const auto& [name, fn] = criteria()[number - 1];
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("error: ") + e.what()};
  }
  std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << number << ": " << name << " (" << out.detail
            << ")\n"
            << std::flush;
  return out.pass;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      const int n = std::atoi(argv[++i]);
      if (n < 1 || n > static_cast<int>(criteria().size())) {
        std::cerr << "criterion must be between 1 and " << criteria().size() << "\n";
        return 2;
      }
      which.push_back(static_cast<std::size_t>(n));
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (which.empty())
    for (std::size_t n = 1; n <= criteria().size(); ++n) which.push_back(n);
  bool ok = true;
  for (std::size_t n : which) ok = run_one(n) && ok;
  return ok ? 0 : 1;
}
