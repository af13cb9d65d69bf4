#include <doctest.h>

#include "raschdif/raschtree.hpp"
#include "support/simulate.hpp"

using namespace raschdif;

namespace {

Eigen::VectorXd base_beta() {
  Eigen::VectorXd b(6);
  b << -1.0, -0.6, -0.2, 0.2, 0.6, 1.0;
  return b;
}

// Group 2 has item 1 harder and item 6 easier. Tier is an ordinal covariate
// aligned with group (levels a-c for group 1, d-f for group 2).
ExamDataset tiered(Index n_per_group, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Eigen::VectorXd b2 = base_beta();
  b2(0) += 1.2;
  b2(5) -= 1.2;
  ExamDataset ds = testsupport::simulate_two_groups(n_per_group, n_per_group, base_beta(), b2, gen);
  Covariate tier{"tier", CovariateKind::ordinal, {}, {"a", "b", "c", "d", "e", "f"}, {}};
  std::uniform_int_distribution<int> three(0, 2);
  for (Index i = 0; i < ds.n(); ++i) tier.values.push_back(three(gen) + (ds.covariate("group").values[i] == 2 ? 3 : 0));
  ds.covariates.push_back(tier);
  return exclude_extreme_scores(ds);
}

TreeOptions quick() {
  TreeOptions o;
  o.nrep = 2000;
  return o;
}

}  // namespace

TEST_CASE("tree splits once on the DIF covariate") {
  const ExamDataset ds = tiered(400, 1);
  const TreeNode root = grow(ds, {"noise", "level", "colour", "tier"}, quick());
  REQUIRE(root.split);
  CHECK(root.split->covariate == "tier");
  CHECK(root.split->threshold_label == "c");
  CHECK(root.id == 1);
  REQUIRE(root.children.size() == 2);
  CHECK(root.children[0].id == 2);
  CHECK(root.children[1].id == 3);
  CHECK(leaves(root).size() == 2);
  CHECK(root.children[0].n + root.children[1].n == root.n);
  CHECK(root.tests.size() == 4);
  for (const auto& t : root.tests) CHECK(t.p_adjusted == doctest::Approx(std::min(1.0, 4 * t.result.p_value)));

  CHECK(predict_node(root, {{"tier", "a"}}) == 2);
  CHECK(predict_node(root, {{"tier", "c"}}) == 2);
  CHECK(predict_node(root, {{"tier", "d"}}) == 3);
  CHECK_THROWS_AS(predict_node(root, {{"group", "1"}}), DataError);
  CHECK_THROWS_AS(predict_node(root, {{"tier", "zz"}}), DataError);

  const std::string text = render_text(root);
  CHECK(text.find("split on tier") != std::string::npos);
  CHECK(text.find("tier <= c") != std::string::npos);
  CHECK(text.find("tier > c") != std::string::npos);

  const auto profiles = node_profiles(root);
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[1].view.beta(0) - profiles[0].view.beta(0) > 1.0);
}

TEST_CASE("numeric split uses <= and picks the loglik-maximizing point") {
  const ExamDataset ds = tiered(300, 2);
  const TreeNode root = grow(ds, {"group", "noise"}, quick());
  REQUIRE(root.split);
  CHECK(root.split->covariate == "group");
  CHECK(root.split->threshold_label == "1");
  CHECK(root.split->goes_left(std::string("1")));
  CHECK_FALSE(root.split->goes_left(std::string("2")));
  CHECK(predict_node(root, {{"group", "1.5"}}) == 3);
  const double children = root.children[0].fit.loglik + root.children[1].fit.loglik;
  CHECK(root.split_loglik == doctest::Approx(children));
  // group has two values, so its test is the exact chi-square one.
  for (const auto& t : root.tests)
    if (t.covariate == "group") CHECK(t.result.functional == Functional::lm_nominal);
}

TEST_CASE("nominal split partitions levels") {
  std::mt19937_64 gen(3);
  Eigen::VectorXd b2 = base_beta();
  b2(2) += 1.5;
  ExamDataset raw = testsupport::simulate_two_groups(450, 450, base_beta(), b2, gen);
  // Colour determined by group: group 1 is blue or green, group 2 is red.
  Covariate& colour = raw.covariates[3];
  std::bernoulli_distribution coin(0.5);
  for (Index i = 0; i < raw.n(); ++i)
    colour.values[static_cast<std::size_t>(i)] = raw.covariate("group").values[i] == 2 ? 2 : (coin(gen) ? 0 : 1);
  const ExamDataset ds = exclude_extreme_scores(raw);
  const TreeNode root = grow(ds, {"colour", "noise"}, quick());
  REQUIRE(root.split);
  CHECK(root.split->covariate == "colour");
  CHECK(root.split->describe(true) == "colour in {blue, green}");
  CHECK(root.split->describe(false) == "colour in {red}");
  CHECK(predict_node(root, {{"colour", "green"}}) == 2);
  CHECK(predict_node(root, {{"colour", "red"}}) == 3);
}

TEST_CASE("no split without instability or room") {
  std::mt19937_64 gen(4);
  const ExamDataset ds =
      exclude_extreme_scores(testsupport::simulate_two_groups(150, 150, base_beta(), base_beta(), gen));
  TreeOptions o = quick();
  SUBCASE("minsize") {
    const ExamDataset tiny = tiered(60, 5);
    o.minsize = tiny.n();
    const TreeNode root = grow(tiny, {"tier"}, o);
    CHECK(root.is_leaf());
    CHECK(root.n == tiny.n());
  }
  SUBCASE("single leaf reproduces the full fit") {
    const TreeNode root = grow(ds, {"colour"}, o);
    if (root.is_leaf()) {
      const auto profiles = node_profiles(root);
      REQUIRE(profiles.size() == 1);
      CHECK((profiles[0].view.beta - itempar(fit_cml(ds.responses)).beta).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(predict_node(root, {}) == 1);
    }
  }
  SUBCASE("constant covariate is skipped") {
    ExamDataset c = ds;
    Covariate k{"k", CovariateKind::numeric, std::vector<double>(static_cast<std::size_t>(c.n()), 3.0), {}, {}};
    c.covariates.push_back(k);
    const TreeNode root = grow(c, {"k"}, o);
    CHECK(root.is_leaf());
    CHECK(root.tests.empty());
  }
}

TEST_CASE("tree growth is deterministic") {
  const ExamDataset ds = tiered(250, 6);
  const TreeNode a = grow(ds, {"noise", "tier", "colour"}, quick());
  const TreeNode b = grow(ds, {"noise", "tier", "colour"}, quick());
  CHECK(render_text(a) == render_text(b));
  REQUIRE(a.tests.size() == b.tests.size());
  for (std::size_t k = 0; k < a.tests.size(); ++k) CHECK(a.tests[k].result.p_value == b.tests[k].result.p_value);
}

TEST_CASE("option validation") {
  const ExamDataset ds = tiered(100, 7);
  TreeOptions o = quick();
  o.alpha = 1.5;
  CHECK_THROWS_AS(grow(ds, {"tier"}, o), DataError);
  o = quick();
  o.minsize = 3;
  CHECK_THROWS_AS(grow(ds, {"tier"}, o), DataError);
  CHECK_THROWS_AS(grow(ds, {"bogus"}, quick()), DataError);
}
