#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "raschdif/cli.hpp"
#include "support/simulate.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Scratch directory holding a 13-item data set with DIF on items 2 and 9.
struct Workspace {
  fs::path dir;
  fs::path csv;

  Workspace() {
    dir = fs::temp_directory_path() / ("raschdif_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::mt19937_64 gen(31);
    const Eigen::VectorXd b1 = Eigen::VectorXd::LinSpaced(13, -1.5, 1.5);
    Eigen::VectorXd b2 = b1;
    b2(1) += 1.0;
    b2(8) -= 1.0;
    csv = dir / "exam.csv";
    std::ofstream(csv) << testsupport::to_csv(testsupport::simulate_two_groups(300, 300, b1, b2, gen));
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  fs::path out(const std::string& name) const { return dir / name; }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

int run_binary(const std::string& args) {
  const char* bin = std::getenv("RASCHDIF_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "RASCHDIF_CLI is not set");
  const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

int run_inproc(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = raschdif::cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string input() { return "--input " + workspace().csv.string(); }

}  // namespace

TEST_CASE("summary and fit write JSON with the configuration") {
  const Workspace& w = workspace();
  REQUIRE(run_binary("summary " + input() + " --output " + w.out("summary").string()) == 0);
  const auto summary = nlohmann::json::parse(slurp(w.out("summary.json")));
  CHECK(summary["config"]["command"] == "summary");
  CHECK(summary.contains("result"));

  REQUIRE(run_binary("fit " + input() + " --svg --output " + w.out("fit").string()) == 0);
  const auto fit = nlohmann::json::parse(slurp(w.out("fit.json")));
  CHECK(fit["config"]["svg"] == true);
  CHECK(fit["result"]["fit"]["converged"] == true);
  const std::string profile = slurp(w.out("fit-profile.svg"));
  CHECK(profile.find("<svg xmlns") != std::string::npos);
  CHECK(profile.substr(profile.size() - 7) == "</svg>\n");
  CHECK(count_of(profile, "class=\"item\"") == 13);
  CHECK(fs::exists(w.out("fit-personitem.svg")));
}

TEST_CASE("anchortest flags the DIF items and draws the anchor at zero") {
  const Workspace& w = workspace();
  REQUIRE(run_binary("anchortest " + input() + " --group group --nsim 5000 --svg --output " +
                     w.out("anchor").string()) == 0);
  const auto doc = nlohmann::json::parse(slurp(w.out("anchor.json")));
  const auto& result = doc["result"]["anchortest"];
  const std::string anchor = result["anchor"];
  int flagged = 0;
  for (const auto& item : result["items"]) {
    if (item["item"] == anchor) {
      CHECK(item["difference"] == 0.0);
      CHECK(item["ci"][0] == 0.0);
      CHECK(item["ci"][1] == 0.0);
    }
    if (item["significant"] == true) {
      ++flagged;
      CHECK((item["item"] == "2" || item["item"] == "9"));
    }
  }
  CHECK(flagged == 2);
  const std::string ci = slurp(w.out("anchor-ci.svg"));
  CHECK(count_of(ci, "class=\"anchor\"") == 1);
  CHECK(count_of(ci, "class=\"item\"") == 12);
}

TEST_CASE("runs are byte-identical") {
  const Workspace& w = workspace();
  for (const char* cmd : {"sctest --covariate level --ordinal level --nrep 3000",
                          "tree --covariates group,noise,colour --nrep 2000",
                          "mix --k 2 --restarts 2"}) {
    const std::string base = std::string(cmd) + " " + input() + " --output ";
    REQUIRE(run_binary(base + w.out("a").string()) == 0);
    REQUIRE(run_binary(base + w.out("b").string()) == 0);
    const std::string a = slurp(w.out("a.json")), b = slurp(w.out("b.json"));
    // Only the output path differs between the two configurations.
    CHECK(a.substr(a.find("\"result\"")) == b.substr(b.find("\"result\"")));
  }
}

TEST_CASE("seed comes from the command line or the environment") {
  const Workspace& w = workspace();
  const std::string base = "sctest --covariate noise --nrep 2000 " + input() + " --output ";
  REQUIRE(run_binary(base + w.out("s1").string() + " --seed 5") == 0);
  setenv("RASCHDIF_SEED", "5", 1);
  const int code = run_binary(base + w.out("s2").string());
  setenv("RASCHDIF_SEED", "oops", 1);
  const int bad = run_binary(base + w.out("s3").string());
  unsetenv("RASCHDIF_SEED");
  REQUIRE(code == 0);
  CHECK(bad == 1);
  const auto s1 = nlohmann::json::parse(slurp(w.out("s1.json")));
  const auto s2 = nlohmann::json::parse(slurp(w.out("s2.json")));
  CHECK(s1["config"]["seed"] == 5);
  CHECK(s1["result"] == s2["result"]);
}

TEST_CASE("exit codes") {
  const Workspace& w = workspace();
  std::string err;
  CHECK(run_inproc({"fit", "--bogus", "--input", w.csv.string()}, &err) == raschdif::cli::kUsage);
  CHECK(run_inproc({"fit"}) == raschdif::cli::kUsage);
  CHECK(run_inproc({"lrtest", "--input", w.csv.string()}) == raschdif::cli::kUsage);
  CHECK(run_inproc({"nonsense"}) == raschdif::cli::kUsage);
  CHECK(run_inproc({"mix", "--keep-extremes", "--input", w.csv.string()}) == raschdif::cli::kUsage);
  CHECK(run_inproc({"fit", "--input", (w.dir / "missing.csv").string()}, &err) == raschdif::cli::kFailure);
  CHECK(err.find("missing.csv") != std::string::npos);

  const fs::path bad = w.out("bad.csv");
  std::ofstream(bad) << "item1,item2,group\n1,0,1\n2,1,2\n";
  CHECK(run_inproc({"fit", "--input", bad.string()}) == raschdif::cli::kFailure);
  CHECK(run_inproc({"lrtest", "--input", w.csv.string(), "--group", "nope"}) == raschdif::cli::kFailure);
  CHECK(run_binary("fit --input " + bad.string()) == 2);
  CHECK(run_binary("fit --no-such-flag " + input()) == 1);
}
