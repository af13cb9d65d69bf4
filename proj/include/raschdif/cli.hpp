#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace raschdif::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

struct RunConfig {
  std::string command;
  std::string input;
  std::string output;
  std::string item_prefix = "item";
  std::uint64_t seed = 0;
  bool keep_extremes = false;
  bool svg = false;
  std::vector<std::string> subsets;  // "column=value"
  std::vector<std::string> ordinal;
  std::vector<std::string> nominal;

  std::string group;
  std::string anchor = "auto";
  double coverage = 0.95;
  int nsim = 100000;
  std::string gini_direction = "maximize";

  std::string covariate;
  std::string functional = "auto";
  int nrep = 100000;
  double trim = 0.1;

  std::vector<std::string> covariates;
  long minsize = 50;
  double alpha = 0.05;

  int k = 2;
  std::string scores = "meanvar";
  int restarts = 5;
  int maxiter = 500;
  double tol = 1e-8;
};

// Parses argv, runs one analysis and writes <output>.json (plus SVG figures
// with --svg). Diagnostics go to `err`, short progress lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace raschdif::cli
