#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "raschdif/diftest.hpp"
#include "raschdif/raschmix.hpp"
#include "raschdif/raschtree.hpp"

// Self-contained SVG figures. Output is a pure function of the input, with
// coordinates printed at fixed precision so identical inputs give identical bytes.
namespace raschdif::svg {

struct Series {
  std::string name;
  Eigen::VectorXd values;
  std::string color;
};

// Stacked bars of solved (dark) and not solved (light) proportions per item.
std::string item_frequency_bars(const std::vector<std::string>& labels, const Eigen::VectorXd& proportions);

// Item difficulties connected by lines, one polyline per series.
std::string profile_plot(const std::vector<std::string>& labels, const std::vector<Series>& series,
                         const std::string& title);

// Abilities (histogram over raw-score groups) above item difficulties on a shared axis.
std::string person_item_plot(const std::vector<std::string>& labels, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& theta, const Eigen::VectorXd& score_counts);

std::string ci_plot(const AnchoredWaldReport& report);

std::string statistic_sequence(const InstabilityResult& result, const std::string& covariate);

std::string tree_diagram(const TreeNode& root);

std::string mixture_profiles(const std::vector<std::string>& labels, const MixtureFit& fit);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace raschdif::svg
