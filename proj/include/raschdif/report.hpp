#pragma once

#include <string>

#include <json.hpp>

#include "raschdif/diftest.hpp"
#include "raschdif/raschmix.hpp"
#include "raschdif/raschtree.hpp"

namespace raschdif::report {

using Json = nlohmann::ordered_json;

// Every floating-point value rounded to 6 significant digits; non-finite
// values become null. Key order is insertion order.
std::string dump(const Json& j);

Json vector_json(const Eigen::VectorXd& v);

Json fit_json(const RaschFit& fit);
Json global_test_json(const GlobalDifTest& t);
Json anchored_wald_json(const AnchoredWaldReport& r);
Json instability_json(const InstabilityResult& r);
Json tree_json(const TreeNode& node);
Json mixture_json(const MixtureFit& fit, const std::vector<std::string>& item_labels, Index n);

}  // namespace raschdif::report
