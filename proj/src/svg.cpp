#include "raschdif/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace raschdif::svg {

namespace {

const char* const kPalette[] = {"#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Canvas {
 public:
  Canvas(double width, double height) : width_(width), height_(height) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double w = 1.0,
            const std::string& extra = "") {
    os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w) << "\"" << extra << "/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
    os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill, const std::string& cls = "") {
    os_ << "<circle" << (cls.empty() ? "" : " class=\"" + cls + "\"") << " cx=\"" << num(x) << "\" cy=\"" << num(y)
        << "\" r=\"" << num(r) << "\" fill=\"" << fill << "\"/>\n";
  }
  void ellipse(double x, double y, double rx, double ry) {
    os_ << "<ellipse cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" rx=\"" << num(rx) << "\" ry=\"" << num(ry)
        << "\" fill=\"white\" stroke=\"black\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << num(pts[i].first) << "," << num(pts[i].second);
    os_ << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", double size = 11,
            double rotate = 0) {
    os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"" << num(size)
        << "\" text-anchor=\"" << anchor << "\"";
    if (rotate != 0) os_ << " transform=\"rotate(" << num(rotate) << " " << num(x) << " " << num(y) << ")\"";
    os_ << ">" << escape(s) << "</text>\n";
  }
  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << os_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_, height_;
  std::ostringstream os_;
};

// Linear map of [lo, hi] onto pixel range [p0, p1].
struct Scale {
  double lo, hi, p0, p1;
  double operator()(double v) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.08 * (hi - lo);
  return {std::floor(lo - pad), std::ceil(hi + pad)};
}

void y_axis(Canvas& c, const Scale& y, double x, double x_end, const std::string& title) {
  c.line(x, y.p0, x, y.p1, "black");
  const double step = (y.hi - y.lo) > 12 ? 2.0 : 1.0;
  for (double v = std::ceil(y.lo / step) * step; v <= y.hi + 1e-9; v += step) {
    c.line(x - 4, y(v), x, y(v), "black");
    c.line(x, y(v), x_end, y(v), "#e0e0e0");
    c.text(x - 6, y(v) + 4, num(v).substr(0, num(v).find('.')), "end", 10);
  }
  c.text(x - 34, (y.p0 + y.p1) / 2, title, "middle", 11, -90);
}

void item_axis(Canvas& c, const std::vector<std::string>& labels, const Scale& x, double y) {
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const double px = x(static_cast<double>(j));
    c.line(px, y, px, y + 4, "black");
    c.text(px + 3, y + 12, labels[j], "end", 10, -45);
  }
}

}  // namespace

std::string item_frequency_bars(const std::vector<std::string>& labels, const Eigen::VectorXd& proportions) {
  const auto m = static_cast<double>(labels.size());
  const double left = 60, top = 30, plot_w = 40 * m, plot_h = 220;
  Canvas c(left + plot_w + 20, top + plot_h + 90);
  c.text(left + plot_w / 2, 18, "Relative frequency of items solved");
  const Scale y{0.0, 1.0, top + plot_h, top};
  y_axis(c, y, left, left + plot_w, "proportion");
  for (Index j = 0; j < proportions.size(); ++j) {
    const double x = left + 40 * static_cast<double>(j) + 6;
    c.rect(x, y(1.0), 28, y(proportions(j)) - y(1.0), "#d9d9d9");
    c.rect(x, y(proportions(j)), 28, y(0.0) - y(proportions(j)), "#525252");
  }
  item_axis(c, labels, Scale{0, 1, left + 20, left + 60}, top + plot_h);
  return c.str();
}

std::string profile_plot(const std::vector<std::string>& labels, const std::vector<Series>& series,
                         const std::string& title) {
  const auto m = static_cast<Index>(labels.size());
  double lo = 0, hi = 0;
  for (const auto& s : series) {
    lo = std::min(lo, s.values.minCoeff());
    hi = std::max(hi, s.values.maxCoeff());
  }
  const auto [ylo, yhi] = padded_range(lo, hi);
  const double left = 60, top = 30, plot_w = std::max<double>(40.0 * static_cast<double>(m), 200), plot_h = 240;
  Canvas c(left + plot_w + 140, top + plot_h + 90);
  c.text(left + plot_w / 2, 18, title);
  const Scale y{ylo, yhi, top + plot_h, top};
  const Scale x{0, static_cast<double>(std::max<Index>(m - 1, 1)), left + 20, left + plot_w - 20};
  y_axis(c, y, left, left + plot_w, "item difficulty");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string color = series[s].color.empty() ? kPalette[s % 6] : series[s].color;
    std::vector<std::pair<double, double>> pts;
    for (Index j = 0; j < m; ++j) pts.emplace_back(x(static_cast<double>(j)), y(series[s].values(j)));
    c.polyline(pts, color);
    for (const auto& [px, py] : pts) c.circle(px, py, 3.5, color, "item");
    c.rect(left + plot_w + 20, top + 16 * static_cast<double>(s), 10, 10, color);
    c.text(left + plot_w + 36, top + 9 + 16 * static_cast<double>(s), series[s].name, "start", 10);
  }
  item_axis(c, labels, x, top + plot_h);
  return c.str();
}

std::string person_item_plot(const std::vector<std::string>& labels, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& theta, const Eigen::VectorXd& score_counts) {
  const double lo = std::min(beta.minCoeff(), theta.minCoeff());
  const double hi = std::max(beta.maxCoeff(), theta.maxCoeff());
  const auto [xlo, xhi] = padded_range(lo, hi);
  const double left = 90, right = 30, width = 560, person_h = 120, item_gap = 16;
  const auto m = static_cast<double>(labels.size());
  Canvas c(left + width + right, 40 + person_h + 30 + item_gap * m + 40);
  c.text(left + width / 2, 18, "Person-item plot");
  const Scale x{xlo, xhi, left, left + width};
  const double base = 30 + person_h;
  double max_count = 0;
  for (Index r = 1; r <= theta.size(); ++r) max_count = std::max(max_count, score_counts(r));
  for (Index r = 1; r <= theta.size(); ++r) {
    const double h = max_count > 0 ? score_counts(r) / max_count * (person_h - 10) : 0.0;
    c.rect(x(theta(r - 1)) - 5, base - h, 10, h, "#969696");
  }
  c.text(left - 8, base - person_h / 2, "persons", "end");
  c.line(left, base, left + width, base, "black");
  for (Index j = 0; j < beta.size(); ++j) {
    const double py = base + 20 + item_gap * static_cast<double>(j);
    c.line(left, py, left + width, py, "#eeeeee");
    c.circle(x(beta(j)), py, 3.5, "black", "item");
    c.text(left - 8, py + 4, labels[static_cast<std::size_t>(j)], "end", 10);
  }
  const double axis_y = base + 20 + item_gap * m;
  c.line(left, axis_y, left + width, axis_y, "black");
  for (double v = xlo; v <= xhi + 1e-9; v += 1.0) {
    c.line(x(v), axis_y, x(v), axis_y + 4, "black");
    c.text(x(v), axis_y + 16, num(v).substr(0, num(v).find('.')), "middle", 10);
  }
  c.text(left + width / 2, axis_y + 32, "latent trait (ability / difficulty)");
  return c.str();
}

std::string ci_plot(const AnchoredWaldReport& report) {
  const auto m = static_cast<Index>(report.item_labels.size());
  const auto [ylo, yhi] = padded_range(report.ci_lower.minCoeff(), report.ci_upper.maxCoeff());
  const double left = 60, top = 30, plot_w = std::max<double>(40.0 * static_cast<double>(m), 200), plot_h = 240;
  Canvas c(left + plot_w + 20, top + plot_h + 90);
  c.text(left + plot_w / 2, 18,
         "Item parameter differences (" + report.reference_label + " - " + report.focal_label + "), anchor " +
             report.item_labels[static_cast<std::size_t>(report.anchor)]);
  const Scale y{ylo, yhi, top + plot_h, top};
  const Scale x{0, static_cast<double>(m - 1), left + 20, left + plot_w - 20};
  y_axis(c, y, left, left + plot_w, "difference");
  c.line(left, y(0), left + plot_w, y(0), "#636363", 1.0, " stroke-dasharray=\"4 3\"");
  for (Index j = 0; j < m; ++j) {
    const double px = x(static_cast<double>(j));
    const bool sig = report.significant[static_cast<std::size_t>(j)];
    const std::string color = sig ? "#d7301f" : "black";
    c.line(px, y(report.ci_lower(j)), px, y(report.ci_upper(j)), color, 1.5);
    c.line(px - 5, y(report.ci_lower(j)), px + 5, y(report.ci_lower(j)), color);
    c.line(px - 5, y(report.ci_upper(j)), px + 5, y(report.ci_upper(j)), color);
    c.circle(px, y(report.diff(j)), 3.5, color, j == report.anchor ? "anchor" : "item");
  }
  item_axis(c, report.item_labels, x, top + plot_h);
  return c.str();
}

std::string statistic_sequence(const InstabilityResult& result, const std::string& covariate) {
  const auto k = static_cast<Index>(result.per_threshold.size());
  double hi = 0;
  for (const auto& t : result.per_threshold) hi = std::max(hi, t.statistic);
  if (result.critical_95) hi = std::max(hi, *result.critical_95);
  const auto [ylo, yhi] = padded_range(0.0, hi);
  const double left = 60, top = 30, plot_w = std::max<double>(30.0 * static_cast<double>(k), 240), plot_h = 220;
  Canvas c(left + plot_w + 20, top + plot_h + 60);
  c.text(left + plot_w / 2, 18, "Score statistics along " + covariate);
  const Scale y{std::max(0.0, ylo), yhi, top + plot_h, top};
  const Scale x{0, static_cast<double>(std::max<Index>(k - 1, 1)), left + 15, left + plot_w - 15};
  y_axis(c, y, left, left + plot_w, "LM statistic");
  std::vector<std::pair<double, double>> pts;
  for (Index i = 0; i < k; ++i)
    pts.emplace_back(x(static_cast<double>(i)), y(result.per_threshold[static_cast<std::size_t>(i)].statistic));
  c.polyline(pts, "black");
  for (Index i = 0; i < k; ++i) {
    c.circle(pts[static_cast<std::size_t>(i)].first, pts[static_cast<std::size_t>(i)].second, 3, "black", "stat");
    c.text(x(static_cast<double>(i)), top + plot_h + 16, result.per_threshold[static_cast<std::size_t>(i)].label,
           "middle", 10);
  }
  if (result.critical_95) c.line(left, y(*result.critical_95), left + plot_w, y(*result.critical_95), "#e41a1c", 1.5);
  c.text(left + plot_w / 2, top + plot_h + 36, covariate + " (left group ends at)");
  return c.str();
}

std::string tree_diagram(const TreeNode& root) {
  const auto leaf_list = leaves(root);
  const double leaf_w = 220, leaf_h = 150, level_h = 90;
  int depth = 0;
  std::function<void(const TreeNode&, int)> measure = [&](const TreeNode& n, int d) {
    depth = std::max(depth, d);
    for (const auto& ch : n.children) measure(ch, d + 1);
  };
  measure(root, 0);
  const double width = leaf_w * static_cast<double>(leaf_list.size()) + 20;
  Canvas c(width, 40 + level_h * depth + leaf_h + 40);

  std::size_t next_leaf = 0;
  // Returns the x-centre of the node after drawing its subtree.
  std::function<double(const TreeNode&, int)> draw = [&](const TreeNode& n, int d) -> double {
    const double top = 30 + level_h * d;
    if (n.is_leaf()) {
      const double x0 = 10 + leaf_w * static_cast<double>(next_leaf++);
      const double y0 = 30 + level_h * depth;
      c.rect(x0 + 5, y0, leaf_w - 10, leaf_h, "white", "black");
      c.text(x0 + leaf_w / 2, y0 + 14, "Node " + std::to_string(n.id) + " (n = " + std::to_string(n.n) + ")", "middle", 10);
      const Eigen::VectorXd beta = itempar(n.fit).beta;
      const double lo = std::min(-3.0, beta.minCoeff()), hi = std::max(3.0, beta.maxCoeff());
      const Scale y{lo, hi, y0 + leaf_h - 10, y0 + 24};
      const Scale x{0, static_cast<double>(beta.size() - 1), x0 + 20, x0 + leaf_w - 20};
      c.line(x0 + 15, y(0), x0 + leaf_w - 15, y(0), "#bdbdbd");
      std::vector<std::pair<double, double>> pts;
      for (Index j = 0; j < beta.size(); ++j) pts.emplace_back(x(static_cast<double>(j)), y(beta(j)));
      c.polyline(pts, "#525252");
      for (const auto& [px, py] : pts) c.circle(px, py, 2.5, "#525252", "item");
      return x0 + leaf_w / 2;
    }
    const double xl = draw(n.children[0], d + 1);
    const double xr = draw(n.children[1], d + 1);
    const double xc = (xl + xr) / 2;
    const double child_top_l = n.children[0].is_leaf() ? 30 + level_h * depth : 30 + level_h * (d + 1) - 16;
    const double child_top_r = n.children[1].is_leaf() ? 30 + level_h * depth : 30 + level_h * (d + 1) - 16;
    c.line(xc, top + 16, xl, child_top_l, "black");
    c.line(xc, top + 16, xr, child_top_r, "black");
    c.text((xc + xl) / 2 - 4, (top + 16 + child_top_l) / 2, n.split->describe(true), "end", 10);
    c.text((xc + xr) / 2 + 4, (top + 16 + child_top_r) / 2, n.split->describe(false), "start", 10);
    c.ellipse(xc, top, 62, 16);
    c.text(xc, top - 2, std::to_string(n.id) + ": " + n.split->covariate, "middle", 10);
    double p = 1.0;
    for (const auto& t : n.tests)
      if (t.covariate == n.split->covariate) p = t.p_adjusted;
    char buf[32];
    std::snprintf(buf, sizeof buf, "p = %.3g", p);
    c.text(xc, top + 10, buf, "middle", 9);
    return xc;
  };
  draw(root, 0);
  return c.str();
}

std::string mixture_profiles(const std::vector<std::string>& labels, const MixtureFit& fit) {
  std::vector<Series> series;
  for (std::size_t c = 0; c < fit.components.size(); ++c)
    series.push_back({"Comp. " + std::to_string(c + 1) + " (n = " + std::to_string(fit.cluster_sizes[c]) + ")",
                      fit.components[c].beta, ""});
  return profile_plot(labels, series, "Rasch mixture item profiles");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace raschdif::svg
