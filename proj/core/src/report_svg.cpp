#include "crowdrank/report_svg.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "crowdrank/errors.hpp"

namespace crowdrank {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

const char* method_color(const std::string& method) {
  if (method == "neural") return "#e08214";      // orange
  if (method == "baseline") return "#fdd835";    // yellow
  if (method == "unweighted") return "#7f7f7f";  // grey
  return "#4c72b0";
}

}  // namespace

std::string render_summary_svg(std::span<const SummaryRow> rows) {
  if (rows.empty()) throw DataError("render_summary_svg: no summary rows");

  std::set<double> cutoff_set;
  std::set<std::string> method_set;
  std::map<std::pair<double, std::string>, double> value;
  double max_mmdb = 0.0;
  for (const auto& row : rows) {
    cutoff_set.insert(row.cutoff);
    method_set.insert(row.method);
    value[{row.cutoff, row.method}] = row.mmdb;
    max_mmdb = std::max(max_mmdb, row.mmdb);
  }
  if (max_mmdb <= 0.0) max_mmdb = 1.0;
  const std::vector<double> cutoffs(cutoff_set.begin(), cutoff_set.end());
  const std::vector<std::string> methods(method_set.begin(), method_set.end());

  const double margin_left = 60, margin_bottom = 50, margin_top = 40, margin_right = 20;
  const double plot_w = std::max<double>(360.0, 90.0 * cutoffs.size());
  const double plot_h = 280;
  const double width = margin_left + plot_w + margin_right;
  const double height = margin_top + plot_h + margin_bottom;
  const double group_w = plot_w / cutoffs.size();
  const double bar_w = group_w * 0.8 / methods.size();

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << "MMDB by ranking cutoff</text>\n";

  // y axis with 5 gridlines
  for (int i = 0; i <= 5; ++i) {
    const double v = max_mmdb * i / 5.0;
    const double y = margin_top + plot_h - plot_h * i / 5.0;
    svg << "<line x1=\"" << margin_left << "\" y1=\"" << y << "\" x2=\"" << margin_left + plot_w
        << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << margin_left - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }

  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    const double group_x = margin_left + group_w * c + group_w * 0.1;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto it = value.find({cutoffs[c], methods[m]});
      if (it == value.end()) continue;
      const double h = plot_h * it->second / max_mmdb;
      const double x = group_x + bar_w * m;
      const double y = margin_top + plot_h - h;
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.92
          << "\" height=\"" << h << "\" fill=\"" << method_color(methods[m]) << "\">"
          << "<title>" << methods[m] << " @ " << fmt(cutoffs[c]) << "%: " << fmt(it->second)
          << "</title></rect>\n";
    }
    svg << "<text x=\"" << group_x + group_w * 0.4 << "\" y=\"" << margin_top + plot_h + 18
        << "\" text-anchor=\"middle\">" << fmt(cutoffs[c]) << "%</text>\n";
  }
  svg << "<text x=\"" << margin_left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">top percentile of ranked forecasters</text>\n";

  double legend_x = margin_left;
  for (const auto& method : methods) {
    svg << "<rect x=\"" << legend_x << "\" y=\"" << margin_top - 14 << "\" width=\"12\" height=\"12\" fill=\""
        << method_color(method) << "\"/>\n";
    svg << "<text x=\"" << legend_x + 16 << "\" y=\"" << margin_top - 4 << "\">" << method
        << "</text>\n";
    legend_x += 16.0 + 8.0 * method.size() + 24.0;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace crowdrank
