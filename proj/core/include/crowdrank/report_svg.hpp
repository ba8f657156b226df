#pragma once

#include <span>
#include <string>

namespace crowdrank {

struct SummaryRow {
  double cutoff = 100.0;
  std::string method;
  double mmdb = 0.0;
};

// Grouped bar chart of MMDB by ranking cutoff, one bar per method.
std::string render_summary_svg(std::span<const SummaryRow> rows);

}  // namespace crowdrank
