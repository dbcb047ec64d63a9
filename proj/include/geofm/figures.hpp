#pragma once

#include <string>

#include "geofm/harness.hpp"

namespace geofm {

/// Grouped bar chart for one indicator kind: bars are CV means, whiskers one
/// SD, dots the test R². The value axis always includes zero.
std::string render_chart_svg(const RunReport& report, IndicatorKind kind);

/// Per-target winner table:
/// target,kind,best_method,best_cv_r2_mean,best_embedding_cv,best_baseline_cv,embedding_wins
std::string summary_table_csv(const RunReport& report);

/// Writes rate_targets.svg, count_targets.svg and summary.csv into `dir`.
/// Throws ContractError on a report without rows.
void render_report(const RunReport& report, const std::string& dir);

}  // namespace geofm
