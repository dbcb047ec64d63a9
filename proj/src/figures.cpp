#include "geofm/figures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "geofm/errors.hpp"
#include "geofm/text.hpp"

namespace geofm {

namespace {

constexpr const char* kColors[] = {"#8c8c8c", "#4d4d4d", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd"};

const char* color_of(Method m) { return kColors[static_cast<int>(m)]; }

std::string fmt(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

std::string escape(const std::string& in) {
  std::string out;
  for (char c : in) {
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

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace

std::string render_chart_svg(const RunReport& report, IndicatorKind kind) {
  std::vector<std::string> targets;
  std::vector<const MethodResult*> rows;
  for (const auto& r : report.results) {
    if (r.kind != kind) continue;
    rows.push_back(&r);
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end())
      targets.push_back(r.target);
  }

  double lo = 0.0, hi = 1.0;
  for (const auto* r : rows) {
    const double sd = finite_or(r->cv_r2_sd, 0.0);
    for (double v : {r->cv_r2_mean - sd, r->cv_r2_mean + sd, r->test_r2}) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  lo = std::floor(lo * 10.0) / 10.0;
  hi = std::ceil(hi * 10.0) / 10.0;

  const double bar_w = 14.0, group_gap = 24.0;
  const double left = 60.0, top = 40.0, plot_h = 300.0, bottom = 140.0;
  const double n_methods = static_cast<double>(std::size(kAllMethods));
  const double group_w = n_methods * bar_w + group_gap;
  const double plot_w = std::max(200.0, static_cast<double>(targets.size()) * group_w);
  const double width = left + plot_w + 160.0;
  const double height = top + plot_h + bottom;
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  std::ostringstream svg;
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << fmt(width) << R"(" height=")"
      << fmt(height) << R"(" font-family="sans-serif" font-size="11">)" << '\n';
  svg << R"(<text x=")" << fmt(left) << R"(" y="20" font-size="14">)"
      << (kind == IndicatorKind::kRate ? "Rate targets" : "Count targets")
      << ": 5-fold CV R2 (bars), +/- 1 SD (whiskers), test R2 (dots)</text>\n";

  for (int i = 0; i <= static_cast<int>(std::lround((hi - lo) * 10.0)); ++i) {
    const double v = lo + 0.1 * i;
    const double y = y_of(v);
    svg << R"(<line class="grid" x1=")" << fmt(left) << R"(" x2=")" << fmt(left + plot_w)
        << R"(" y1=")" << fmt(y) << R"(" y2=")" << fmt(y) << R"(" stroke="#eeeeee"/>)" << '\n';
    svg << R"(<text x=")" << fmt(left - 6) << R"(" y=")" << fmt(y + 4)
        << R"(" text-anchor="end">)" << fmt(v) << "</text>\n";
  }
  const double y0 = y_of(0.0);
  svg << R"(<line class="zero-axis" x1=")" << fmt(left) << R"(" x2=")" << fmt(left + plot_w)
      << R"(" y1=")" << fmt(y0) << R"(" y2=")" << fmt(y0) << R"(" stroke="black"/>)" << '\n';

  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double gx = left + static_cast<double>(t) * group_w + group_gap / 2.0;
    for (const auto* r : rows) {
      if (r->target != targets[t]) continue;
      const double x = gx + static_cast<int>(r->method) * bar_w;
      const double mean = finite_or(r->cv_r2_mean, 0.0);
      const double y_top = std::min(y_of(mean), y0);
      const double h = std::abs(y_of(mean) - y0);
      svg << R"(<rect class="bar" data-target=")" << escape(r->target) << R"(" data-method=")"
          << to_string(r->method) << R"(" x=")" << fmt(x) << R"(" y=")" << fmt(y_top)
          << R"(" width=")" << fmt(bar_w - 2) << R"(" height=")" << fmt(h) << R"(" fill=")"
          << color_of(r->method) << R"("/>)" << '\n';
      if (std::isfinite(r->cv_r2_mean) && std::isfinite(r->cv_r2_sd)) {
        const double cx = x + (bar_w - 2) / 2.0;
        svg << R"(<line class="whisker" x1=")" << fmt(cx) << R"(" x2=")" << fmt(cx) << R"(" y1=")"
            << fmt(y_of(r->cv_r2_mean - r->cv_r2_sd)) << R"(" y2=")"
            << fmt(y_of(r->cv_r2_mean + r->cv_r2_sd)) << R"(" stroke="black"/>)" << '\n';
      }
      if (std::isfinite(r->test_r2)) {
        svg << R"(<circle class="test-dot" cx=")" << fmt(x + (bar_w - 2) / 2.0) << R"(" cy=")"
            << fmt(y_of(r->test_r2)) << R"(" r="3" fill="white" stroke="black"/>)" << '\n';
      }
    }
    const double lx = gx + n_methods * bar_w / 2.0;
    const double ly = top + plot_h + 12.0;
    svg << R"(<text x=")" << fmt(lx) << R"(" y=")" << fmt(ly) << "\" transform=\"rotate(45 "
        << fmt(lx) << ' ' << fmt(ly) << ")\">" << escape(targets[t]) << "</text>\n";
  }

  double ly = top;
  for (Method m : kAllMethods) {
    svg << R"(<rect x=")" << fmt(left + plot_w + 20) << R"(" y=")" << fmt(ly) << R"(" width="10" height="10" fill=")"
        << color_of(m) << R"("/>)" << '\n';
    svg << R"(<text x=")" << fmt(left + plot_w + 36) << R"(" y=")" << fmt(ly + 9) << R"(">)"
        << to_string(m) << "</text>\n";
    ly += 16.0;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string summary_table_csv(const RunReport& report) {
  std::vector<std::string> targets;
  for (const auto& r : report.results)
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end())
      targets.push_back(r.target);

  std::ostringstream out;
  out << "target,kind,best_method,best_cv_r2_mean,best_embedding_cv,best_baseline_cv,"
         "embedding_wins\n";
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (const auto& t : targets) {
    double best = kNaN, best_emb = kNaN, best_base = kNaN;
    const MethodResult* winner = nullptr;
    IndicatorKind kind = IndicatorKind::kRate;
    for (const auto& r : report.results) {
      if (r.target != t) continue;
      kind = r.kind;
      if (!std::isfinite(r.cv_r2_mean)) continue;
      double& slot = is_embedding_method(r.method) ? best_emb : best_base;
      if (std::isnan(slot) || r.cv_r2_mean > slot) slot = r.cv_r2_mean;
      if (std::isnan(best) || r.cv_r2_mean > best) {
        best = r.cv_r2_mean;
        winner = &r;
      }
    }
    const auto cell = [](double v) { return std::isnan(v) ? std::string() : text::format_double(v); };
    out << t << ',' << to_string(kind) << ',' << (winner ? to_string(winner->method) : "") << ','
        << cell(best) << ',' << cell(best_emb) << ',' << cell(best_base) << ','
        << (std::isfinite(best_emb) && std::isfinite(best_base)
                ? (best_emb > best_base ? "true" : "false")
                : "")
        << '\n';
  }
  return out.str();
}

void render_report(const RunReport& report, const std::string& dir) {
  if (report.results.empty()) throw ContractError("report has no result rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);
  text::write_file((root / "rate_targets.svg").string(), render_chart_svg(report, IndicatorKind::kRate));
  text::write_file((root / "count_targets.svg").string(),
                   render_chart_svg(report, IndicatorKind::kCount));
  text::write_file((root / "summary.csv").string(), summary_table_csv(report));
}

}  // namespace geofm
