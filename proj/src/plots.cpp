#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "sqg/analytics.hpp"

namespace sqg {

namespace {

constexpr std::array<const char*, kNumSensitive> kCategoryColors = {
    "#ffed6f", "#ccebc5", "#bc80bd", "#d9d9d9", "#fccde5", "#b3de69",
    "#fdb462", "#80b1d3", "#fb8072", "#bebada", "#ffffb3", "#8dd3c7"};

constexpr std::array<const char*, 7> kWeekdayColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                       "#9467bd", "#8c564b", "#e377c2"};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string header(int width, int height) {
  return fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
             "font-family=\"sans-serif\" font-size=\"10\">\n",
             width, height) +
         fmt("<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", width, height);
}

std::string legend(int x, int y) {
  std::string out;
  for (std::size_t c = 0; c < kNumSensitive; ++c) {
    const int yy = y + static_cast<int>(c) * 14;
    out += fmt("<rect x=\"%d\" y=\"%d\" width=\"10\" height=\"10\" fill=\"%s\" stroke=\"#555\"/>",
               x, yy, kCategoryColors[c]);
    out += fmt("<text x=\"%d\" y=\"%d\">%s</text>\n", x + 14, yy + 9,
               std::string(category_id(static_cast<Label>(c))).c_str());
  }
  return out;
}

}  // namespace

std::string volume_chart_svg(std::span<const DailyBucket> buckets) {
  const int plot_h = 240, left = 40, top = 20, bar_w = 8, gap = 2;
  const int width = left + static_cast<int>(buckets.size()) * (bar_w + gap) + 20;
  std::string out = header(width, plot_h + top + 40);
  if (buckets.empty()) return out + "</svg>\n";
  const auto ratios = daily_volume_ratio(buckets);
  out += fmt("<text x=\"%d\" y=\"14\">daily volume / max (light) and sensitive volume / max "
             "(solid); color = weekday</text>\n",
             left);
  double max_total = 0;
  for (const auto& b : buckets) max_total = std::max(max_total, static_cast<double>(b.total_queries));
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const int x = left + static_cast<int>(i) * (bar_w + gap);
    const double r = ratios[i].value.value_or(0.0);
    const double s = max_total > 0 ? static_cast<double>(buckets[i].sensitive_queries) / max_total : 0;
    const char* color = kWeekdayColors[static_cast<std::size_t>(buckets[i].weekday())];
    const double h = r * plot_h, hs = s * plot_h;
    out += fmt("<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\" "
               "fill-opacity=\"0.35\"/>",
               x, top + plot_h - h, bar_w, h, color);
    out += fmt("<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\"/>\n", x,
               top + plot_h - hs, bar_w, hs, color);
  }
  for (const double tick : {0.0, 0.5, 1.0}) {
    const double y = top + plot_h - tick * plot_h;
    out += fmt("<line x1=\"%d\" x2=\"%d\" y1=\"%.2f\" y2=\"%.2f\" stroke=\"#999\"/>"
               "<text x=\"4\" y=\"%.2f\">%.1f</text>\n",
               left - 4, width - 10, y, y, y + 3, tick);
  }
  return out + "</svg>\n";
}

std::string distribution_chart_svg(std::span<const DistributionSnapshot> snapshots,
                                   std::string_view title) {
  const int plot_h = 300, left = 40, top = 24, bar_w = 10, gap = 2;
  const int plot_w = static_cast<int>(snapshots.size()) * (bar_w + gap);
  const int width = left + plot_w + 200;
  std::string out = header(width, plot_h + top + 40);
  out += fmt("<text x=\"%d\" y=\"14\">%s</text>\n", left, std::string(title).c_str());
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const int x = left + static_cast<int>(i) * (bar_w + gap);
    double acc = 0;
    for (std::size_t c = 0; c < kNumSensitive; ++c) {
      const double h = snapshots[i].share_pct[c] / 100.0 * plot_h;
      if (h <= 0) continue;
      out += fmt("<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\"/>", x,
                 top + plot_h - acc - h, bar_w, h, kCategoryColors[c]);
      acc += h;
    }
    out += "\n";
  }
  out += legend(left + plot_w + 20, top);
  return out + "</svg>\n";
}

std::string correlation_heatmap_svg(const CorrelationMatrix& matrix) {
  const int cell = 28, left = 160, top = 20;
  const int n = static_cast<int>(kNumSensitive);
  std::string out = header(left + n * cell + 20, top + n * cell + 160);
  for (int i = 0; i < n; ++i) {
    out += fmt("<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>\n", left - 4,
               top + i * cell + cell / 2 + 3,
               std::string(category_id(static_cast<Label>(i))).c_str());
    out += fmt("<text transform=\"translate(%d,%d) rotate(60)\">%s</text>\n",
               left + i * cell + cell / 2, top + n * cell + 6,
               std::string(category_id(static_cast<Label>(i))).c_str());
    for (int j = 0; j < n; ++j) {
      const auto v = matrix.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      std::string color = "#cccccc";
      if (v) {
        // Blue (-1) through white (0) to red (+1).
        const double t = std::clamp(*v, -1.0, 1.0);
        const int fade = static_cast<int>(std::lround(255 * (1 - std::abs(t))));
        color = t >= 0 ? fmt("#ff%02x%02x", fade, fade) : fmt("#%02x%02xff", fade, fade);
      }
      out += fmt("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>", left + j * cell,
                 top + i * cell, cell, cell, color.c_str());
      if (v) {
        out += fmt("<text x=\"%d\" y=\"%d\" font-size=\"8\" text-anchor=\"middle\">%.2f</text>",
                   left + j * cell + cell / 2, top + i * cell + cell / 2 + 3, *v);
      }
    }
    out += "\n";
  }
  return out + "</svg>\n";
}

}  // namespace sqg
