#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "io_util.hpp"
#include "qabk/errors.hpp"
#include "qabk/harness.hpp"

namespace qabk {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (lo == hi) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.5;
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, bool log_y, const ChartLabels& labels) {
  if (series.empty()) throw DomainError("chart needs at least one series");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) {
      throw DomainError("series '" + s.label + "' is empty or has mismatched lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        throw DomainError("series '" + s.label + "' has a non-finite value");
      }
      if (log_y && s.y[i] <= 0.0) {
        throw DomainError("series '" + s.label + "' has a non-positive value on a log axis");
      }
      const double y = log_y ? std::log10(s.y[i]) : s.y[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  const Range xr = padded(xmin, xmax);
  const Range yr = padded(ymin, ymax);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * plot_h; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  out += "<rect x=\"" + fixed2(kLeft) + "\" y=\"" + fixed2(kTop) + "\" width=\"" + fixed2(plot_w) +
         "\" height=\"" + fixed2(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    const std::string gx = fixed2(px(xv));
    const std::string gy = fixed2(py(yv));
    out += "<line x1=\"" + gx + "\" y1=\"" + fixed2(kTop + plot_h) + "\" x2=\"" + gx + "\" y2=\"" +
           fixed2(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + gx + "\" y=\"" + fixed2(kTop + plot_h + 20) +
           "\" text-anchor=\"middle\">" + tick_label(xv) + "</text>\n";
    out += "<line x1=\"" + fixed2(kLeft - 5) + "\" y1=\"" + gy + "\" x2=\"" + fixed2(kLeft) +
           "\" y2=\"" + gy + "\" stroke=\"black\"/>\n";
    const std::string ylabel = log_y ? "1e" + tick_label(yv) : tick_label(yv);
    out += "<text x=\"" + fixed2(kLeft - 8) + "\" y=\"" + gy +
           "\" text-anchor=\"end\" dominant-baseline=\"middle\">" + escape(ylabel) + "</text>\n";
  }

  if (!labels.title.empty()) {
    out += "<text x=\"" + fixed2(kLeft + plot_w / 2) + "\" y=\"30\" text-anchor=\"middle\" "
           "font-size=\"16\">" + escape(labels.title) + "</text>\n";
  }
  if (!labels.x_label.empty()) {
    out += "<text x=\"" + fixed2(kLeft + plot_w / 2) + "\" y=\"" + fixed2(kHeight - 15) +
           "\" text-anchor=\"middle\">" + escape(labels.x_label) + "</text>\n";
  }
  if (!labels.y_label.empty()) {
    out += "<text x=\"20\" y=\"" + fixed2(kTop + plot_h / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " + fixed2(kTop + plot_h / 2) +
           ")\">" + escape(labels.y_label) + "</text>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    out += "<polyline fill=\"none\" stroke=\"";
    out += colour;
    out += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out += ' ';
      const double y = log_y ? std::log10(s.y[i]) : s.y[i];
      out += fixed2(px(s.x[i])) + "," + fixed2(py(y));
    }
    out += "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    const double lx = kWidth - kRight + 15;
    out += "<line x1=\"" + fixed2(lx) + "\" y1=\"" + fixed2(ly) + "\" x2=\"" + fixed2(lx + 20) +
           "\" y2=\"" + fixed2(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fixed2(lx + 26) + "\" y=\"" + fixed2(ly) +
           "\" dominant-baseline=\"middle\">" + escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::filesystem::path emit_svg(const std::vector<Series>& series, bool log_y,
                               const std::filesystem::path& path, const ChartLabels& labels) {
  detail::write_text(path, render_svg(series, log_y, labels));
  return path;
}

}  // namespace qabk
