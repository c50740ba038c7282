#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::io {

/// Minimal static line-chart writer producing self-contained SVG files.
/// Deterministic output for deterministic inputs.
class SvgLinePlot {
 public:
  SvgLinePlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& label, const std::vector<double>& x,
                  const std::vector<double>& y) {
    RESDYN_REQUIRE(x.size() == y.size() && !x.empty(), "svg: series x/y size mismatch or empty");
    series_.push_back({label, palette(series_.size()), x, y});
  }

  /// Vertical marker line (e.g. an event time).
  void add_event(double x, const std::string& label) { events_.push_back({x, label}); }

  void write(const std::string& path) const {
    RESDYN_REQUIRE(!series_.empty(), "svg: no series to plot");
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        x_lo = std::min(x_lo, s.x[i]);
        x_hi = std::max(x_hi, s.x[i]);
        y_lo = std::min(y_lo, s.y[i]);
        y_hi = std::max(y_hi, s.y[i]);
      }
    }
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    if (y_hi - y_lo < 1e-12) {
      y_lo -= 0.5;
      y_hi += 0.5;
    } else {
      const double pad = 0.05 * (y_hi - y_lo);
      y_lo -= pad;
      y_hi += pad;
    }

    std::ofstream out(path, std::ios::binary);
    RESDYN_REQUIRE(out.good(), "svg: cannot open " << path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\""
        << " font-size=\"15\">" << escape(title_) << "</text>\n";

    const double px0 = kMarginL, px1 = kW - kMarginR;
    const double py0 = kH - kMarginB, py1 = kMarginT;  // y axis points up
    auto sx = [&](double x) { return px0 + (x - x_lo) / (x_hi - x_lo) * (px1 - px0); };
    auto sy = [&](double y) { return py0 + (y - y_lo) / (y_hi - y_lo) * (py1 - py0); };

    out << "<rect x=\"" << px0 << "\" y=\"" << py1 << "\" width=\"" << px1 - px0 << "\" height=\""
        << py0 - py1 << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double xt : ticks(x_lo, x_hi)) {
      out << "<line x1=\"" << fmt(sx(xt)) << "\" y1=\"" << py0 << "\" x2=\"" << fmt(sx(xt))
          << "\" y2=\"" << py0 + 5 << "\" stroke=\"#444\"/>\n"
          << "<text x=\"" << fmt(sx(xt)) << "\" y=\"" << py0 + 20
          << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << fmt(xt)
          << "</text>\n";
    }
    for (double yt : ticks(y_lo, y_hi)) {
      out << "<line x1=\"" << px0 - 5 << "\" y1=\"" << fmt(sy(yt)) << "\" x2=\"" << px0
          << "\" y2=\"" << fmt(sy(yt)) << "\" stroke=\"#444\"/>\n"
          << "<line x1=\"" << px0 << "\" y1=\"" << fmt(sy(yt)) << "\" x2=\"" << px1 << "\" y2=\""
          << fmt(sy(yt)) << "\" stroke=\"#eee\"/>\n"
          << "<text x=\"" << px0 - 9 << "\" y=\"" << fmt(sy(yt) + 4)
          << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt(yt)
          << "</text>\n";
    }
    out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kH - 8
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">"
        << escape(x_label_) << "</text>\n"
        << "<text x=\"16\" y=\"" << (py0 + py1) / 2
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\""
        << " transform=\"rotate(-90 16 " << (py0 + py1) / 2 << ")\">" << escape(y_label_)
        << "</text>\n";

    for (const auto& ev : events_) {
      if (ev.x < x_lo || ev.x > x_hi) continue;
      out << "<line x1=\"" << fmt(sx(ev.x)) << "\" y1=\"" << py1 << "\" x2=\"" << fmt(sx(ev.x))
          << "\" y2=\"" << py0 << "\" stroke=\"#b30000\" stroke-dasharray=\"4 3\"/>\n"
          << "<text x=\"" << fmt(sx(ev.x) + 4) << "\" y=\"" << py1 + 14
          << "\" font-family=\"monospace\" font-size=\"10\" fill=\"#b30000\">" << escape(ev.label)
          << "</text>\n";
    }

    for (const auto& s : series_) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.4\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) out << ' ';
        out << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i]));
      }
      out << "\"/>\n";
    }

    double ly = py1 + 14;
    for (const auto& s : series_) {
      out << "<line x1=\"" << px1 - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << px1 - 126
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << px1 - 120 << "\" y=\"" << ly
          << "\" font-family=\"monospace\" font-size=\"11\">" << escape(s.label) << "</text>\n";
      ly += 16;
    }
    out << "</svg>\n";
    RESDYN_REQUIRE(out.good(), "svg: write failure on " << path);
  }

 private:
  struct Series {
    std::string label, color;
    std::vector<double> x, y;
  };
  struct Event {
    double x;
    std::string label;
  };

  static std::string palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % 8];
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&')
        out += "&amp;";
      else if (c == '<')
        out += "&lt;";
      else if (c == '>')
        out += "&gt;";
      else
        out += c;
    }
    return out;
  }

  /// Round tick spacing to a 1/2/5 decade multiple.
  static std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    if (raw / mag >= 5.0)
      step = 5.0 * mag;
    else if (raw / mag >= 2.0)
      step = 2.0 * mag;
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step)
      out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return out;
  }

  static constexpr int kW = 760, kH = 420;
  static constexpr double kMarginL = 64, kMarginR = 20, kMarginT = 40, kMarginB = 48;

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  std::vector<Event> events_;
};

}  // namespace resdyn::io
