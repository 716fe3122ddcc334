#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "neardgd/csv.hpp"
#include "neardgd/errors.hpp"
#include "neardgd/harness.hpp"

// Progress plots in the four usual coordinates: relative error of the network
// average against iterations, cumulative gradient steps, cumulative consensus
// rounds, and cumulative application cost.
//
// Rendering is split from data: each axis first gets a plot-data CSV holding
// exactly the decimated points (one marker per `marker_every` iterations plus
// the final point), and the SVG is drawn from those points alone, so any
// external tool fed the CSV reproduces the same series.

namespace neardgd {

struct PlotOptions {
  std::vector<std::string> axes = {"iters", "grads", "comms", "cost"};
  long marker_every = 500;
};

namespace plot_detail {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline double axis_value(const TrajectoryRow& r, const std::string& axis) {
  if (axis == "iters") return static_cast<double>(r.k);
  if (axis == "grads") return static_cast<double>(r.cum_grad);
  if (axis == "comms") return static_cast<double>(r.cum_comm);
  if (axis == "cost") return r.cum_cost;
  throw InvalidParameterError("plot: unknown axis '" + axis + "'");
}

inline const char* axis_title(const std::string& axis) {
  if (axis == "iters") return "iterations";
  if (axis == "grads") return "cumulative gradient steps";
  if (axis == "comms") return "cumulative consensus rounds";
  return "cumulative cost";
}

// Round a raw step up to the nearest 1/2/5 decade multiple.
inline double nice_step(double raw) {
  if (!(raw > 0.0)) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  if (frac <= 1.0) return mag;
  if (frac <= 2.0) return 2.0 * mag;
  if (frac <= 5.0) return 5.0 * mag;
  return 10.0 * mag;
}

inline std::string format_tick(double v) {
  if (v == 0.0) return "0";
  const double a = std::abs(v);
  if (a >= 1e5 || a < 1e-3) {
    const int e = static_cast<int>(std::floor(std::log10(a) + 1e-12));
    const double mant = v / std::pow(10.0, e);
    const double r = std::round(mant * 100.0) / 100.0;
    std::string m = csv::format_double(r);
    return m + "e" + std::to_string(e);
  }
  const double r = std::round(v * 1e6) / 1e6;
  return csv::format_double(r);
}

inline const char* series_color(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
                                   "#17becf", "#bcbd22"};
  return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Semi-log plot (log10 relative error over a linear x axis).
inline std::string render_svg(const std::vector<Series>& series,
                              const std::string& x_title) {
  constexpr double kW = 760, kH = 560;
  constexpr double kLeft = 80, kRight = 730, kTop = 40, kBottom = 500;

  double x_min = 0.0, x_max = 1.0;
  double ly_min = 0.0, ly_max = -300.0;
  bool any = false;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0.0)) continue;
      const double ly = std::log10(s.y[i]);
      if (!any) {
        x_min = x_max = s.x[i];
        ly_min = ly_max = ly;
        any = true;
      } else {
        x_min = std::min(x_min, s.x[i]);
        x_max = std::max(x_max, s.x[i]);
        ly_min = std::min(ly_min, ly);
        ly_max = std::max(ly_max, ly);
      }
    }
  if (!any) {
    x_min = 0.0;
    x_max = 1.0;
    ly_min = -1.0;
    ly_max = 0.0;
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  ly_min = std::floor(ly_min);
  ly_max = std::ceil(ly_max);
  if (ly_max <= ly_min) ly_max = ly_min + 1.0;

  const auto px = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  };
  const auto py = [&](double y) {
    const double ly = std::log10(y);
    return kBottom - (ly - ly_min) / (ly_max - ly_min) * (kBottom - kTop);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         format_tick(kW) + "\" height=\"" + format_tick(kH) +
         "\" viewBox=\"0 0 760 560\">\n";
  svg += "<rect width=\"760\" height=\"560\" fill=\"white\"/>\n";

  // y grid: one line per decade, thinned to at most 12 labels
  const long decades = static_cast<long>(ly_max - ly_min);
  const long y_step = std::max(1L, (decades + 11) / 12);
  for (long e = static_cast<long>(ly_min); e <= static_cast<long>(ly_max);
       e += y_step) {
    const double y = kBottom - (static_cast<double>(e) - ly_min) /
                                   (ly_max - ly_min) * (kBottom - kTop);
    svg += "<line x1=\"80\" x2=\"730\" y1=\"" + format_tick(y) + "\" y2=\"" +
           format_tick(y) + "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"74\" y=\"" + format_tick(y + 4) +
           "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\""
           ">1e" +
           std::to_string(e) + "</text>\n";
  }

  // x grid at nice steps
  const double step = nice_step((x_max - x_min) / 6.0);
  for (double x = std::ceil(x_min / step) * step; x <= x_max + 1e-9 * step;
       x += step) {
    const double xp = px(x);
    svg += "<line y1=\"40\" y2=\"500\" x1=\"" + format_tick(xp) + "\" x2=\"" +
           format_tick(xp) + "\" stroke=\"#eeeeee\"/>\n";
    svg += "<text y=\"516\" x=\"" + format_tick(xp) +
           "\" text-anchor=\"middle\" font-size=\"12\" "
           "font-family=\"sans-serif\">" +
           format_tick(x) + "</text>\n";
  }

  svg += "<rect x=\"80\" y=\"40\" width=\"650\" height=\"460\" fill=\"none\" "
         "stroke=\"#444444\"/>\n";
  svg += "<text x=\"405\" y=\"544\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\">" +
         xml_escape(x_title) + "</text>\n";
  svg += "<text x=\"20\" y=\"270\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 20 270)\">"
         "relative error</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = series_color(si);
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0.0)) continue;
      points += format_tick(px(s.x[i])) + "," + format_tick(py(s.y[i])) + " ";
    }
    if (!points.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!(s.y[i] > 0.0)) continue;
        svg += "<circle r=\"3.5\" fill=\"" + std::string(color) +
               "\" cx=\"" + format_tick(px(s.x[i])) + "\" cy=\"" +
               format_tick(py(s.y[i])) + "\"/>\n";
      }
    }
    const double ly_txt = 56.0 + 18.0 * static_cast<double>(si);
    svg += "<line x1=\"560\" x2=\"588\" y1=\"" + format_tick(ly_txt - 4) +
           "\" y2=\"" + format_tick(ly_txt - 4) + "\" stroke=\"" +
           std::string(color) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"594\" y=\"" + format_tick(ly_txt) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" +
           xml_escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace plot_detail

// Decimates a record to the marker grid: k = 0, every `marker_every`-th
// iteration, and the final row.
inline std::vector<TrajectoryRow> decimate_rows(
    const std::vector<TrajectoryRow>& rows, long marker_every) {
  if (marker_every < 1)
    throw InvalidParameterError("plot: marker_every must be >= 1");
  std::vector<TrajectoryRow> out;
  const long last = rows.empty() ? 0 : rows.back().k;
  for (const auto& r : rows)
    if (r.k % marker_every == 0 || r.k == last) out.push_back(r);
  return out;
}

// Emits plotdata_<axis>.csv and plot_<axis>.svg for every requested axis.
inline std::vector<std::filesystem::path> emit_plots(
    const std::vector<TrajectoryRecord>& records,
    const std::filesystem::path& dir, const PlotOptions& opt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  std::vector<std::filesystem::path> written;
  for (const auto& axis : opt.axes) {
    std::string data = "run_id,variant,x,y\n";
    std::vector<plot_detail::Series> series;
    for (const auto& rec : records) {
      plot_detail::Series s;
      s.label = rec.meta.variant;
      if (records.size() > 1) {
        bool cost_varies = false;
        for (const auto& other : records)
          if (other.meta.c_c != rec.meta.c_c || other.meta.c_g != rec.meta.c_g)
            cost_varies = true;
        if (cost_varies)
          s.label += " [cc=" + csv::format_double(rec.meta.c_c) +
                     ",cg=" + csv::format_double(rec.meta.c_g) + "]";
      }
      for (const auto& r : decimate_rows(rec.rows, opt.marker_every)) {
        const double x = plot_detail::axis_value(r, axis);
        s.x.push_back(x);
        s.y.push_back(r.rel_error);
        data += std::to_string(rec.meta.run_id);
        data += ',';
        data += csv::quote_field(rec.meta.variant);
        data += ',';
        data += csv::format_double(x);
        data += ',';
        data += csv::format_double(r.rel_error);
        data += '\n';
      }
      series.push_back(std::move(s));
    }
    const auto data_path = dir / ("plotdata_" + axis + ".csv");
    csv::write_text(data_path, data);
    written.push_back(data_path);
    const auto svg_path = dir / ("plot_" + axis + ".svg");
    csv::write_text(svg_path,
                    plot_detail::render_svg(series,
                                            plot_detail::axis_title(axis)));
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace neardgd
