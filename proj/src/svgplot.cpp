#include "otasim/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "otasim/csvio.hpp"

namespace otasim::svg {

namespace {

struct Cell {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct Series {
  std::string label;
  std::vector<Cell> cells;  // sorted by x
};

std::string num(double v, int prec = 2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string gnum(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::vector<Series> aggregate(const std::vector<pipeline::SweepRow>& rows, PlotKind kind) {
  // (series label, x) -> accuracies
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  for (const auto& r : rows) {
    std::string label;
    double x = 0.0;
    switch (kind) {
      case PlotKind::sensors:
        label = r.experiment_id;
        x = static_cast<double>(r.sensors);
        break;
      case PlotKind::snr_matrix:
        label = "train " + gnum(r.train_snr_db) + " dB";
        x = r.test_snr_db;
        break;
      case PlotKind::drift:
        label = r.experiment_id;
        x = r.drift_time_s;
        break;
    }
    groups[label][x].push_back(r.accuracy);
  }
  std::vector<Series> series;
  for (const auto& [label, cells] : groups) {
    Series s;
    s.label = label;
    for (const auto& [x, accs] : cells) {
      if (accs.empty()) throw std::runtime_error("plot: empty series cell");
      Cell c;
      c.x = x;
      for (double a : accs) c.mean += a;
      c.mean /= static_cast<double>(accs.size());
      if (accs.size() > 1) {
        double var = 0.0;
        for (double a : accs) var += (a - c.mean) * (a - c.mean);
        c.std = std::sqrt(var / static_cast<double>(accs.size() - 1));
      }
      s.cells.push_back(c);
    }
    series.push_back(std::move(s));
  }
  if (series.empty()) throw std::runtime_error("plot: empty series (no rows)");
  return series;
}

}  // namespace

std::string render_plot(const std::vector<pipeline::SweepRow>& rows, PlotKind kind) {
  std::vector<Series> series = aggregate(rows, kind);
  const bool log_x = kind == PlotKind::drift;

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& s : series) {
    for (const auto& c : s.cells) {
      const double xv = log_x ? std::log10(c.x) : c.x;
      x_lo = std::min(x_lo, xv);
      x_hi = std::max(x_hi, xv);
      y_lo = std::min(y_lo, c.mean - c.std);
      y_hi = std::max(y_hi, c.mean + c.std);
    }
  }
  if (x_hi <= x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  y_lo = std::max(0.0, y_lo - 0.05);
  y_hi = std::min(1.0, y_hi + 0.05);
  if (y_hi <= y_lo) y_hi = y_lo + 0.1;

  const double W = 640, H = 420, AX0 = 80, AX1 = 600, AY0 = 360, AY1 = 40;
  auto px = [&](double xv) { return AX0 + (xv - x_lo) / (x_hi - x_lo) * (AX1 - AX0); };
  auto py = [&](double yv) { return AY0 + (yv - y_lo) / (y_hi - y_lo) * (AY1 - AY0); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W, 0) + "\" height=\"" +
         num(H, 0) + "\" viewBox=\"0 0 " + num(W, 0) + " " + num(H, 0) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const char* title = kind == PlotKind::sensors
                          ? "Accuracy vs number of sensors"
                          : kind == PlotKind::snr_matrix ? "Accuracy vs test SNR"
                                                         : "Accuracy vs drift time";
  const char* x_label = kind == PlotKind::sensors
                            ? "sensors M"
                            : kind == PlotKind::snr_matrix ? "test SNR (dB)"
                                                           : "drift time (s, log scale)";
  out += "<text x=\"320\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
         "text-anchor=\"middle\">" +
         std::string(title) + "</text>\n";

  // Axes.
  out += "<line x1=\"" + num(AX0) + "\" y1=\"" + num(AY0) + "\" x2=\"" + num(AX1) + "\" y2=\"" +
         num(AY0) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(AX0) + "\" y1=\"" + num(AY0) + "\" x2=\"" + num(AX0) + "\" y2=\"" +
         num(AY1) + "\" stroke=\"black\"/>\n";

  // Y ticks.
  for (int i = 0; i <= 5; ++i) {
    const double yv = y_lo + (y_hi - y_lo) * i / 5.0;
    const double yy = py(yv);
    out += "<line x1=\"" + num(AX0 - 4) + "\" y1=\"" + num(yy) + "\" x2=\"" + num(AX0) +
           "\" y2=\"" + num(yy) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(AX0 - 8) + "\" y=\"" + num(yy + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + num(yv) +
           "</text>\n";
  }

  // X ticks at the union of cell positions.
  std::vector<double> xticks;
  for (const auto& s : series) {
    for (const auto& c : s.cells) {
      const double xv = log_x ? std::log10(c.x) : c.x;
      bool seen = false;
      for (double t : xticks) {
        if (std::abs(t - xv) < 1e-9) seen = true;
      }
      if (!seen) xticks.push_back(xv);
    }
  }
  std::sort(xticks.begin(), xticks.end());
  for (double t : xticks) {
    const double xx = px(t);
    out += "<line x1=\"" + num(xx) + "\" y1=\"" + num(AY0) + "\" x2=\"" + num(xx) + "\" y2=\"" +
           num(AY0 + 4) + "\" stroke=\"black\"/>\n";
    const double shown = log_x ? std::pow(10.0, t) : t;
    out += "<text x=\"" + num(xx) + "\" y=\"" + num(AY0 + 18) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           gnum(log_x ? shown : t) + "</text>\n";
  }
  out += "<text x=\"" + num((AX0 + AX1) / 2) + "\" y=\"" + num(AY0 + 38) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
         std::string(x_label) + "</text>\n";
  out += "<text x=\"20\" y=\"" + num((AY0 + AY1) / 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 20 " +
         num((AY0 + AY1) / 2) + ")\">accuracy</text>\n";

  // Series: error bars first, then the mean polyline and markers.
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 6];
    std::string poly;
    for (const auto& c : series[si].cells) {
      const double xx = px(log_x ? std::log10(c.x) : c.x);
      const double ym = py(c.mean);
      poly += num(xx) + "," + num(ym) + " ";
      if (c.std > 0.0) {
        const double y1 = py(c.mean - c.std), y2 = py(c.mean + c.std);
        out += "<line x1=\"" + num(xx) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(xx) +
               "\" y2=\"" + num(y2) + "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
        for (double ye : {y1, y2}) {
          out += "<line x1=\"" + num(xx - 3) + "\" y1=\"" + num(ye) + "\" x2=\"" + num(xx + 3) +
                 "\" y2=\"" + num(ye) + "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
        }
      }
      out += "<circle cx=\"" + num(xx) + "\" cy=\"" + num(ym) + "\" r=\"2.5\" fill=\"" + color +
             "\"/>\n";
    }
    out += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
  }

  // Legend.
  const double lx = AX1 - 160, ly = AY1 + 8;
  for (size_t si = 0; si < series.size(); ++si) {
    const double yy = ly + 16.0 * static_cast<double>(si);
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(yy) + "\" x2=\"" + num(lx + 22) +
           "\" y2=\"" + num(yy) + "\" stroke=\"" + std::string(kPalette[si % 6]) +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(yy + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + series[si].label + "</text>\n";
  }

  out += "</svg>\n";
  return out;
}

void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& out_path) {
  const std::vector<pipeline::SweepRow> rows = csvio::parse_csv(csv_path);
  const std::string svg = render_plot(rows, kind);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error("plot: cannot open for write: " + out_path);
  os << svg;
  if (!os) throw std::runtime_error("plot: write failed: " + out_path);
}

}  // namespace otasim::svg
