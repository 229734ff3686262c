#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace framecs::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct Panel {
  std::string title;
  bool bars = false;
  std::vector<Series> series;       // line panels
  std::vector<std::string> labels;  // bar panels
  std::vector<double> values;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline const char* color(std::size_t i) {
  static const char* c[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return c[i % 6];
}

namespace detail {

inline void frame(std::string& o, double x0, double y0, double w, double h, const std::string& title, double lo,
                  double hi) {
  o += "<rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  o += "<text x=\"" + num(x0 + w / 2) + "\" y=\"" + num(y0 - 8) + "\" text-anchor=\"middle\" font-size=\"13\">" +
       escape(title) + "</text>\n";
  o += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(y0 + h) + "\" text-anchor=\"end\" font-size=\"10\">" + num(lo) +
       "</text>\n";
  o += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(y0 + 10) + "\" text-anchor=\"end\" font-size=\"10\">" + num(hi) +
       "</text>\n";
}

inline void render(std::string& o, const Panel& p, double x0, double y0, double w, double h) {
  if (p.bars) {
    double hi = 0, lo = 0;
    for (double v : p.values) hi = std::max(hi, v), lo = std::min(lo, v);
    if (hi == lo) hi = lo + 1;
    frame(o, x0, y0, w, h, p.title, lo, hi);
    const double bw = w / double(std::max<std::size_t>(1, p.values.size()));
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      double top = y0 + h * (hi - std::max(0.0, p.values[i])) / (hi - lo);
      double bot = y0 + h * (hi - std::min(0.0, p.values[i])) / (hi - lo);
      o += "<rect x=\"" + num(x0 + bw * (double(i) + 0.1)) + "\" y=\"" + num(top) + "\" width=\"" + num(bw * 0.8) +
           "\" height=\"" + num(bot - top) + "\" fill=\"" + color(0) + "\"/>\n";
      if (i < p.labels.size())
        o += "<text x=\"" + num(x0 + bw * (double(i) + 0.5)) + "\" y=\"" + num(y0 + h + 14) +
             "\" text-anchor=\"middle\" font-size=\"10\">" + escape(p.labels[i]) + "</text>\n";
    }
    return;
  }
  double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xl = std::min(xl, s.x[i]), xh = std::max(xh, s.x[i]);
      yl = std::min(yl, s.y[i]), yh = std::max(yh, s.y[i]);
    }
  if (!(xl < xh)) xl = 0, xh = 1;
  if (!(yl < yh)) yl -= 0.5, yh += 0.5;
  frame(o, x0, y0, w, h, p.title, yl, yh);
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    o += "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" + std::string(color(k)) + "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o += num(x0 + w * (s.x[i] - xl) / (xh - xl)) + "," + num(y0 + h * (yh - s.y[i]) / (yh - yl)) + " ";
    o += "\"/>\n";
    o += "<text x=\"" + num(x0 + 6) + "\" y=\"" + num(y0 + 14 + 12 * double(k)) + "\" font-size=\"10\" fill=\"" +
         color(k) + "\">" + escape(s.label) + "</text>\n";
  }
  o += "<text x=\"" + num(x0) + "\" y=\"" + num(y0 + h + 14) + "\" font-size=\"10\">" + num(xl) + "</text>\n";
  o += "<text x=\"" + num(x0 + w) + "\" y=\"" + num(y0 + h + 14) + "\" text-anchor=\"end\" font-size=\"10\">" +
       num(xh) + "</text>\n";
}

}  // namespace detail

// panels laid out row-major on a grid with `cols` columns
inline std::string figure(const std::vector<Panel>& panels, std::size_t cols = 3, const std::string& caption = "") {
  cols = std::max<std::size_t>(1, std::min(cols, panels.size()));
  const double pw = 300, ph = 200, mx = 60, my = 40;
  std::size_t rows = (panels.size() + cols - 1) / cols;
  double W = double(cols) * (pw + mx) + mx, H = double(rows) * (ph + 2 * my) + my;
  std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
                  "\" font-family=\"sans-serif\">\n";
  if (!caption.empty()) o += "<!-- " + escape(caption) + " -->\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    double x0 = mx + double(i % cols) * (pw + mx), y0 = my + double(i / cols) * (ph + 2 * my);
    detail::render(o, panels[i], x0, y0, pw, ph);
  }
  o += "</svg>\n";
  return o;
}

}  // namespace framecs::svg
