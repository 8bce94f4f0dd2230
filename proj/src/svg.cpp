#include "steerlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "steerlab/errors.hpp"

namespace steerlab {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::rect(double x, double y, double w, double h, const std::string& fill,
               const std::string& stroke, double stroke_width) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
           "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"";
  if (stroke != "none") {
    body_ += " stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) + "\"";
  }
  body_ += "/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke,
               double width) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
           "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) +
           "\"/>\n";
}

void Svg::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                   double width) {
  body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) +
           "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) body_ += ' ';
    body_ += num(pts[i].first) + "," + num(pts[i].second);
  }
  body_ += "\"/>\n";
}

void Svg::polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
                  const std::string& stroke, double width) {
  body_ += "<polygon fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
           num(width) + "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) body_ += ' ';
    body_ += num(pts[i].first) + "," + num(pts[i].second);
  }
  body_ += "\"/>\n";
}

void Svg::circle(double cx, double cy, double r, const std::string& fill) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
           "\" fill=\"" + fill + "\"/>\n";
}

void Svg::text(double x, double y, const std::string& s, double size,
               const std::string& anchor) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + escape(s) +
           "</text>\n";
}

std::string Svg::str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
         num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

void Svg::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArtifactError("cannot write svg: " + path);
  f << str();
}

Axes::Axes(Svg* svg, double px, double py, double pw, double ph, double x_min, double x_max,
           double y_min, double y_max)
    : svg_(svg), px_(px), py_(py), pw_(pw), ph_(ph), x_min_(x_min), x_max_(x_max),
      y_min_(y_min), y_max_(y_max) {
  if (x_max_ <= x_min_) x_max_ = x_min_ + 1.0;
  if (y_max_ <= y_min_) y_max_ = y_min_ + 1.0;
}

double Axes::x(double data_x) const {
  return px_ + (data_x - x_min_) / (x_max_ - x_min_) * pw_;
}

double Axes::y(double data_y) const {
  return py_ + ph_ - (data_y - y_min_) / (y_max_ - y_min_) * ph_;
}

void Axes::frame(const std::string& x_label, const std::string& y_label, int x_ticks,
                 int y_ticks) {
  svg_->line(px_, py_ + ph_, px_ + pw_, py_ + ph_, "black", 1.0);
  svg_->line(px_, py_, px_, py_ + ph_, "black", 1.0);
  for (int i = 0; i <= x_ticks; ++i) {
    const double v = x_min_ + (x_max_ - x_min_) * i / x_ticks;
    const double sx = x(v);
    svg_->line(sx, py_ + ph_, sx, py_ + ph_ + 4, "black", 1.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    svg_->text(sx, py_ + ph_ + 16, buf, 10.0, "middle");
  }
  for (int i = 0; i <= y_ticks; ++i) {
    const double v = y_min_ + (y_max_ - y_min_) * i / y_ticks;
    const double sy = y(v);
    svg_->line(px_ - 4, sy, px_, sy, "black", 1.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    svg_->text(px_ - 7, sy + 3, buf, 10.0, "end");
  }
  svg_->text(px_ + pw_ / 2, py_ + ph_ + 32, x_label, 11.0, "middle");
  svg_->text(px_ - 34, py_ - 8, y_label, 11.0, "start");
}

std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // Three-stop gradient: deep blue -> pale yellow -> strong red.
  double r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = 40 + (250 - 40) * u;
    g = 60 + (240 - 60) * u;
    b = 150 + (180 - 150) * u;
  } else {
    const double u = (t - 0.5) / 0.5;
    r = 250 + (200 - 250) * u;
    g = 240 + (40 - 240) * u;
    b = 180 + (40 - 180) * u;
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(r), static_cast<int>(g),
                static_cast<int>(b));
  return buf;
}

}  // namespace steerlab
