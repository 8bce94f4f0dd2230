#ifndef STEERLAB_SVG_HPP
#define STEERLAB_SVG_HPP

#include <string>
#include <utility>
#include <vector>

namespace steerlab {

// Minimal deterministic SVG writer: fixed float formatting, no timestamps, so
// reruns produce byte-identical files.
class Svg {
 public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none", double stroke_width = 0.0);
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.0);
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               const std::string& stroke, double width = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill);
  void text(double x, double y, const std::string& s, double size = 11.0,
            const std::string& anchor = "start");

  std::string str() const;
  void write(const std::string& path) const;

 private:
  double width_;
  double height_;
  std::string body_;
};

// Linear data-to-screen mapping for one plot panel, with axis drawing.
class Axes {
 public:
  Axes(Svg* svg, double px, double py, double pw, double ph, double x_min, double x_max,
       double y_min, double y_max);

  double x(double data_x) const;
  double y(double data_y) const;

  void frame(const std::string& x_label, const std::string& y_label, int x_ticks = 5,
             int y_ticks = 5);

  Svg* svg() const { return svg_; }

 private:
  Svg* svg_;
  double px_, py_, pw_, ph_;
  double x_min_, x_max_, y_min_, y_max_;
};

// Viridis-like three-stop color map for heat cells, t in [0, 1].
std::string heat_color(double t);

}  // namespace steerlab

#endif  // STEERLAB_SVG_HPP
