#pragma once

#include <string>
#include <vector>

#include "stmpc/linalg.hpp"

namespace stmpc {

/// Minimal static SVG line-plot writer: axes with ticks, polylines,
/// scatter markers, and overlay shapes in data coordinates.
class SvgPlot {
 public:
  SvgPlot(double width = 720, double height = 480);

  void set_title(const std::string& title);
  void set_axis_labels(const std::string& x, const std::string& y);
  /// Forces identical scaling of both axes (spatial plots).
  void set_equal_aspect(bool on) { equal_aspect_ = on; }

  void add_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color, const std::string& label = "",
                bool dashed = false);
  void add_marker(double x, double y, const std::string& color,
                  const std::string& label = "");
  void add_rect(double x0, double y0, double x1, double y1,
                const std::string& color);
  /// Outline of {y : (y-c)' E (y-c) = level}.
  void add_ellipse(const Matrix& E, const Vector& center, double level,
                   const std::string& color, bool dashed = false);
  void add_circle(double cx, double cy, double r, const std::string& color,
                  bool dashed = false);

  void write(const std::string& path) const;

 private:
  struct Line {
    std::vector<double> x, y;
    std::string color, label;
    bool dashed = false;
  };
  struct Marker {
    double x, y;
    std::string color, label;
  };
  struct Rect {
    double x0, y0, x1, y1;
    std::string color;
  };
  double width_, height_;
  bool equal_aspect_ = false;
  std::string title_, xlabel_, ylabel_;
  std::vector<Line> lines_;
  std::vector<Marker> markers_;
  std::vector<Rect> rects_;
};

}  // namespace stmpc
