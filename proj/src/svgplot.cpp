#include "stmpc/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>

#include "stmpc/errors.hpp"

namespace stmpc {

SvgPlot::SvgPlot(double width, double height)
    : width_(width), height_(height) {}

void SvgPlot::set_title(const std::string& title) { title_ = title; }
void SvgPlot::set_axis_labels(const std::string& x, const std::string& y) {
  xlabel_ = x;
  ylabel_ = y;
}

void SvgPlot::add_line(const std::vector<double>& x,
                       const std::vector<double>& y, const std::string& color,
                       const std::string& label, bool dashed) {
  lines_.push_back({x, y, color, label, dashed});
}

void SvgPlot::add_marker(double x, double y, const std::string& color,
                         const std::string& label) {
  markers_.push_back({x, y, color, label});
}

void SvgPlot::add_rect(double x0, double y0, double x1, double y1,
                       const std::string& color) {
  rects_.push_back({x0, y0, x1, y1, color});
}

void SvgPlot::add_ellipse(const Matrix& E, const Vector& center, double level,
                          const std::string& color, bool dashed) {
  // Boundary {c + sqrt(level) E^{-1/2} (cos t, sin t)} as one polyline.
  Eigen::SelfAdjointEigenSolver<Matrix> es(E);
  const Matrix half = es.eigenvectors() *
                      es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose();
  std::vector<double> xs, ys;
  const int segments = 160;
  for (int i = 0; i <= segments; ++i) {
    const double t = 2.0 * M_PI * i / segments;
    Vector dir(2);
    dir << std::cos(t), std::sin(t);
    const Vector pt = center + std::sqrt(level) * (half * dir);
    xs.push_back(pt(0));
    ys.push_back(pt(1));
  }
  add_line(xs, ys, color, "", dashed);
}

void SvgPlot::add_circle(double cx, double cy, double r,
                         const std::string& color, bool dashed) {
  std::vector<double> xs, ys;
  const int segments = 96;
  for (int i = 0; i <= segments; ++i) {
    const double t = 2.0 * M_PI * i / segments;
    xs.push_back(cx + r * std::cos(t));
    ys.push_back(cy + r * std::sin(t));
  }
  add_line(xs, ys, color, "", dashed);
}

void SvgPlot::write(const std::string& path) const {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto grow = [&](double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const auto& l : lines_)
    for (size_t i = 0; i < l.x.size(); ++i) grow(l.x[i], l.y[i]);
  for (const auto& m : markers_) grow(m.x, m.y);
  for (const auto& r : rects_) {
    grow(r.x0, r.y0);
    grow(r.x1, r.y1);
  }
  if (!std::isfinite(xmin)) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) { xmax += 0.5; xmin -= 0.5; }
  if (ymax - ymin < 1e-12) { ymax += 0.5; ymin -= 0.5; }
  const double padx = 0.05 * (xmax - xmin);
  const double pady = 0.05 * (ymax - ymin);
  xmin -= padx; xmax += padx; ymin -= pady; ymax += pady;

  const double ml = 64, mr = 16, mt = title_.empty() ? 16 : 34, mb = 46;
  double sx = (width_ - ml - mr) / (xmax - xmin);
  double sy = (height_ - mt - mb) / (ymax - ymin);
  if (equal_aspect_) {
    const double s = std::min(sx, sy);
    sx = sy = s;
  }
  auto px = [&](double x) { return ml + (x - xmin) * sx; };
  auto py = [&](double y) { return height_ - mb - (y - ymin) * sy; };

  std::ofstream out(path);
  if (!out) throw Error("cannot open svg file: " + path);
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
      << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " "
      << height_ << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes box and ticks.
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                "fill=\"none\" stroke=\"#444\"/>\n",
                ml, mt, width_ - ml - mr, height_ - mt - mb);
  out << buf;
  const int nticks = 6;
  for (int i = 0; i <= nticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / nticks;
    const double yv = ymin + (ymax - ymin) * i / nticks;
    if (px(xv) <= width_ - mr + 1) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                    "stroke=\"#bbb\" stroke-width=\"0.5\"/>\n",
                    px(xv), mt, px(xv), height_ - mb);
      out << buf;
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                    "text-anchor=\"middle\">%.3g</text>\n",
                    px(xv), height_ - mb + 16, xv);
      out << buf;
    }
    if (py(yv) >= mt - 1 && py(yv) <= height_ - mb + 1) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                    "stroke=\"#bbb\" stroke-width=\"0.5\"/>\n",
                    ml, py(yv), width_ - mr, py(yv));
      out << buf;
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                    "text-anchor=\"end\">%.3g</text>\n",
                    ml - 6, py(yv) + 4, yv);
      out << buf;
    }
  }

  for (const auto& r : rects_) {
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                  "fill=\"%s\" fill-opacity=\"0.35\" stroke=\"%s\"/>\n",
                  px(std::min(r.x0, r.x1)), py(std::max(r.y0, r.y1)),
                  std::abs(px(r.x1) - px(r.x0)),
                  std::abs(py(r.y1) - py(r.y0)), r.color.c_str(),
                  r.color.c_str());
    out << buf;
  }

  for (const auto& l : lines_) {
    out << "<polyline fill=\"none\" stroke=\"" << l.color
        << "\" stroke-width=\"1.4\"";
    if (l.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (size_t i = 0; i < l.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(l.x[i]), py(l.y[i]));
      out << buf;
    }
    out << "\"/>\n";
  }

  for (const auto& m : markers_) {
    std::snprintf(buf, sizeof(buf),
                  "<path d=\"M %.2f %.2f l 5 5 m -10 0 l 10 -10 m -5 5\" "
                  "stroke=\"%s\" stroke-width=\"2\"/>\n",
                  px(m.x) - 0.0, py(m.y) - 0.0, m.color.c_str());
    out << buf;
    if (!m.label.empty()) {
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                    "fill=\"%s\">%s</text>\n",
                    px(m.x) + 8, py(m.y) - 6, m.color.c_str(),
                    m.label.c_str());
      out << buf;
    }
  }

  // Legend for labelled lines.
  double ly = mt + 14;
  for (const auto& l : lines_) {
    if (l.label.empty()) continue;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"%s\" stroke-width=\"2\"%s/>\n",
                  width_ - mr - 130, ly - 4, width_ - mr - 104, ly - 4,
                  l.color.c_str(),
                  l.dashed ? " stroke-dasharray=\"6 4\"" : "");
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n",
                  width_ - mr - 98, ly, l.label.c_str());
    out << buf;
    ly += 16;
  }

  if (!title_.empty()) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"22\" font-size=\"15\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  width_ / 2, title_.c_str());
    out << buf;
  }
  if (!xlabel_.empty()) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  ml + (width_ - ml - mr) / 2, height_ - 10, xlabel_.c_str());
    out << buf;
  }
  if (!ylabel_.empty()) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"14\" y=\"%.1f\" font-size=\"12\" "
                  "text-anchor=\"middle\" transform=\"rotate(-90 14 %.1f)\">"
                  "%s</text>\n",
                  mt + (height_ - mt - mb) / 2, mt + (height_ - mt - mb) / 2,
                  ylabel_.c_str());
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace stmpc
