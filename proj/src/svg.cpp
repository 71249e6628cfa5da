#include "rpb/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rpb {

namespace {

const char* const kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

struct Frame {
  double xmin, xmax, ymin, ymax, scale;
  double px(double x) const { return (x - xmin) * scale; }
  double py(double y) const { return (ymax - y) * scale; }
};

std::string star(double cx, double cy, double r) {
  std::ostringstream os;
  for (int k = 0; k < 10; ++k) {
    const double rad = (k % 2 == 0) ? r : 0.45 * r;
    const double a = -std::numbers::pi / 2.0 + k * std::numbers::pi / 5.0;
    os << (k ? " " : "") << cx + rad * std::cos(a) << ',' << cy + rad * std::sin(a);
  }
  return os.str();
}

}  // namespace

std::string render_svg(const PlantLayout& layout, const ObstacleField& field,
                       const std::vector<Trajectory>& trajectories, double width_px) {
  const Index d = layout.spatial_dim;
  auto coord = [d](const auto& v, Index k) { return k < d ? v(k) : 0.0; };

  double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
  auto grow = [&](double x, double y, double pad) {
    xmin = std::min(xmin, x - pad);
    xmax = std::max(xmax, x + pad);
    ymin = std::min(ymin, y - pad);
    ymax = std::max(ymax, y + pad);
  };
  for (const Obstacle& o : field.obstacles) grow(o.center(0), o.center(1), o.radius);
  for (const Trajectory& tr : trajectories) {
    for (Index t = 0; t <= tr.eta.horizon(); ++t) {
      for (Index i = 0; i < layout.robots; ++i) {
        const auto p = tr.eta.at(t).segment(layout.position_index(i), d);
        grow(coord(p, 0), coord(p, 1), 0.0);
      }
    }
    for (Index i = 0; i < layout.robots; ++i) grow(coord(tr.targets.segment(d * i, d), 0), coord(tr.targets.segment(d * i, d), 1), 0.0);
  }
  const double pad = 0.3;
  xmin -= pad;
  xmax += pad;
  ymin -= pad;
  ymax += pad;
  const Frame f{xmin, xmax, ymin, ymax, width_px / (xmax - xmin)};
  const double height_px = (ymax - ymin) * f.scale;

  std::ostringstream os;
  os.precision(5);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px << "\" height=\"" << height_px
     << "\" viewBox=\"0 0 " << width_px << ' ' << height_px << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const Obstacle& o : field.obstacles) {
    os << "  <circle class=\"obstacle\" cx=\"" << f.px(o.center(0)) << "\" cy=\"" << f.py(o.center(1)) << "\" r=\""
       << o.radius * f.scale << "\" fill=\"#999999\" fill-opacity=\"0.6\"/>\n";
  }
  for (const Trajectory& tr : trajectories) {
    for (Index i = 0; i < layout.robots; ++i) {
      const char* color = kColors[i % 6];
      os << "  <polyline class=\"path\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (Index t = 0; t <= tr.eta.horizon(); ++t) {
        const auto p = tr.eta.at(t).segment(layout.position_index(i), d);
        os << (t ? " " : "") << f.px(coord(p, 0)) << ',' << f.py(coord(p, 1));
      }
      os << "\"/>\n";
      const auto p0 = tr.eta.at(0).segment(layout.position_index(i), d);
      os << "  <circle class=\"start\" cx=\"" << f.px(coord(p0, 0)) << "\" cy=\"" << f.py(coord(p0, 1))
         << "\" r=\"5\" fill=\"" << color << "\"/>\n";
      const auto g = tr.targets.segment(d * i, d);
      os << "  <polygon class=\"target\" points=\"" << star(f.px(coord(g, 0)), f.py(coord(g, 1)), 9.0)
         << "\" fill=\"" << color << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const PlantLayout& layout, const ObstacleField& field,
               const std::vector<Trajectory>& trajectories) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << render_svg(layout, field, trajectories);
}

}  // namespace rpb
