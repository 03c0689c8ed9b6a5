#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dlo/passage.hpp"
#include "dlo/pathset.hpp"

namespace dlo {

/// One drawing panel: obstacles and passages come from the workspace; the
/// reference shape is drawn red, the actual shape black.
struct SvgFrame {
  std::string label;
  DLOShape actual;
  DLOShape reference;
  bool has_reference = false;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string polyline(const std::vector<Point2>& pts, double ox, double height,
                            double scale, const std::string& style) {
  std::string s = "<polyline fill=\"none\" " + style + " points=\"";
  for (const auto& p : pts)
    s += fmt(ox + p.x * scale) + "," + fmt((height - p.y) * scale) + " ";
  s += "\"/>\n";
  return s;
}

}  // namespace detail

/// Multi-panel SVG snapshot: one panel per frame with obstacles, passages
/// (dashed), the path set, and the shapes.
inline void emit_svg(const std::vector<SvgFrame>& frames, const Workspace& w,
                     const std::string& out_path, const PassageSet* passages = nullptr,
                     const PathSet* pathset = nullptr) {
  if (frames.empty()) throw std::invalid_argument("emit_svg needs at least one frame");
  const double scale = 400.0;
  const double pad = 10.0;
  const double pw = w.width * scale;
  const double ph = w.height * scale;
  const double total_w = frames.size() * (pw + pad) + pad;
  const double total_h = ph + 2 * pad + 18.0;

  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot write SVG: " + out_path);
  f << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(total_w)
    << "\" height=\"" << detail::fmt(total_h) << "\" viewBox=\"0 0 " << detail::fmt(total_w)
    << " " << detail::fmt(total_h) << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const double ox = pad + fi * (pw + pad);
    f << "<g transform=\"translate(" << detail::fmt(ox) << "," << detail::fmt(pad) << ")\">\n";
    f << "<rect x=\"0\" y=\"0\" width=\"" << detail::fmt(pw) << "\" height=\""
      << detail::fmt(ph) << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    for (const auto& o : w.obstacles) {
      f << "<polygon fill=\"#bbbbbb\" stroke=\"#555\" stroke-width=\"1\" points=\"";
      for (const auto& v : o.vertices)
        f << detail::fmt(v.x * scale) << "," << detail::fmt((w.height - v.y) * scale) << " ";
      f << "\"/>\n";
    }
    if (passages)
      for (const auto& p : passages->passages)
        f << "<line x1=\"" << detail::fmt(p.endpoint_a.x * scale) << "\" y1=\""
          << detail::fmt((w.height - p.endpoint_a.y) * scale) << "\" x2=\""
          << detail::fmt(p.endpoint_b.x * scale) << "\" y2=\""
          << detail::fmt((w.height - p.endpoint_b.y) * scale)
          << "\" stroke=\"#3a7\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";
    if (pathset)
      for (const auto& path : pathset->paths)
        f << detail::polyline(path.waypoints, 0.0, w.height, scale,
                              "stroke=\"#99c\" stroke-width=\"0.6\"");
    const auto& fr = frames[fi];
    if (fr.has_reference)
      f << detail::polyline(fr.reference.keypoints, 0.0, w.height, scale,
                            "stroke=\"red\" stroke-width=\"2\"");
    f << detail::polyline(fr.actual.keypoints, 0.0, w.height, scale,
                          "stroke=\"black\" stroke-width=\"2\"");
    f << "<text x=\"4\" y=\"" << detail::fmt(ph + 14.0)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << fr.label << "</text>\n";
    f << "</g>\n";
  }
  f << "</svg>\n";
}

}  // namespace dlo
