#include "globalqr/svg.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gqr {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace

std::string render_svg(const EnvelopePanel& p) {
  const std::size_t k = p.x.size();
  if (k == 0 || p.observed.size() != k || p.lower.size() != k || p.upper.size() != k ||
      (!p.central.empty() && p.central.size() != k) || (!p.outside.empty() && p.outside.size() != k))
    throw Error(ErrorKind::DimensionMismatch, "plot series lengths differ");

  double x0 = *std::min_element(p.x.begin(), p.x.end()), x1 = *std::max_element(p.x.begin(), p.x.end());
  double y0 = std::min({*std::min_element(p.lower.begin(), p.lower.end()),
                        *std::min_element(p.observed.begin(), p.observed.end())});
  double y1 = std::max({*std::max_element(p.upper.begin(), p.upper.end()),
                        *std::max_element(p.observed.begin(), p.observed.end())});
  if (x1 <= x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 <= y0) {
    y0 -= 1;
    y1 += 1;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * (kWidth - kLeft - kRight); };
  auto sy = [&](double v) { return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom); };
  auto polyline = [&](const std::vector<double>& ys) {
    std::string pts;
    for (std::size_t i = 0; i < k; ++i) pts += (i ? " " : "") + fmt(sx(p.x[i])) + "," + fmt(sy(ys[i]));
    return pts;
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title)
    << "</text>\n";

  // axes and ticks
  s << "<g stroke=\"#444\" fill=\"none\">\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
    << kHeight - kBottom << "\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
    << "\"/>\n</g>\n";
  s << "<g fill=\"#444\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
    s << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(sy(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << escape(p.x_label)
    << "</text>\n</g>\n";

  // band: upper left to right, lower back
  std::string band;
  for (std::size_t i = 0; i < k; ++i) band += fmt(sx(p.x[i])) + "," + fmt(sy(p.upper[i])) + " ";
  for (std::size_t i = k; i-- > 0;) band += fmt(sx(p.x[i])) + "," + fmt(sy(p.lower[i])) + (i ? " " : "");
  s << "<polygon points=\"" << band << "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"#6baed6\"/>\n";
  if (y0 < 0 && y1 > 0)
    s << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(sy(0)) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
      << fmt(sy(0)) << "\" stroke=\"#bbb\"/>\n";
  if (!p.central.empty())
    s << "<polyline points=\"" << polyline(p.central) << "\" fill=\"none\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
  s << "<polyline points=\"" << polyline(p.observed) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < p.outside.size(); ++i)
    if (p.outside[i])
      s << "<circle cx=\"" << fmt(sx(p.x[i])) << "\" cy=\"" << fmt(sy(p.observed[i]))
        << "\" r=\"5\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace gqr
