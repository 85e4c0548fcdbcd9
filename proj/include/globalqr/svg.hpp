#pragma once

// Minimal SVG line charts for envelope panels.

#include <string>
#include <vector>

namespace gqr {

struct EnvelopePanel {
  std::string title;
  std::string x_label = "tau";
  std::vector<double> x;
  std::vector<double> observed;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> central;
  std::vector<bool> outside;
};

/// Shaded band, dashed central curve, solid observed curve, out-of-band points circled.
std::string render_svg(const EnvelopePanel& panel);

}  // namespace gqr
