#pragma once

#include <span>
#include <string>

#include "wassreg/measures.hpp"

namespace wassreg::svg {

struct Series {
  std::string label;
  std::string color;  // any SVG colour
  const EmpiricalMeasure* measure = nullptr;
};

// Scatter plot of the first two coordinates of each series on shared axes,
// with a legend. Output depends only on the inputs.
std::string scatter(std::span<const Series> series, const std::string& title, int size_px = 480);

}  // namespace wassreg::svg
