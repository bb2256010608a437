#include "wassreg/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "wassreg/errors.hpp"

namespace wassreg::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter(std::span<const Series> series, const std::string& title, int size_px) {
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (const auto& s : series) {
    if (s.measure == nullptr) throw ValidationError("svg: series without a measure");
    const auto& p = s.measure->points();
    for (std::size_t r = 0; r < p.rows(); ++r)
      for (std::size_t c = 0; c < std::min<std::size_t>(2, p.cols()); ++c) {
        lo[c] = std::min(lo[c], p(r, c));
        hi[c] = std::max(hi[c], p(r, c));
      }
  }
  for (int c = 0; c < 2; ++c) {
    if (!(lo[c] <= hi[c])) lo[c] = hi[c] = 0.0;
    const double pad = 0.05 * std::max(hi[c] - lo[c], 1e-9) + 1e-9;
    lo[c] -= pad;
    hi[c] += pad;
  }
  const double span = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  const double margin = 30.0;
  const double scale = (size_px - 2 * margin) / span;

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                size_px, size_px + 20, size_px, size_px + 20);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + std::to_string(size_px / 2) + "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%g\" cy=\"%g\" r=\"4\" fill=\"%s\"/><text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                  "font-size=\"12\">",
                  margin + 10.0, 40.0 + 16.0 * static_cast<double>(i), escape(s.color).c_str(), margin + 20.0,
                  44.0 + 16.0 * static_cast<double>(i));
    out += buf;
    out += escape(s.label) + "</text>\n";
    out += "<g fill=\"" + escape(s.color) + "\" fill-opacity=\"0.6\">\n";
    const auto& p = s.measure->points();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double x = margin + (p(r, 0) - lo[0]) * scale;
      const double y = 20.0 + size_px - margin - ((p.cols() > 1 ? p(r, 1) : 0.0) - lo[1]) * scale;
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\"/>\n", x, y);
      out += buf;
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace wassreg::svg
