#include "wqed/quadrature.hpp"

#include <algorithm>

namespace wqed {

std::vector<double> feature_edges(const std::vector<std::pair<double, double>>& features) {
  std::vector<double> pts;
  for (const auto& [c, w] : features) {
    pts.push_back(c);
    for (double m : {1.0, 4.0, 16.0}) {
      pts.push_back(c - m * w);
      pts.push_back(c + m * w);
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> edges;
  const double inf = std::numeric_limits<double>::infinity();
  edges.push_back(-inf);
  for (double p : pts) {
    const double scale = std::max(1.0, std::abs(p));
    if (edges.size() > 1 && p - edges.back() < 1e-12 * scale)
      continue;
    edges.push_back(p);
  }
  edges.push_back(inf);
  return edges;
}

} // namespace wqed
