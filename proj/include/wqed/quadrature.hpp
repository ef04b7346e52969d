#pragma once

// Adaptive Gauss-Kronrod (7/15) for vector-valued integrands, built on the
// Boost.Math node tables. Scalars go through Boost's own integrator.

#include "wqed/model.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <vector>

namespace wqed {

struct QuadratureResult {
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

namespace detail {

template <class V, class F, class Norm>
V gk15_panel(F& f, double a, double b, Norm& norm, double& err, std::size_t& evals) {
  using gk = boost::math::quadrature::gauss_kronrod<double, 15>;
  using g7 = boost::math::quadrature::gauss<double, 7>;
  const auto& x = gk::abscissa();
  const auto& wk = gk::weights();
  const auto& wg = g7::weights();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);

  V fc = f(mid);
  V kron = fc * wk[0];
  V gauss = fc * wg[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    V pair = f(mid + half * x[i]);
    pair = pair + f(mid - half * x[i]);
    kron = kron + pair * wk[i];
    if (i % 2 == 0)
      gauss = gauss + pair * wg[i / 2];
  }
  evals += 2 * x.size() - 1;
  kron = kron * half;
  gauss = gauss * half;
  err = norm(kron - gauss);
  return kron;
}

template <class V, class F, class Norm>
V adaptive_panel(F& f, double a, double b, Norm& norm, double abs_tol, double rel_tol, int depth,
                 QuadratureResult& info) {
  double err = 0.0;
  V whole = gk15_panel<V>(f, a, b, norm, err, info.evaluations);
  const double target = std::max(abs_tol, rel_tol * norm(whole));
  if (err <= target || !(err == err)) {
    info.error += err;
    return whole;
  }
  if (depth <= 0) {
    info.error += err;
    info.converged = false;
    return whole;
  }
  const double m = 0.5 * (a + b);
  V left = adaptive_panel<V>(f, a, m, norm, 0.5 * abs_tol, rel_tol, depth - 1, info);
  V right = adaptive_panel<V>(f, m, b, norm, 0.5 * abs_tol, rel_tol, depth - 1, info);
  return left + right;
}

} // namespace detail

// Integrates f over the consecutive panels [edges[i], edges[i+1]]. Infinite
// end points are allowed and handled by x = c +- u / (1 - u).
template <class V, class F, class Norm>
V integrate_panels(F f, const std::vector<double>& edges, Norm norm, double abs_tol,
                   double rel_tol, QuadratureResult* report = nullptr, int max_depth = 30) {
  QuadratureResult info;
  V total{};
  bool first = true;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    if (!(b > a))
      continue;
    V part;
    if (std::isinf(a) && std::isinf(b)) {
      throw Error(ErrorCode::InvalidParameter, "a panel may have at most one infinite end");
    } else if (b == inf) {
      auto g = [&](double u) -> V {
        const double s = 1.0 - u;
        return f(a + u / s) * (1.0 / (s * s));
      };
      part = detail::adaptive_panel<V>(g, 0.0, 1.0, norm, abs_tol, rel_tol, max_depth, info);
    } else if (a == -inf) {
      auto g = [&](double u) -> V {
        const double s = 1.0 - u;
        return f(b - u / s) * (1.0 / (s * s));
      };
      part = detail::adaptive_panel<V>(g, 0.0, 1.0, norm, abs_tol, rel_tol, max_depth, info);
    } else {
      part = detail::adaptive_panel<V>(f, a, b, norm, abs_tol, rel_tol, max_depth, info);
    }
    total = first ? part : V(total + part);
    first = false;
  }
  if (report)
    *report = info;
  return total;
}

// Panel edges that resolve Lorentzian-like features: for every (center,
// width) pair the points center +- {1, 4, 16} * width are inserted, and the
// outermost panels run to +- infinity.
std::vector<double> feature_edges(const std::vector<std::pair<double, double>>& features);

} // namespace wqed
