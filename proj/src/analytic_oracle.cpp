#include "wqed/analytic_oracle.hpp"
#include "wqed/model.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace wqed {

namespace {

using cplx = std::complex<double>;

double checked_real(cplx v, const char* what) {
  if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real())))
    throw Error(ErrorCode::DomainError, std::string(what) + " has a spurious imaginary part");
  return v.real();
}

void check_rates(double gamma, double rabi) {
  if (!(gamma > 0.0) || !(rabi >= 0.0) || !std::isfinite(gamma) || !std::isfinite(rabi))
    throw Error(ErrorCode::InvalidParameter, "closed forms need gamma > 0 and rabi >= 0");
}

} // namespace

GammaPair gamma_pair(double gamma, double rabi) {
  check_rates(gamma, rabi);
  const double g2 = gamma * gamma, w2 = rabi * rabi;
  const cplx inner = std::sqrt(cplx(g2 - 4.0 * w2, 0.0));
  const cplx plus = std::sqrt(g2 - 2.0 * w2 + gamma * inner);
  // gamma_+ gamma_- = 2 W^2; dividing avoids the cancellation in the minus root.
  return {plus, 2.0 * w2 / plus};
}

double s_closed(double gamma, double rabi, double omega0, double k_in, double omega) {
  const auto [gp, gm] = gamma_pair(gamma, rabi);
  const double E = 2.0 * k_in;
  const double d = E - 2.0 * omega0;
  const double a = omega - omega0;
  const double b = E - omega - omega0;
  if (rabi == 0.0) {
    // gamma_- = 0 cancels between numerator and denominator.
    const double g2 = std::norm(gp);
    return 32.0 * g2 * g2 /
           (std::numbers::pi * std::numbers::pi * (g2 + 2.0 * d * d) * (g2 + 8.0 * a * a) * (g2 + 8.0 * b * b));
  }
  const cplx gp2 = gp * gp, gm2 = gm * gm;
  const cplx num = 64.0 * std::pow(gp + gm, 4) * d * d * std::pow(gp * gm + 8.0 * a * b, 2);
  const cplx den = std::numbers::pi * std::numbers::pi * (gp2 + 2.0 * d * d) * (gm2 + 2.0 * d * d) *
                   (gp2 + 8.0 * a * a) * (gm2 + 8.0 * a * a) * (gp2 + 8.0 * b * b) *
                   (gm2 + 8.0 * b * b);
  if (d == 0.0)
    return 0.0;
  return checked_real(num / den, "closed-form spectrum");
}

double f_closed(double gamma, double rabi, double omega0, double k_in) {
  const auto [gp, gm] = gamma_pair(gamma, rabi);
  const double d = 2.0 * k_in - 2.0 * omega0;
  if (rabi == 0.0) {
    const double g = gp.real();
    return 8.0 * std::numbers::sqrt2 * g * g * g / (std::numbers::pi * std::pow(g * g + 2.0 * d * d, 2));
  }
  if (d == 0.0)
    return 0.0;
  const cplx gp2 = gp * gp, gm2 = gm * gm;
  const cplx num = 16.0 * std::numbers::sqrt2 * std::pow(gp + gm, 3) * d * d * (gp * gm + 2.0 * d * d);
  const cplx den = std::numbers::pi * std::pow(gp2 + 2.0 * d * d, 2) * std::pow(gm2 + 2.0 * d * d, 2);
  return checked_real(num / den, "closed-form flux");
}

ClosedPeak f_closed_peak(double gamma, double rabi, double omega0) {
  check_rates(gamma, rabi);
  const double step =
      rabi > 0.0 ? std::min(gamma / 50.0, rabi * rabi / (20.0 * gamma)) : gamma / 50.0;
  // F is even in k - omega0, so the scan covers [omega0, omega0 + 3 gamma].
  const auto n = static_cast<std::size_t>(std::ceil(3.0 * gamma / step));
  std::size_t best = 0;
  double best_f = -1.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double f = f_closed(gamma, rabi, omega0, omega0 + step * static_cast<double>(i));
    if (f > best_f) {
      best_f = f;
      best = i;
    }
  }
  const double lo = step * std::max(0.0, static_cast<double>(best) - 1.0);
  const double hi = step * (static_cast<double>(best) + 1.0);
  auto neg = [&](double z) { return -f_closed(gamma, rabi, omega0, omega0 + z); };
  const auto [z, negf] =
      boost::math::tools::brent_find_minima(neg, lo, hi, std::numeric_limits<double>::digits / 2);
  ClosedPeak out;
  out.k_peak = omega0 + z;
  out.f_peak = -negf;
  out.twin = omega0 - z;
  if (best_f > out.f_peak) {
    out.k_peak = omega0 + step * static_cast<double>(best);
    out.f_peak = best_f;
    out.twin = 2.0 * omega0 - out.k_peak;
  }
  return out;
}

CurveSeries s_closed_curve(double gamma, double rabi, double omega0, double k_in,
                           std::span<const double> omega_grid) {
  CurveSeries out;
  out.axis_name = "omega";
  out.axis.assign(omega_grid.begin(), omega_grid.end());
  out.source = "closed_form";
  std::vector<double> s;
  for (double w : omega_grid)
    s.push_back(s_closed(gamma, rabi, omega0, k_in, w));
  out.add_column("S_R", s);
  out.add_column("S_L", std::move(s));
  return out;
}

CurveSeries f_closed_curve(double gamma, double rabi, double omega0, std::span<const double> k_grid) {
  CurveSeries out;
  out.axis_name = "k";
  out.axis.assign(k_grid.begin(), k_grid.end());
  out.source = "closed_form";
  std::vector<double> f;
  for (double k : k_grid)
    f.push_back(f_closed(gamma, rabi, omega0, k));
  out.add_column("F", std::move(f));
  return out;
}

} // namespace wqed
