#include "wqed/analytic_oracle.hpp"
#include "wqed/quadrature.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <numbers>
#include <random>

using namespace wqed;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

double integrate(const std::function<double(double)>& f, std::vector<double> edges) {
  return integrate_panels<double>(f, edges, [](double v) { return std::abs(v); }, 1e-14, 1e-11);
}

} // namespace

TEST_CASE("gamma pair identities") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> g(0.2, 3.0), w(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double gamma = g(rng), rabi = w(rng);
    const GammaPair p = gamma_pair(gamma, rabi);
    CHECK(std::abs(p.plus * p.minus - 2.0 * rabi * rabi) < 1e-12 * std::max(1.0, gamma * gamma));
    CHECK(std::abs(p.plus * p.plus + p.minus * p.minus - 2.0 * (gamma * gamma - 2.0 * rabi * rabi)) <
          1e-12 * std::max(1.0, gamma * gamma));
    if (rabi <= gamma / 2) {
      CHECK(std::abs(p.plus.imag()) < 1e-14);
      CHECK(p.minus.real() >= 0.0);
    } else {
      CHECK(std::abs(p.plus - std::conj(p.minus)) < 1e-12);
      CHECK(p.plus.real() > 0.0);
    }
  }
}

TEST_CASE("gamma pair limits") {
  const GammaPair bare = gamma_pair(1.0, 0.0);
  CHECK(bare.plus.real() == Approx(std::sqrt(2.0)));
  CHECK(std::abs(bare.minus) < 1e-14);
  const GammaPair strong = gamma_pair(1.0, 1.0);
  CHECK(std::abs(strong.plus) == Approx(std::sqrt(2.0)));
  CHECK(std::abs(std::arg(strong.plus)) == Approx(pi / 3));
  CHECK(std::abs(strong.plus - std::sqrt(2.0) * std::polar(1.0, pi / 3)) < 1e-12);
}

TEST_CASE("closed spectrum vanishes on two-photon resonance and is symmetric") {
  for (double w : {99.0, 99.8, 100.0, 100.4})
    CHECK(s_closed(1.0, 0.25, 100.0, 100.0, w) == 0.0);
  const double k = 100.3, e = 2.0 * k;
  for (double w : {98.0, 99.5, 100.1, 100.37})
    CHECK(s_closed(1.0, 0.25, 100.0, k, w) == Approx(s_closed(1.0, 0.25, 100.0, k, e - w)).epsilon(1e-12));
}

TEST_CASE("closed flux of a bare emitter peaks at 8/pi") {
  CHECK(f_closed(1.0, 0.0, 100.0, 100.0) == Approx(8.0 / pi).epsilon(1e-12));
  const ClosedPeak p = f_closed_peak(1.0, 0.0, 100.0);
  CHECK(p.f_peak == Approx(8.0 / pi).epsilon(1e-3));
  CHECK(p.k_peak == Approx(100.0).epsilon(1e-8));
}

TEST_CASE("closed flux tail falls as 1/k^4") {
  const double ref = f_closed(1.0, 0.25, 100.0, 150.0) * std::pow(50.0, 4);
  for (double d : {80.0, 120.0, 200.0})
    CHECK(f_closed(1.0, 0.25, 100.0, 100.0 + d) * std::pow(d, 4) == Approx(ref).epsilon(0.05));
}

TEST_CASE("closed flux is twice the integrated closed spectrum") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> w(0.05, 1.5), k(98.0, 102.0);
  for (int i = 0; i < 20; ++i) {
    const double rabi = w(rng), kin = k(rng);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> edges{-inf, 90.0, 99.0, 100.0, kin, 2.0 * kin - 100.0, 101.0, 110.0, inf};
    std::sort(edges.begin(), edges.end());
    const double s = integrate([&](double x) { return s_closed(1.0, rabi, 100.0, kin, x); }, edges);
    CHECK(2.0 * s == Approx(f_closed(1.0, rabi, 100.0, kin)).epsilon(1e-8));
  }
}

TEST_CASE("closed flux is nonnegative and zero only at omega0") {
  for (double k = 97.0; k <= 103.0; k += 0.137)
    CHECK(f_closed(1.0, 0.25, 100.0, k) > 0.0);
  CHECK(f_closed(1.0, 0.25, 100.0, 100.0) == 0.0);
}

TEST_CASE("closed forms scale covariantly") {
  const ClosedPeak a = f_closed_peak(1.0, 0.25, 100.0);
  const ClosedPeak b = f_closed_peak(2.0, 0.5, 100.0);
  CHECK(b.f_peak == Approx(a.f_peak / 2).epsilon(1e-6));
  CHECK(b.k_peak - 100.0 == Approx(2.0 * (a.k_peak - 100.0)).epsilon(1e-5));
  CHECK(s_closed(2.0, 0.5, 100.0, 100.6, 101.0) ==
        Approx(s_closed(1.0, 0.25, 100.0, 100.3, 100.5) / 4.0).epsilon(1e-10));
}

TEST_CASE("peak of the strong-drive closed flux") {
  const ClosedPeak p = f_closed_peak(1.0, 1.0, 100.0);
  CHECK(p.k_peak > 100.0);
  CHECK(p.twin == Approx(200.0 - p.k_peak));
  CHECK(p.f_peak == Approx(f_closed(1.0, 1.0, 100.0, p.twin)).epsilon(1e-12));
}

TEST_CASE("closed curves are tagged as closed form") {
  const std::vector<double> ws{99.0, 100.0, 101.0};
  const CurveSeries s = s_closed_curve(1.0, 0.25, 100.0, 100.3, ws);
  CHECK(s.source == "closed_form");
  CHECK(s.column("S_R")[0] == s.column("S_L")[0]);
  const CurveSeries f = f_closed_curve(1.0, 0.25, 100.0, ws);
  CHECK(f.source == "closed_form");
  CHECK(f.column("F")[1] == 0.0);
}
