#include "wqed/analytic_oracle.hpp"
#include "wqed/observables.hpp"

#include <doctest.h>

#include <numbers>
#include <sstream>

using namespace wqed;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<ValidatedConfig> standard() {
  return {validate(single_qubit(0.25)), validate(qubit_with_mirror(0.25, pi / 2)),
          validate(qubit_chain(2, 0.25, pi / 2))};
}

GridOptions unsampled() {
  GridOptions g;
  g.sample = false;
  return g;
}

} // namespace

TEST_CASE("spectrum vanishes on two-photon resonance") {
  const CurveSeries s = power_spectra(validate(single_qubit(0.25)), 100.0, linspace(97.0, 103.0, 61));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.column("S_R")[i] < 1e-16);
    CHECK(s.column("S_L")[i] < 1e-16);
  }
}

TEST_CASE("one emitter radiates equally in both directions at the flux peak") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  const double k = find_k_peak(cfg).k_peak;
  const CurveSeries s = power_spectra(cfg, k, linspace(98.0, 102.0, 201));
  for (std::size_t i = 0; i < s.size(); ++i)
    CHECK(std::abs(s.column("S_R")[i] - s.column("S_L")[i]) < 1e-8);
}

TEST_CASE("spectra are symmetric about E/2") {
  for (const ValidatedConfig& cfg : standard()) {
    const TwoPhotonSolution sol = scatter_two(cfg, 100.07, unsampled());
    for (double w : {98.7, 99.9, 100.02, 100.6}) {
      const double total = sol.spectrum_left(w) + sol.spectrum_right(w);
      const double image = sol.spectrum_left(sol.E - w) + sol.spectrum_right(sol.E - w);
      CHECK(std::abs(total - image) < 1e-8);
      if (cfg.size() == 1) {
        CHECK(std::abs(sol.spectrum_left(w) - sol.spectrum_left(sol.E - w)) < 1e-8);
        CHECK(std::abs(sol.spectrum_right(w) - sol.spectrum_right(sol.E - w)) < 1e-8);
      }
    }
  }
}

TEST_CASE("each direction is symmetric about E/2 for two emitters" * doctest::may_fail()) {
  const TwoPhotonSolution sol = scatter_two(validate(qubit_chain(2, 0.25, pi / 2)), 100.07, unsampled());
  for (double w : {98.7, 99.9, 100.02, 100.6}) {
    CHECK(std::abs(sol.spectrum_left(w) - sol.spectrum_left(sol.E - w)) < 1e-8);
    CHECK(std::abs(sol.spectrum_right(w) - sol.spectrum_right(sol.E - w)) < 1e-8);
  }
}

TEST_CASE("two emitters radiate different spectra in each direction") {
  const ValidatedConfig cfg = validate(qubit_chain(2, 0.25, pi / 2));
  const double k = find_k_peak(cfg).k_peak;
  const CurveSeries s = power_spectra(cfg, k, linspace(98.0, 102.0, 201));
  double diff = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    diff = std::max(diff, std::abs(s.column("S_R")[i] - s.column("S_L")[i]));
  CHECK(diff > 1e-3);
}

TEST_CASE("numerical spectrum reproduces the closed form") {
  for (double rabi : {0.0, 0.25, 1.0}) {
    const ValidatedConfig cfg = validate(single_qubit(rabi));
    for (double k : {99.6, 100.04, 100.47}) {
      const std::vector<double> ws = linspace(k - 4.0, k + 4.0, 500);
      const CurveSeries s = power_spectrum(cfg, k, Direction::R, ws);
      double worst = 0.0, top = 0.0;
      for (std::size_t i = 0; i < ws.size(); ++i) {
        const double ref = s_closed(1.0, rabi, 100.0, k, ws[i]);
        worst = std::max(worst, std::abs(s.column("S_R")[i] - ref));
        top = std::max(top, ref);
      }
      CHECK(worst / top < 1e-6);
    }
  }
}

TEST_CASE("quenched inelastic flux at omega_s") {
  for (const ValidatedConfig& cfg : standard())
    CHECK(inelastic_flux(cfg, 100.0) < 1e-8);
}

TEST_CASE("bare emitter flux on resonance is 8/pi") {
  CHECK(inelastic_flux(validate(single_qubit(0.0)), 100.0) == Approx(8.0 / pi).epsilon(0.01));
}

TEST_CASE("flux is mirror symmetric about omega0") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  for (double d : {0.03, 0.4, 1.7})
    CHECK(inelastic_flux(cfg, 100.0 + d) == Approx(inelastic_flux(cfg, 100.0 - d)).epsilon(1e-6));
}

TEST_CASE("flux matches the closed form and the integrated spectrum") {
  for (const ValidatedConfig& cfg : standard()) {
    const double k = 100.06;
    const double f = inelastic_flux(cfg, k);
    if (cfg.size() == 1 && !cfg.semi_infinite())
      CHECK(f == Approx(f_closed(1.0, 0.25, 100.0, k)).epsilon(1e-6));
    const std::vector<double> ws = linspace(k - 400.0, k + 400.0, 1'600'001);
    const CurveSeries s = power_spectra(cfg, k, ws);
    double trap = 0.0;
    for (std::size_t i = 1; i < ws.size(); ++i) {
      const double a = s.column("S_R")[i - 1] + s.column("S_L")[i - 1];
      const double b = s.column("S_R")[i] + s.column("S_L")[i];
      trap += 0.5 * (a + b) * (ws[i] - ws[i - 1]);
    }
    CHECK(trap == Approx(f).epsilon(1e-4));
  }
}

TEST_CASE("flux peak of a bare emitter") {
  const PeakReport p = find_k_peak(validate(single_qubit(0.0)));
  CHECK(p.k_peak == Approx(100.0).epsilon(1e-8));
  CHECK(p.f_peak == Approx(8.0 / pi).epsilon(0.01));
}

TEST_CASE("flux peak under strong drive" * doctest::may_fail()) {
  CHECK(find_k_peak(validate(single_qubit(1.0))).f_peak == Approx(16.0 / pi).epsilon(0.02));
}

TEST_CASE("flux peak under weak drive is about five bare peaks") {
  const PeakReport p = find_k_peak(validate(single_qubit(0.25)));
  CHECK(p.f_peak == Approx(5.0 * 8.0 / pi).epsilon(0.15));
  REQUIRE(p.twin);
  CHECK(p.k_peak > 100.0);
  CHECK(*p.twin == Approx(200.0 - p.k_peak).epsilon(1e-8));
  std::ostringstream out;
  write_peak_report(out, p);
  CHECK(out.str().find("T_at_peak") != std::string::npos);
}

TEST_CASE("peak search fails on an empty window") {
  CHECK_THROWS_AS(find_k_peak(validate(single_qubit(0.25)), std::pair{100.0, 100.0}), Error);
  try {
    find_k_peak(validate(single_qubit(0.25)), std::pair{99.99999, 100.00001});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
  }
}

TEST_CASE("flux peak decreases with the drive") {
  double last = std::numeric_limits<double>::infinity();
  for (double w : linspace(1.0 / 16, 1.0, 8)) {
    const double f = find_k_peak(validate(single_qubit(w))).f_peak;
    CHECK(f < last);
    last = f;
  }
}

TEST_CASE("flux tail falls as 1/k^4") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  const double ref = inelastic_flux(cfg, 150.0) * std::pow(50.0, 4);
  for (double d : {75.0, 100.0, 150.0, 200.0})
    CHECK(inelastic_flux(cfg, 100.0 + d) * std::pow(d, 4) == Approx(ref).epsilon(0.05));
}

TEST_CASE("sweeps do not depend on the thread count") {
  const ValidatedConfig cfg = validate(qubit_chain(2, 0.25, pi / 4));
  const std::vector<double> ks = linspace(98.0, 102.0, 41);
  const CurveSeries a = flux_curve(cfg, ks, 1);
  const CurveSeries b = flux_curve(cfg, ks, 4);
  CHECK(a.column("F") == b.column("F"));
  std::ostringstream sa, sb;
  write_csv(sa, a, {"h", false});
  write_csv(sb, b, {"h", false});
  CHECK(sa.str() == sb.str());
}

TEST_CASE("transmitted photons stay uncorrelated at transparency") {
  const CurveSeries g = g2(validate(single_qubit(0.25)), 100.0, Direction::R, linspace(0.0, 50.0, 101));
  for (double v : g.column("g2"))
    CHECK(std::abs(v - 1.0) < 1e-6);
}

TEST_CASE("one emitter cannot reflect two photons at once") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  for (double k : {99.7, 100.04, 100.3, 101.0}) {
    const std::vector<double> t{0.0};
    CHECK(g2(cfg, k, Direction::L, t).column("g2")[0] < 1e-8);
  }
}

TEST_CASE("mirror bunches, then antibunches, then settles") {
  const ValidatedConfig cfg = validate(qubit_with_mirror(0.25, pi / 2));
  const double k = find_k_peak(cfg).k_peak;
  const CurveSeries g = g2(cfg, k, Direction::L, linspace(0.0, 2000.0, 4001));
  const std::vector<double>& v = g.column("g2");
  CHECK(v.front() > 1.0);
  CHECK(*std::min_element(v.begin(), v.end()) < 1.0);
  CHECK(std::abs(v.back() - 1.0) < 1e-3);
  CHECK_THROWS_AS(g2(cfg, k, Direction::R, linspace(0.0, 1.0, 2)), Error);
}

TEST_CASE("correlations die out after ten delay times") {
  for (const ValidatedConfig& cfg : standard()) {
    const double k = find_k_peak(cfg).k_peak;
    const double tau = std::abs(time_delay(cfg, cfg.omega_s(0)).tau);
    const std::vector<double> t{10.0 * tau};
    for (Direction d : {Direction::R, Direction::L}) {
      if (d == Direction::R && cfg.semi_infinite())
        continue;
      CHECK(std::abs(g2(cfg, k, d, t).column("g2")[0] - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("slowest correlation decay scales with the drive squared") {
  auto slowest = [](double rabi) {
    const ValidatedConfig cfg = validate(single_qubit(rabi));
    const TwoPhotonSolution sol = scatter_two(cfg, find_k_peak(cfg).k_peak, unsampled());
    const double t1 = 30.0 / (rabi * rabi), t2 = 60.0 / (rabi * rabi);
    const double a = std::abs(g2_value(sol, Direction::R, t1) - 1.0);
    const double b = std::abs(g2_value(sol, Direction::R, t2) - 1.0);
    return std::log(a / b) / (t2 - t1);
  };
  CHECK(slowest(0.5) / slowest(0.25) == Approx(4.0).epsilon(0.25));
}

TEST_CASE("g2 rejects negative delays and vanishing intensity") {
  CHECK_THROWS_AS(g2(validate(single_qubit(0.25)), 100.2, Direction::R, std::vector<double>{-1.0}), Error);
  try {
    g2(validate(single_qubit(0.0)), 100.0, Direction::R, std::vector<double>{0.0});
    FAIL("expected DomainError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
  }
}

TEST_CASE("max-normalized export") {
  const CurveSeries s = power_spectra(validate(single_qubit(0.25)), 100.04, linspace(99.0, 101.0, 11));
  std::ostringstream raw, norm;
  write_csv(raw, s, {"h", false});
  write_csv(norm, s, {"h", true});
  CHECK(raw.str() != norm.str());
  CHECK(norm.str().find("normalized") != std::string::npos);
}
