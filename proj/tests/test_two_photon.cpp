#include "wqed/two_photon.hpp"

#include <doctest.h>

#include <numbers>
#include <sstream>

using namespace wqed;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

GridOptions unsampled() {
  GridOptions g;
  g.sample = false;
  return g;
}

std::vector<ValidatedConfig> standard() {
  return {validate(single_qubit(0.25)), validate(qubit_with_mirror(0.25, pi / 2)),
          validate(qubit_chain(2, 0.25, pi / 2))};
}

double sup_bound(const TwoPhotonSolution& sol) {
  double sup = 0.0;
  for (Channel ch : {Channel::RR, Channel::LL, Channel::RL}) {
    if (!sol.has_channel(ch))
      continue;
    for (double p = sol.E / 2 - 20.0; p <= sol.E / 2 + 20.0; p += 0.01)
      sup = std::max(sup, std::abs(sol.amplitude(ch, p)));
  }
  return sup;
}

} // namespace

TEST_CASE("doubly excited subspace layout") {
  CHECK(doubly_subspace(validate(single_qubit(0.25))).dim() == 3);
  CHECK(doubly_subspace(validate(qubit_chain(2, 0.25, 1.0))).dim() == 6);
  const DoublySubspace bare = doubly_subspace(validate(single_qubit(0.0)));
  REQUIRE(bare.dim() == 1);
  CHECK(bare.states[0].kind == DoublySubspace::Kind::EE);
  const DoublySubspace d = doubly_subspace(validate(single_qubit(0.25)));
  for (Eigen::Index c = 0; c < d.embedding.cols(); ++c)
    CHECK(d.embedding.col(c).norm() == Approx(1.0));
}

TEST_CASE("pair propagator is complex symmetric with outgoing sign") {
  for (const ValidatedConfig& cfg : standard())
    for (double e : {199.3, 200.0, 200.8}) {
      const Eigen::MatrixXcd g = g0_matrix(cfg, e);
      CHECK((g - g.transpose()).norm() / g.norm() < 1e-10);
      for (Eigen::Index m = 0; m < g.rows(); ++m)
        CHECK(g(m, m).imag() <= 1e-14);
    }
}

TEST_CASE("resolvent and momentum quadrature paths agree") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  const double e = 2.0 * cfg.omega_s(0) + 1.0;
  const Eigen::MatrixXcd a = g0_matrix(cfg, e);
  const G0QuadratureReport q = g0_quadrature(cfg, e);
  CHECK(q.converged);
  CHECK((a - q.value).norm() / a.norm() < 1e-6);
  CHECK((a - g0_matrix(cfg, e, G0Method::Quadrature)).norm() / a.norm() < 1e-6);
}

TEST_CASE("finite repulsion converges to the hardcore limit as 1/U") {
  const ValidatedConfig cfg = validate(single_qubit(0.25));
  const double e = 200.4;
  const Eigen::MatrixXcd hard = t_matrix(cfg, e);
  std::vector<double> err;
  for (double u : {1e3, 1e4, 1e5})
    err.push_back((t_matrix(cfg, e, u) - hard).norm() / hard.norm());
  for (std::size_t i = 1; i < err.size(); ++i)
    CHECK(std::log10(err[i - 1] / err[i]) == Approx(1.0).epsilon(0.1));
  CHECK_THROWS_AS(t_matrix(cfg, e, -1.0), Error);
}

TEST_CASE("undriven emitter only populates the doubly excited state") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.0)), 100.3, unsampled());
  CHECK(sol.subspace.dim() == 1);
  CHECK(sol.incoming.size() == 1);
  CHECK(std::abs(sol.incoming(0)) > 0.0);
}

TEST_CASE("fluorescence quenching: T acting on the incoming pair vanishes at omega_s" * doctest::may_fail()) {
  for (const ValidatedConfig& cfg : standard()) {
    const TwoPhotonSolution sol = scatter_two(cfg, 100.0, unsampled());
    CHECK(sol.correction.norm() < 1e-8);
  }
}

TEST_CASE("no bound part at the transparency point") {
  for (const ValidatedConfig& cfg : standard()) {
    const TwoPhotonSolution sol = scatter_two(cfg, 100.0, unsampled());
    CHECK(sup_bound(sol) < 1e-8);
    for (double s : {0.0, 1.0, 7.0})
      CHECK(std::abs(sol.bound_relative(Channel::LL, s)) < 1e-8);
  }
}

TEST_CASE("elastic coefficients are products of single-photon amplitudes") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.25)), 100.1, unsampled());
  CHECK(std::abs(sol.elastic(Channel::RR) - sol.t * sol.t) < 1e-14);
  CHECK(std::abs(sol.elastic(Channel::LL) - sol.r * sol.r) < 1e-14);
  CHECK(std::abs(sol.elastic(Channel::RL) - 2.0 * sol.t * sol.r) < 1e-14);
  const TwoPhotonSolution m = scatter_two(validate(qubit_with_mirror(0.25, pi / 2)), 100.1, unsampled());
  CHECK_FALSE(m.has_channel(Channel::RR));
  CHECK(std::abs(m.elastic(Channel::LL) - m.r * m.r) < 1e-14);
  CHECK_THROWS_AS(m.amplitude(Channel::RR, 100.0), Error);
}

TEST_CASE("one emitter scatters the bound part symmetrically") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.25)), 100.04, unsampled());
  for (double p : {99.0, 99.9, 100.03, 100.5}) {
    CHECK(std::abs(sol.amplitude(Channel::RR, p) - sol.amplitude(Channel::LL, p)) < 1e-12);
    CHECK(std::abs(sol.amplitude(Channel::RL, p)) ==
          Approx(std::sqrt(2.0) * std::abs(sol.amplitude(Channel::RR, p))).epsilon(1e-10));
    CHECK(sol.spectrum_right(p) == Approx(sol.spectrum_left(p)).epsilon(1e-10));
  }
}

TEST_CASE("bosonic symmetry of same-direction channels") {
  const TwoPhotonSolution sol = scatter_two(validate(qubit_chain(2, 0.25, pi / 4)), 100.2, unsampled());
  for (double p : {99.1, 100.0, 100.35}) {
    CHECK(std::abs(sol.amplitude(Channel::RR, p) - sol.amplitude(Channel::RR, sol.E - p)) < 1e-12);
    CHECK(std::abs(sol.amplitude(Channel::LL, p) - sol.amplitude(Channel::LL, sol.E - p)) < 1e-12);
  }
  for (double x : {0.5, 3.0})
    for (double y : {0.2, 4.1}) {
      const double x1 = sol.x_max + x, x2 = sol.x_max + y;
      CHECK(std::abs(bound_realspace(sol, Channel::RR, x1, x2) - bound_realspace(sol, Channel::RR, x2, x1)) <
            1e-12);
    }
}

TEST_CASE("bound part decays at the slowest pole rate") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.25)), 100.04, unsampled());
  const double rate = sol.slowest_rate();
  const double s1 = 150.0, s2 = 250.0;
  const double a = std::norm(sol.bound_relative(Channel::RR, s1));
  const double b = std::norm(sol.bound_relative(Channel::RR, s2));
  CHECK(std::log(a / b) / (s2 - s1) == Approx(2.0 * rate).epsilon(1e-3));
}

TEST_CASE("real-space bound part rejects points inside the scattering region") {
  const TwoPhotonSolution sol = scatter_two(validate(qubit_chain(2, 0.25, pi / 2)), 100.2, unsampled());
  CHECK_THROWS_AS(bound_realspace(sol, Channel::RR, sol.x_max - 1e-3, sol.x_max + 1.0), Error);
  CHECK_NOTHROW(bound_realspace(sol, Channel::RR, sol.x_max, sol.x_max + 1.0));
  CHECK_NOTHROW(bound_realspace(sol, Channel::RL, sol.x_max + 1.0, sol.x_min - 1.0));
}

TEST_CASE("adaptive p grid reproduces the amplitude") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.25)), 100.04);
  REQUIRE(sol.p_grid.size() > 100);
  CHECK(sol.grid_error < 1e-6);
  CHECK(std::is_sorted(sol.p_grid.begin(), sol.p_grid.end()));
  for (std::size_t i = 0; i < sol.p_grid.size(); i += 97)
    CHECK(std::abs(sol.b_rr[i] - sol.amplitude(Channel::RR, sol.p_grid[i])) < 1e-14);
}

TEST_CASE("finite repulsion leaves the spectrum within 0.1%") {
  for (const ValidatedConfig& cfg : standard()) {
    GridOptions finite = unsampled();
    finite.repulsion = 1e5;
    const TwoPhotonSolution hard = scatter_two(cfg, 100.05, unsampled());
    const TwoPhotonSolution soft = scatter_two(cfg, 100.05, finite);
    for (double w : {99.5, 100.0, 100.07})
      CHECK(soft.spectrum_left(w) == Approx(hard.spectrum_left(w)).epsilon(1e-3));
  }
}

TEST_CASE("exports list every channel") {
  const TwoPhotonSolution sol = scatter_two(validate(single_qubit(0.25)), 100.04);
  std::ostringstream csv, dump;
  write_csv(csv, sol);
  write_dump(dump, sol);
  CHECK(csv.str().find("Re_B_RR") != std::string::npos);
  CHECK(dump.str().find("E ") != std::string::npos);
  CHECK(channels(validate(qubit_with_mirror(0.25, pi / 2))).size() == 1);
  CHECK(channels(validate(single_qubit(0.25))).size() == 3);
}
