#include "wqed/observables.hpp"

#include "wqed/parallel.hpp"
#include "wqed/quadrature.hpp"

#include <boost/math/tools/minima.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace wqed {

namespace {

GridOptions unsampled() {
  GridOptions g;
  g.sample = false;
  return g;
}

double joint_detection(const TwoPhotonSolution& sol, Direction dir, double t, double x0) {
  const double single = dir == Direction::R ? std::norm(sol.t) : std::norm(sol.r);
  if (single * single < 1e-12)
    throw Error(ErrorCode::DomainError, "single-photon intensity vanishes; g2 is undefined");
  const cplx amp = dir == Direction::R ? outgoing_realspace(sol, Channel::RR, x0, x0 + t)
                                       : outgoing_realspace(sol, Channel::LL, x0, x0 - t);
  return std::norm(amp) / (single * single);
}

} // namespace

Direction parse_direction(std::string_view text) {
  if (text == "R" || text == "r")
    return Direction::R;
  if (text == "L" || text == "l")
    return Direction::L;
  throw Error(ErrorCode::InvalidParameter, "direction must be R or L");
}

std::string_view to_string(Direction d) { return d == Direction::R ? "R" : "L"; }

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

CurveSeries power_spectra(const ValidatedConfig& cfg, double k_in, std::span<const double> grid) {
  const TwoPhotonSolution sol = scatter_two(cfg, k_in, unsampled());
  CurveSeries out;
  out.axis_name = "omega";
  out.axis.assign(grid.begin(), grid.end());
  out.config_hash = cfg.hash();
  out.tolerances["k_in"] = k_in;
  std::vector<double> sr, sl;
  for (double w : grid) {
    sr.push_back(sol.spectrum_right(w));
    sl.push_back(sol.spectrum_left(w));
  }
  out.add_column("S_R", std::move(sr));
  out.add_column("S_L", std::move(sl));
  return out;
}

CurveSeries power_spectrum(const ValidatedConfig& cfg, double k_in, Direction dir,
                           std::span<const double> grid) {
  CurveSeries both = power_spectra(cfg, k_in, grid);
  CurveSeries out;
  out.axis_name = both.axis_name;
  out.axis = both.axis;
  out.config_hash = both.config_hash;
  out.tolerances = both.tolerances;
  const std::string name = dir == Direction::R ? "S_R" : "S_L";
  out.add_column(name, both.column(name));
  return out;
}

FluxResult integrate_flux(const TwoPhotonSolution& sol, const FluxOptions& opt) {
  std::vector<std::pair<double, double>> features;
  double narrowest = std::numeric_limits<double>::infinity();
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(sol.model.hamiltonian, false);
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    const cplx lam = es.eigenvalues()(j);
    const double w = std::max(std::abs(lam.imag()), 1e-9);
    features.emplace_back(lam.real(), w);
    features.emplace_back(sol.E - lam.real(), w);
    narrowest = std::min(narrowest, w);
  }
  features.emplace_back(0.5 * sol.E, narrowest);
  features.emplace_back(sol.k_in, narrowest);

  QuadratureResult rep;
  const double value = integrate_panels<double>(
      [&](double w) { return sol.spectrum_right(w) + sol.spectrum_left(w); }, feature_edges(features),
      [](double v) { return std::abs(v); }, opt.abs_tol, opt.rel_tol, &rep, opt.max_depth);
  return FluxResult{value, rep.error, rep.evaluations, rep.converged};
}

double inelastic_flux(const ValidatedConfig& cfg, double k_in, const FluxOptions& opt) {
  const FluxResult r = integrate_flux(scatter_two(cfg, k_in, unsampled()), opt);
  if (!r.converged)
    throw Error(ErrorCode::ConvergenceFailure,
                "flux quadrature did not converge at k = " + format_double(k_in));
  return r.value;
}

CurveSeries flux_curve(const ValidatedConfig& cfg, std::span<const double> k_grid, unsigned jobs,
                       const FluxOptions& opt) {
  CurveSeries out;
  out.axis_name = "k";
  out.axis.assign(k_grid.begin(), k_grid.end());
  out.config_hash = cfg.hash();
  out.tolerances["abs_tol"] = opt.abs_tol;
  out.tolerances["rel_tol"] = opt.rel_tol;
  std::vector<double> f(k_grid.size());
  out.point_flags.assign(k_grid.size(), "");
  parallel_for(k_grid.size(), jobs, [&](std::size_t i) {
    try {
      f[i] = inelastic_flux(cfg, k_grid[i], opt);
    } catch (const Error& e) {
      f[i] = std::numeric_limits<double>::quiet_NaN();
      out.point_flags[i] = to_string(e.code());
    }
  });
  out.add_column("F", std::move(f));
  return out;
}

PeakReport find_k_peak(const ValidatedConfig& cfg, std::optional<std::pair<double, double>> window,
                       unsigned jobs) {
  const double gamma = cfg.gamma_ref();
  const double w0 = cfg.k0();
  const auto [lo, hi] = window.value_or(std::pair{w0 - 3.0 * gamma, w0 + 3.0 * gamma});
  if (!(hi > lo))
    throw Error(ErrorCode::InvalidParameter, "empty search window");
  const double rabi = cfg.rabi();
  double step = gamma / 50.0;
  if (rabi > 0.0)
    step = std::min(step, rabi * rabi / (20.0 * gamma));
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  const std::vector<double> ks = linspace(lo, hi, n);
  std::vector<double> fs(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      fs[i] = inelastic_flux(cfg, ks[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularSystem)
        throw;
      fs[i] = 0.0; // isolated singular energy; neighbours carry the scan
    }
  });

  // Candidate local maxima, best first.
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = i == 0 || fs[i] >= fs[i - 1];
    const bool right = i + 1 == n || fs[i] >= fs[i + 1];
    if (left && right)
      cand.push_back(i);
  }
  std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return fs[a] > fs[b]; });
  if (cand.empty() || !(fs[cand.front()] > 1e-10 / gamma))
    throw Error(ErrorCode::DomainError, "no inelastic-flux maximum above 1e-10 in the search window");

  auto refine = [&](std::size_t i) {
    const double a = ks[i > 0 ? i - 1 : i] - w0;
    const double b = ks[i + 1 < n ? i + 1 : i] - w0;
    auto neg = [&](double z) { return -inelastic_flux(cfg, w0 + z); };
    auto [z, negf] = boost::math::tools::brent_find_minima(neg, a, b, std::numeric_limits<double>::digits / 2);
    if (fs[i] > -negf)
      return std::pair{ks[i], fs[i]};
    return std::pair{w0 + z, -negf};
  };

  PeakReport rep;
  rep.grid_points = n;
  auto [k1, f1] = refine(cand.front());
  if (cand.size() > 1) {
    auto [k2, f2] = refine(cand[1]);
    if (std::abs(f1 - f2) < 1e-9) {
      const double ws = cfg.omega_s(0);
      if (k2 > ws && k1 <= ws)
        std::swap(k1, k2), std::swap(f1, f2);
      rep.twin = k2;
    } else if (f2 > f1) {
      std::swap(k1, k2), std::swap(f1, f2);
    }
  }
  rep.k_peak = k1;
  rep.f_peak = f1;
  const SinglePhotonSolution s = solve_single(cfg, k1);
  rep.t_at_peak = cfg.semi_infinite() ? s.reflection() : s.transmission();
  return rep;
}

void write_peak_report(std::ostream& out, const PeakReport& rep) {
  nlohmann::ordered_json j;
  j["k_peak"] = rep.k_peak;
  j["F_peak"] = rep.f_peak;
  j["T_at_peak"] = rep.t_at_peak;
  if (rep.twin)
    j["twin"] = *rep.twin;
  j["grid_points"] = rep.grid_points;
  out << j.dump(2) << '\n';
}

double g2_value(const TwoPhotonSolution& sol, Direction dir, double t) {
  if (dir == Direction::R && sol.semi_infinite)
    throw Error(ErrorCode::DomainError, "no transmitted photons in front of a mirror");
  const double x0 = dir == Direction::R ? sol.x_max : sol.x_min;
  return joint_detection(sol, dir, t, x0);
}

CurveSeries g2(const ValidatedConfig& cfg, double k_in, Direction dir, std::span<const double> t_grid) {
  if (dir == Direction::R && cfg.semi_infinite())
    throw Error(ErrorCode::DomainError, "no transmitted photons in front of a mirror");
  for (double t : t_grid)
    if (!(t >= 0.0))
      throw Error(ErrorCode::InvalidParameter, "g2 delays must be nonnegative");
  const TwoPhotonSolution sol = scatter_two(cfg, k_in, unsampled());
  const double shift = 7.3 / cfg.gamma_ref();
  const double xa = dir == Direction::R ? sol.x_max : sol.x_min;
  const double xb = dir == Direction::R ? xa + shift : xa - shift;

  CurveSeries out;
  out.axis_name = "t";
  out.axis.assign(t_grid.begin(), t_grid.end());
  out.config_hash = cfg.hash();
  out.tolerances["k_in"] = k_in;
  out.tolerances["x0_agreement"] = 1e-8;
  std::vector<double> values;
  double worst = 0.0;
  for (double t : t_grid) {
    const double a = joint_detection(sol, dir, t, xa);
    const double b = joint_detection(sol, dir, t, xb);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    values.push_back(a);
  }
  if (worst > 1e-8)
    throw Error(ErrorCode::ConvergenceFailure, "g2 depends on the detector position");
  out.tolerances["x0_deviation"] = worst;
  out.add_column("g2", std::move(values));
  return out;
}

} // namespace wqed
