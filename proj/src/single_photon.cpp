#include "wqed/single_photon.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace wqed {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double kSingularCondition = 1e14;

double condition_number(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0))
    return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

// e^{i k x} under the chosen phase model.
cplx propagation(const ValidatedConfig& cfg, PhaseModel model, double k, double x) {
  const double kk = model == PhaseModel::Exact ? k : cfg.k0();
  return std::exp(I * kk * x);
}

} // namespace

SinglePhotonSolution solve_single(const ValidatedConfig& cfg, double k, PhaseModel model) {
  if (!(k > 0.0))
    throw Error(ErrorCode::DomainError, "photon momentum must be positive");
  const std::size_t n = cfg.size();
  const bool three = cfg.three_level();
  const bool semi = cfg.semi_infinite();
  const std::size_t dim = (three ? 4 : 3) * n;
  const double half_rabi = cfg.rabi() / 2.0;

  // Unknown layout: A_1..A_N | B_0..B_{N-1} | e_1..e_N | s_1..s_N.
  auto idx_a = [&](std::size_t region) { return region - 1; };
  auto idx_b = [&](std::size_t region) { return n + region; };
  auto idx_e = [&](std::size_t q) { return 2 * n + q; };
  auto idx_s = [&](std::size_t q) { return 3 * n + q; };

  // Hard wall: B_N = -A_N e^{2 i k x_M}.
  const cplx wall = semi ? -propagation(cfg, model, k, 2.0 * *cfg.mirror_position()) : cplx{};

  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim);

  auto add_a = [&](std::size_t row, std::size_t region, cplx coef) {
    if (region == 0)
      rhs(row) -= coef; // A_0 = 1, incident wave
    else
      m(row, idx_a(region)) += coef;
  };
  auto add_b = [&](std::size_t row, std::size_t region, cplx coef) {
    if (region < n)
      m(row, idx_b(region)) += coef;
    else if (semi)
      m(row, idx_a(n)) += coef * wall;
    // infinite: B_N = 0
  };

  std::size_t row = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t left = q, right = q + 1; // regions adjacent to qubit q
    const double v = cfg.coupling(q);
    const double x = cfg.qubit(q).position;
    const cplx ph = propagation(cfg, model, k, x);

    // A_right - A_left = -i V e e^{-ikx}
    add_a(row, right, 1.0);
    add_a(row, left, -1.0);
    m(row, idx_e(q)) += I * v / ph;
    ++row;
    // B_left - B_right = -i V e e^{ikx}
    add_b(row, left, 1.0);
    add_b(row, right, -1.0);
    m(row, idx_e(q)) += I * v * ph;
    ++row;
    // (k - w_e) e - (W/2) s - V * (average field at x) = 0
    m(row, idx_e(q)) += k - cfg.qubit(q).omega_e;
    if (three)
      m(row, idx_s(q)) -= half_rabi;
    add_a(row, left, -0.5 * v * ph);
    add_a(row, right, -0.5 * v * ph);
    add_b(row, left, -0.5 * v / ph);
    add_b(row, right, -0.5 * v / ph);
    ++row;
    if (three) {
      m(row, idx_s(q)) += k - cfg.omega_s(q);
      m(row, idx_e(q)) -= half_rabi;
      ++row;
    }
  }

  const double cond = condition_number(m);
  if (!(cond < kSingularCondition)) {
    std::ostringstream msg;
    msg << "single-photon matching system is singular at k = " << format_double(k)
        << " (condition number " << cond << ")";
    throw Error(ErrorCode::SingularSystem, msg.str());
  }
  const Eigen::VectorXcd sol = m.partialPivLu().solve(rhs);

  SinglePhotonSolution out;
  out.k = k;
  out.condition = cond;
  out.e = sol.segment(2 * n, n);
  out.s = three ? Eigen::VectorXcd(sol.segment(3 * n, n)) : Eigen::VectorXcd::Zero(n);

  auto a_of = [&](std::size_t region) -> cplx { return region == 0 ? cplx{1.0} : sol(idx_a(region)); };
  auto b_of = [&](std::size_t region) -> cplx {
    if (region < n)
      return sol(idx_b(region));
    return semi ? wall * sol(idx_a(n)) : cplx{};
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r <= n; ++r) {
    FieldRegion reg;
    reg.left = r == 0 ? -inf : cfg.qubit(r - 1).position;
    reg.right = r == n ? (semi ? *cfg.mirror_position() : inf) : cfg.qubit(r).position;
    reg.right_amp = a_of(r);
    reg.left_amp = b_of(r);
    out.regions.push_back(reg);
  }
  out.r = b_of(0);
  out.t = semi ? cplx{} : a_of(n);
  return out;
}

CurveSeries transmission_curve(const ValidatedConfig& cfg, std::span<const double> k_grid,
                               PhaseModel model) {
  for (std::size_t i = 1; i < k_grid.size(); ++i)
    if (!(k_grid[i] > k_grid[i - 1]))
      throw Error(ErrorCode::InvalidParameter, "k grid must be strictly increasing");

  CurveSeries out;
  out.axis_name = "k";
  out.axis.assign(k_grid.begin(), k_grid.end());
  out.config_hash = cfg.hash();
  out.tolerances["singular_condition"] = kSingularCondition;
  out.tolerances["markovian_phases"] = model == PhaseModel::Markovian ? 1.0 : 0.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> T, ret, imt, rer, imr;
  out.point_flags.assign(k_grid.size(), "");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    try {
      const auto s = solve_single(cfg, k_grid[i], model);
      T.push_back(s.transmission());
      ret.push_back(s.t.real());
      imt.push_back(s.t.imag());
      rer.push_back(s.r.real());
      imr.push_back(s.r.imag());
    } catch (const Error& e) {
      out.point_flags[i] = to_string(e.code());
      for (auto* v : {&T, &ret, &imt, &rer, &imr})
        v->push_back(nan);
    }
  }
  out.add_column("T", std::move(T));
  out.add_column("Re_t", std::move(ret));
  out.add_column("Im_t", std::move(imt));
  out.add_column("Re_r", std::move(rer));
  out.add_column("Im_r", std::move(imr));
  return out;
}

TimeDelay time_delay(const ValidatedConfig& cfg, double k, PhaseModel model, double h) {
  const bool semi = cfg.semi_infinite();
  auto amplitude = [&](double kk) {
    const auto s = solve_single(cfg, kk, model);
    return semi ? s.r : s.t;
  };
  if (std::abs(amplitude(k)) < 1e-12)
    throw Error(ErrorCode::UndefinedPhase,
                "scattering amplitude vanishes at k = " + format_double(k) + "; phase undefined");
  auto slope = [&](double step) {
    return std::arg(amplitude(k + step) / amplitude(k - step)) / (2.0 * step);
  };
  const double coarse = slope(h);
  const double fine = slope(h / 2.0);
  return TimeDelay{(4.0 * fine - coarse) / 3.0, std::abs(fine - coarse)};
}

EffectiveModel effective_model(const ValidatedConfig& cfg) {
  const std::size_t n = cfg.size();
  const std::size_t dim = cfg.mode_count();
  const double k0 = cfg.k0();
  const auto xm = cfg.mirror_position();

  EffectiveModel out;
  out.k0 = k0;
  out.semi_infinite = xm.has_value();
  out.hamiltonian = Eigen::MatrixXcd::Zero(dim, dim);
  out.drive = Eigen::VectorXcd::Zero(dim);
  out.emit_right = Eigen::VectorXcd::Zero(dim);
  out.emit_left = Eigen::VectorXcd::Zero(dim);
  out.bare_reflection = xm ? -std::exp(2.0 * I * k0 * *xm) : cplx{};

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t e = cfg.e_mode(i);
    out.hamiltonian(e, e) += cfg.qubit(i).omega_e;
    if (cfg.three_level()) {
      const std::size_t s = cfg.s_mode(i);
      out.hamiltonian(s, s) += cfg.omega_s(i);
      out.hamiltonian(e, s) += cfg.rabi() / 2.0;
      out.hamiltonian(s, e) += cfg.rabi() / 2.0;
    }
    const double vi = cfg.coupling(i);
    const double xi = cfg.qubit(i).position;
    for (std::size_t j = 0; j < n; ++j) {
      const double vj = cfg.coupling(j);
      const double xj = cfg.qubit(j).position;
      cplx kernel = std::exp(I * k0 * std::abs(xi - xj));
      if (xm)
        kernel -= std::exp(I * k0 * (2.0 * *xm - xi - xj));
      out.hamiltonian(e, cfg.e_mode(j)) += -I * vi * vj * kernel;
    }
    const cplx in_phase = std::exp(I * k0 * xi);
    if (xm) {
      const cplx standing = vi * (in_phase - std::exp(I * k0 * (2.0 * *xm - xi)));
      out.drive(e) = standing;
      out.emit_left(e) = standing;
    } else {
      out.drive(e) = vi * in_phase;
      out.emit_left(e) = vi * in_phase;
      out.emit_right(e) = vi / in_phase;
    }
  }
  return out;
}

MarkovAmplitudes markov_amplitudes(const EffectiveModel& model, cplx k) {
  const auto dim = static_cast<Eigen::Index>(model.dim());
  const Eigen::MatrixXcd a = k * Eigen::MatrixXcd::Identity(dim, dim) - model.hamiltonian;
  MarkovAmplitudes out;
  out.modes = a.partialPivLu().solve(model.drive);
  const cplx emitted_left = (model.emit_left.transpose() * out.modes)(0);
  if (model.semi_infinite) {
    out.t = 0.0;
    out.r = model.bare_reflection - I * emitted_left;
  } else {
    out.t = 1.0 - I * (model.emit_right.transpose() * out.modes)(0);
    out.r = -I * emitted_left;
  }
  return out;
}

} // namespace wqed
