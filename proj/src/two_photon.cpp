#include "wqed/two_photon.hpp"

#include "wqed/quadrature.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace wqed {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double kSingularG0 = 1e12;

Eigen::MatrixXcd pair_hamiltonian(const Eigen::MatrixXcd& h) {
  const auto n = h.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  return Eigen::kroneckerProduct(h, id).eval() + Eigen::kroneckerProduct(id, h).eval();
}

Eigen::MatrixXcd pair_resolvent_apply(const Eigen::MatrixXcd& h, cplx E, const Eigen::MatrixXcd& rhs,
                                      bool transpose = false) {
  const auto n2 = h.rows() * h.rows();
  Eigen::MatrixXcd a = E * Eigen::MatrixXcd::Identity(n2, n2) - pair_hamiltonian(h);
  if (transpose)
    a.transposeInPlace();
  return a.partialPivLu().solve(rhs);
}

// Row-major flattening index of the mode pair (a, b).
Eigen::Index pair_index(Eigen::Index a, Eigen::Index b, Eigen::Index n) { return a * n + b; }

Eigen::VectorXcd flatten(const Eigen::MatrixXcd& m) {
  const auto n = m.rows();
  Eigen::VectorXcd v(n * n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      v(pair_index(a, b, n)) = m(a, b);
  return v;
}

Eigen::MatrixXcd unflatten(const Eigen::VectorXcd& v, Eigen::Index n) {
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      m(a, b) = v(pair_index(a, b, n));
  return m;
}

double condition_number(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
}

const Eigen::VectorXcd& emission(const EffectiveModel& m, bool right) {
  return right ? m.emit_right : m.emit_left;
}

std::pair<bool, bool> directions(Channel ch) {
  switch (ch) {
  case Channel::RR:
    return {true, true};
  case Channel::LL:
    return {false, false};
  case Channel::RL:
    break;
  }
  return {true, false};
}

// a(p) = -i (p - H)^{-T} w : overlap of qubit modes with an outgoing photon.
Eigen::VectorXcd outgoing_overlap(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& w, cplx p) {
  const auto n = h.rows();
  Eigen::MatrixXcd a = p * Eigen::MatrixXcd::Identity(n, n) - h;
  return -I * a.transpose().partialPivLu().solve(w);
}

struct EigenSystem {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors; // columns normalized to v^T v = 1
  bool simple = true;
};

EigenSystem complex_symmetric_eigen(const Eigen::MatrixXcd& h) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
  EigenSystem out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  double scale = 1.0;
  for (Eigen::Index j = 0; j < out.values.size(); ++j)
    scale = std::max(scale, std::abs(out.values(j).imag()));
  for (Eigen::Index j = 0; j < out.values.size(); ++j) {
    for (Eigen::Index k = j + 1; k < out.values.size(); ++k)
      if (std::abs(out.values(j) - out.values(k)) < 1e-6 * scale)
        out.simple = false;
    const cplx norm2 = (out.vectors.col(j).transpose() * out.vectors.col(j))(0);
    if (std::abs(norm2) < 1e-8)
      out.simple = false;
    else
      out.vectors.col(j) /= std::sqrt(norm2);
  }
  return out;
}

} // namespace

std::string_view to_string(Channel ch) {
  switch (ch) {
  case Channel::RR:
    return "RR";
  case Channel::LL:
    return "LL";
  case Channel::RL:
    return "RL";
  }
  return "?";
}

std::vector<Channel> channels(const ValidatedConfig& cfg) {
  if (cfg.semi_infinite())
    return {Channel::LL};
  return {Channel::RR, Channel::LL, Channel::RL};
}

DoublySubspace doubly_subspace(const ValidatedConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.mode_count());
  DoublySubspace out;
  for (std::size_t q = 0; q < cfg.size(); ++q) {
    out.states.push_back({q, DoublySubspace::Kind::EE});
    if (cfg.three_level()) {
      out.states.push_back({q, DoublySubspace::Kind::SS});
      out.states.push_back({q, DoublySubspace::Kind::ES});
    }
  }
  out.embedding = Eigen::MatrixXd::Zero(n * n, static_cast<Eigen::Index>(out.states.size()));
  for (std::size_t c = 0; c < out.states.size(); ++c) {
    const auto& st = out.states[c];
    const auto e = static_cast<Eigen::Index>(cfg.e_mode(st.qubit));
    const auto col = static_cast<Eigen::Index>(c);
    switch (st.kind) {
    case DoublySubspace::Kind::EE:
      out.embedding(pair_index(e, e, n), col) = 1.0;
      break;
    case DoublySubspace::Kind::SS: {
      const auto s = static_cast<Eigen::Index>(cfg.s_mode(st.qubit));
      out.embedding(pair_index(s, s, n), col) = 1.0;
      break;
    }
    case DoublySubspace::Kind::ES: {
      const auto s = static_cast<Eigen::Index>(cfg.s_mode(st.qubit));
      out.embedding(pair_index(e, s, n), col) = std::numbers::sqrt2 / 2.0;
      out.embedding(pair_index(s, e, n), col) = std::numbers::sqrt2 / 2.0;
      break;
    }
    }
  }
  return out;
}

Eigen::MatrixXcd g0_matrix(const ValidatedConfig& cfg, double E, G0Method method) {
  if (method == G0Method::Quadrature)
    return g0_quadrature(cfg, E).value;
  const EffectiveModel model = effective_model(cfg);
  const DoublySubspace sub = doubly_subspace(cfg);
  const Eigen::MatrixXcd p = sub.embedding.cast<cplx>();
  return p.transpose() * pair_resolvent_apply(model.hamiltonian, E, p);
}

G0QuadratureReport g0_quadrature(const ValidatedConfig& cfg, double E, const G0QuadratureOptions& opt) {
  const EffectiveModel model = effective_model(cfg);
  const DoublySubspace sub = doubly_subspace(cfg);
  const auto n = static_cast<Eigen::Index>(model.dim());
  const auto dim = static_cast<Eigen::Index>(sub.dim());
  const EigenSystem eig = complex_symmetric_eigen(model.hamiltonian);
  if (!eig.simple)
    throw Error(ErrorCode::DomainError, "quadrature path needs a diagonalizable effective Hamiltonian");

  // Incident channels: from the left always, from the right on an open guide.
  std::vector<Eigen::VectorXcd> sources{model.drive};
  if (!model.semi_infinite)
    sources.push_back(model.drive_from_right());
  // Scattering-state qubit amplitudes u(k) = (k - H)^{-1} d / sqrt(2 pi),
  // expanded over the eigenbasis for speed.
  std::vector<Eigen::VectorXcd> projections;
  for (const auto& d : sources)
    projections.push_back(eig.vectors.transpose() * d / std::sqrt(2.0 * std::numbers::pi));
  auto state = [&](std::size_t nu, double k) {
    Eigen::VectorXcd coef = projections[nu];
    for (Eigen::Index j = 0; j < n; ++j)
      coef(j) /= (k - eig.values(j));
    return Eigen::VectorXcd(eig.vectors * coef);
  };

  const Eigen::MatrixXd& emb = sub.embedding;
  // h(K) = sum_channels int dq f f^dagger at k1 = K/2 + q, k2 = K/2 - q.
  auto density = [&](double K, double q) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(dim * dim);
    for (std::size_t a = 0; a < sources.size(); ++a) {
      const Eigen::VectorXcd u1 = state(a, 0.5 * K + q);
      for (std::size_t b = 0; b < sources.size(); ++b) {
        const Eigen::VectorXcd u2 = state(b, 0.5 * K - q);
        Eigen::VectorXcd f(dim);
        for (Eigen::Index c = 0; c < dim; ++c) {
          cplx s{};
          for (Eigen::Index x = 0; x < n; ++x)
            for (Eigen::Index y = 0; y < n; ++y) {
              const double w = emb(pair_index(x, y, n), c);
              if (w != 0.0)
                s += w * u1(x) * u2(y);
            }
          f(c) = s;
        }
        for (Eigen::Index r = 0; r < dim; ++r)
          for (Eigen::Index c = 0; c < dim; ++c)
            acc(r * dim + c) += f(r) * std::conj(f(c));
      }
    }
    return acc;
  };
  auto vnorm = [](const Eigen::VectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };

  std::vector<std::pair<double, double>> single_features;
  for (Eigen::Index j = 0; j < n; ++j)
    single_features.emplace_back(eig.values(j).real(), std::abs(eig.values(j).imag()));

  QuadratureResult inner_total;
  auto inner = [&](double K) {
    std::vector<std::pair<double, double>> feats;
    for (const auto& [c, w] : single_features) {
      feats.emplace_back(c - 0.5 * K, w);
      feats.emplace_back(0.5 * K - c, w);
    }
    QuadratureResult rep;
    Eigen::VectorXcd v = integrate_panels<Eigen::VectorXcd>(
        [&](double q) { return density(K, q); }, feature_edges(feats), vnorm,
        opt.abs_tol, opt.rel_tol, &rep);
    inner_total.evaluations += rep.evaluations;
    inner_total.converged = inner_total.converged && rep.converged;
    return v;
  };

  const double gamma = cfg.gamma_ref();
  const double window = gamma;
  const Eigen::VectorXcd hE = inner(E);
  const std::size_t m = opt.epsilons.size();
  auto outer_integrand = [&](double K) {
    const Eigen::VectorXcd hk = inner(K);
    const bool near = std::abs(K - E) < window;
    Eigen::VectorXcd out(static_cast<Eigen::Index>(m) * dim * dim);
    for (std::size_t e = 0; e < m; ++e) {
      const cplx denom = E + I * opt.epsilons[e] * gamma - K;
      out.segment(static_cast<Eigen::Index>(e) * dim * dim, dim * dim) =
          (near ? Eigen::VectorXcd(hk - hE) : hk) / denom;
    }
    return out;
  };

  std::vector<std::pair<double, double>> pair_features;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const cplx s = eig.values(i) + eig.values(j);
      pair_features.emplace_back(s.real(), std::abs(s.imag()));
    }
  std::vector<double> edges = feature_edges(pair_features);
  for (double x : {E - window, E, E + window})
    edges.push_back(x);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  QuadratureResult outer_rep;
  const Eigen::VectorXcd raw = integrate_panels<Eigen::VectorXcd>(
      outer_integrand, edges, vnorm, opt.abs_tol, opt.rel_tol, &outer_rep);

  G0QuadratureReport report;
  report.evaluations = inner_total.evaluations;
  report.converged = inner_total.converged && outer_rep.converged;
  std::vector<double> eps;
  for (std::size_t e = 0; e < m; ++e) {
    const double ep = opt.epsilons[e] * gamma;
    // int_{E-w}^{E+w} dK / (E + i eps - K) = -2 i atan(w / eps)
    Eigen::VectorXcd v = raw.segment(static_cast<Eigen::Index>(e) * dim * dim, dim * dim) +
                         hE * (-2.0 * I * std::atan(window / ep));
    report.at_eps.push_back(unflatten(v, dim));
    eps.push_back(ep);
  }
  // Polynomial extrapolation in eps to eps = 0 (Neville).
  std::vector<Eigen::MatrixXcd> table = report.at_eps;
  for (std::size_t level = 1; level < m; ++level)
    for (std::size_t i = 0; i + level < m; ++i)
      table[i] = (eps[i + level] * table[i] - eps[i] * table[i + 1]) / (eps[i + level] - eps[i]);
  report.value = table[0];
  if (m >= 2) {
    const double scale = std::max(report.value.norm(), 1e-300);
    report.error_estimate = (report.value - report.at_eps.back()).norm() / scale;
  }
  return report;
}

Eigen::MatrixXcd t_matrix(const ValidatedConfig& cfg, double E, std::optional<double> repulsion) {
  const Eigen::MatrixXcd g0 = g0_matrix(cfg, E);
  const auto dim = g0.rows();
  if (repulsion) {
    if (!(*repulsion > 0.0))
      throw Error(ErrorCode::InvalidParameter, "repulsion must be positive");
    const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(dim, dim) - *repulsion * g0;
    return *repulsion * a.partialPivLu().inverse();
  }
  const double cond = condition_number(g0);
  if (!(cond < kSingularG0)) {
    std::ostringstream msg;
    msg << "pair propagator is singular at E = " << format_double(E) << " (condition number " << cond
        << "); perturb E slightly";
    throw Error(ErrorCode::SingularSystem, msg.str());
  }
  return -g0.partialPivLu().inverse();
}

TwoPhotonSolution scatter_two(const ValidatedConfig& cfg, double k_in, const GridOptions& grid) {
  if (!(k_in > 0.0))
    throw Error(ErrorCode::DomainError, "incoming momentum must be positive");
  TwoPhotonSolution sol;
  sol.config_hash = cfg.hash();
  sol.k_in = k_in;
  sol.E = 2.0 * k_in;
  sol.semi_infinite = cfg.semi_infinite();
  sol.x_min = cfg.qubit(0).position;
  sol.x_max = cfg.mirror_position() ? *cfg.mirror_position() : cfg.qubit(cfg.size() - 1).position;
  sol.model = effective_model(cfg);
  const auto n = static_cast<Eigen::Index>(sol.model.dim());

  const MarkovAmplitudes single = markov_amplitudes(sol.model, k_in);
  sol.t = single.t;
  sol.r = single.r;
  sol.elastic_rr = sol.t * sol.t;
  sol.elastic_ll = sol.r * sol.r;
  sol.elastic_rl = 2.0 * sol.t * sol.r;

  sol.subspace = doubly_subspace(cfg);
  sol.t_matrix = t_matrix(cfg, sol.E, grid.repulsion);
  const Eigen::MatrixXcd p = sol.subspace.embedding.cast<cplx>();
  const Eigen::MatrixXcd free_pair = single.modes * single.modes.transpose();
  sol.incoming = p.transpose() * flatten(free_pair);
  sol.correction = sol.t_matrix * sol.incoming;
  sol.pair_state = unflatten(p * sol.correction, n);

  auto emission_pair = [&](Channel ch) {
    const auto [ra, rb] = directions(ch);
    const Eigen::VectorXcd w =
        flatten(emission(sol.model, ra) * emission(sol.model, rb).transpose());
    return unflatten(pair_resolvent_apply(sol.model.hamiltonian, sol.E, w, true), n);
  };
  for (Channel ch : channels(cfg)) {
    Eigen::MatrixXcd em = emission_pair(ch);
    (ch == Channel::RR ? sol.emission_rr : ch == Channel::LL ? sol.emission_ll : sol.emission_rl) =
        std::move(em);
  }

  // Pole table: p = lambda_j from the first photon and p = E - lambda_j from
  // the second.
  const EigenSystem eig = complex_symmetric_eigen(sol.model.hamiltonian);
  sol.simple_poles = eig.simple;
  for (Channel ch : channels(cfg)) {
    const auto [ra, rb] = directions(ch);
    const double weight = ch == Channel::RL ? std::numbers::sqrt2 : 1.0;
    const cplx pref = weight * I / (2.0 * std::numbers::pi);
    auto& table = ch == Channel::RR ? sol.poles_rr : ch == Channel::LL ? sol.poles_ll : sol.poles_rl;
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx lam = eig.values(j);
      PoleTerm first{lam, cplx{}};
      PoleTerm second{sol.E - lam, cplx{}};
      if (eig.simple) {
        const Eigen::VectorXcd v = eig.vectors.col(j);
        const cplx wa = (v.transpose() * emission(sol.model, ra))(0);
        const cplx wb = (v.transpose() * emission(sol.model, rb))(0);
        const Eigen::VectorXcd ab =
            outgoing_overlap(sol.model.hamiltonian, emission(sol.model, rb), sol.E - lam);
        const Eigen::VectorXcd aa =
            outgoing_overlap(sol.model.hamiltonian, emission(sol.model, ra), sol.E - lam);
        first.residue = pref * (-I * wa) * (v.transpose() * sol.pair_state * ab)(0);
        second.residue = pref * (I * wb) * (aa.transpose() * sol.pair_state * v)(0);
      }
      table.push_back(first);
      table.push_back(second);
    }
  }

  sol.eigenvalues = eig.values;
  sol.diagonal_form = eig.simple;
  if (eig.simple) {
    for (Channel ch : channels(cfg)) {
      const auto [ra, rb] = directions(ch);
      const double weight = ch == Channel::RL ? std::numbers::sqrt2 : 1.0;
      const Eigen::VectorXcd pa = eig.vectors.transpose() * emission(sol.model, ra);
      const Eigen::VectorXcd pb = eig.vectors.transpose() * emission(sol.model, rb);
      const Eigen::MatrixXcd core = eig.vectors.transpose() * sol.pair_state * eig.vectors;
      Eigen::MatrixXcd kern = -(weight * I / (2.0 * std::numbers::pi)) *
                              (pa.asDiagonal() * core * pb.asDiagonal()).eval();
      (ch == Channel::RR ? sol.kernel_rr : ch == Channel::LL ? sol.kernel_ll : sol.kernel_rl) =
          std::move(kern);
    }
  }

  if (!grid.sample)
    return sol;

  // Adaptive p-grid around E/2 and every spectral feature.
  double reach = 0.0;
  std::vector<double> anchors{0.5 * sol.E};
  for (Eigen::Index j = 0; j < n; ++j) {
    const cplx lam = eig.values(j);
    reach = std::max(reach, std::abs(lam.real() - 0.5 * sol.E));
    for (double m : {-4.0, -1.0, 0.0, 1.0, 4.0}) {
      anchors.push_back(lam.real() + m * std::abs(lam.imag()));
      anchors.push_back(sol.E - lam.real() - m * std::abs(lam.imag()));
    }
  }
  reach += 10.0 * cfg.gamma_ref();
  const double lo = 0.5 * sol.E - reach, hi = 0.5 * sol.E + reach;
  std::vector<double> seeds;
  for (std::size_t i = 0; i < grid.initial_points; ++i)
    seeds.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.initial_points - 1));
  for (double a : anchors)
    if (a > lo && a < hi)
      seeds.push_back(a);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  using Sample = std::array<cplx, 3>;
  auto evaluate = [&](double pp) {
    Sample s{};
    if (!sol.semi_infinite) {
      s[0] = sol.amplitude(Channel::RR, pp);
      s[2] = sol.amplitude(Channel::RL, pp);
    }
    s[1] = sol.amplitude(Channel::LL, pp);
    return s;
  };
  std::vector<Sample> seed_values;
  double sup = 0.0;
  for (double s : seeds) {
    seed_values.push_back(evaluate(s));
    for (const auto& v : seed_values.back())
      sup = std::max(sup, std::abs(v));
  }
  const double tol = grid.tolerance * sup + 1e-14;

  std::vector<double> pts;
  std::vector<Sample> vals;
  double worst = 0.0;
  bool overflow = false;
  auto refine = [&](auto&& self, double a, const Sample& fa, double b, const Sample& fb, int depth) -> void {
    const double mid = 0.5 * (a + b);
    const Sample fm = evaluate(mid);
    double err = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      err = std::max(err, std::abs(fm[c] - 0.5 * (fa[c] + fb[c])));
    if (err > tol && depth > 0 && pts.size() < grid.max_points) {
      self(self, a, fa, mid, fm, depth - 1);
      pts.push_back(mid);
      vals.push_back(fm);
      self(self, mid, fm, b, fb, depth - 1);
      return;
    }
    if (err > tol)
      overflow = true;
    worst = std::max(worst, err);
    pts.push_back(mid);
    vals.push_back(fm);
  };
  pts.push_back(seeds.front());
  vals.push_back(seed_values.front());
  for (std::size_t i = 0; i + 1 < seeds.size(); ++i) {
    refine(refine, seeds[i], seed_values[i], seeds[i + 1], seed_values[i + 1], 40);
    pts.push_back(seeds[i + 1]);
    vals.push_back(seed_values[i + 1]);
  }
  if (overflow)
    throw Error(ErrorCode::ConvergenceFailure,
                "bound-state grid refinement did not reach the interpolation tolerance");
  sol.grid_error = sup > 0.0 ? worst / sup : worst;
  sol.p_grid = std::move(pts);
  for (const auto& v : vals) {
    if (!sol.semi_infinite) {
      sol.b_rr.push_back(v[0]);
      sol.b_rl.push_back(v[2]);
    }
    sol.b_ll.push_back(v[1]);
  }
  return sol;
}

cplx TwoPhotonSolution::elastic(Channel ch) const {
  if (!has_channel(ch))
    throw Error(ErrorCode::DomainError, "channel not available in front of a mirror");
  switch (ch) {
  case Channel::RR:
    return elastic_rr;
  case Channel::LL:
    return elastic_ll;
  case Channel::RL:
    break;
  }
  return elastic_rl;
}

cplx TwoPhotonSolution::amplitude(Channel ch, double p) const {
  if (!has_channel(ch))
    throw Error(ErrorCode::DomainError, "channel not available in front of a mirror");
  if (diagonal_form) {
    const Eigen::MatrixXcd& kern = ch == Channel::RR ? kernel_rr : ch == Channel::LL ? kernel_ll : kernel_rl;
    const auto n = eigenvalues.size();
    cplx acc{};
    for (Eigen::Index j = 0; j < n; ++j) {
      cplx row{};
      for (Eigen::Index k = 0; k < n; ++k)
        row += kern(j, k) / (E - p - eigenvalues(k));
      acc += row / (p - eigenvalues(j));
    }
    return acc;
  }
  const auto [ra, rb] = directions(ch);
  const Eigen::VectorXcd a = outgoing_overlap(model.hamiltonian, emission(model, ra), p);
  const Eigen::VectorXcd b = outgoing_overlap(model.hamiltonian, emission(model, rb), E - p);
  const double weight = ch == Channel::RL ? std::numbers::sqrt2 : 1.0;
  return weight * I / (2.0 * std::numbers::pi) * (a.transpose() * pair_state * b)(0);
}

double TwoPhotonSolution::spectrum_right(double w) const {
  if (semi_infinite)
    return 0.0;
  return 2.0 * std::norm(amplitude(Channel::RR, w)) + std::norm(amplitude(Channel::RL, w));
}

double TwoPhotonSolution::spectrum_left(double w) const {
  if (semi_infinite)
    return 2.0 * std::norm(amplitude(Channel::LL, w));
  return 2.0 * std::norm(amplitude(Channel::LL, w)) + std::norm(amplitude(Channel::RL, E - w));
}

cplx TwoPhotonSolution::bound_relative(Channel ch, double tau) const {
  if (!has_channel(ch))
    throw Error(ErrorCode::DomainError, "channel not available in front of a mirror");
  const Eigen::MatrixXcd& em = ch == Channel::RR ? emission_rr : ch == Channel::LL ? emission_ll : emission_rl;
  const auto n = model.hamiltonian.rows();
  const Eigen::MatrixXcd gen =
      (I * std::abs(tau)) * (0.5 * E * Eigen::MatrixXcd::Identity(n, n) - model.hamiltonian);
  const Eigen::MatrixXcd prop = gen.exp();
  // The later photon keeps propagating inside the qubit sector for |tau|.
  const Eigen::MatrixXcd evolved = tau >= 0.0 ? Eigen::MatrixXcd(pair_state * prop.transpose())
                                              : Eigen::MatrixXcd(prop * pair_state);
  return -(em.cwiseProduct(evolved)).sum();
}

double TwoPhotonSolution::slowest_rate() const {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(model.hamiltonian, false);
  double rate = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
    rate = std::min(rate, std::abs(es.eigenvalues()(j).imag()));
  return rate;
}

namespace {

void check_outgoing(const TwoPhotonSolution& sol, bool right, double x) {
  const bool ok = right ? x >= sol.x_max : x <= sol.x_min;
  if (!ok)
    throw Error(ErrorCode::DomainError,
                "point " + format_double(x) + " lies inside the scattering region");
}

} // namespace

cplx bound_realspace(const TwoPhotonSolution& sol, Channel ch, double x1, double x2) {
  const auto [ra, rb] = directions(ch);
  if (!sol.has_channel(ch))
    throw Error(ErrorCode::DomainError, "channel not available in front of a mirror");
  check_outgoing(sol, ra, x1);
  check_outgoing(sol, rb, x2);
  const double s1 = ra ? 1.0 : -1.0;
  const double s2 = rb ? 1.0 : -1.0;
  const double tau = s1 * x1 - s2 * x2;
  const cplx carrier = std::exp(I * (0.5 * sol.E) * (s1 * x1 + s2 * x2));
  return carrier * sol.bound_relative(ch, tau);
}

cplx outgoing_realspace(const TwoPhotonSolution& sol, Channel ch, double x1, double x2) {
  const auto [ra, rb] = directions(ch);
  const double s1 = ra ? 1.0 : -1.0;
  const double s2 = rb ? 1.0 : -1.0;
  const cplx carrier = std::exp(I * (0.5 * sol.E) * (s1 * x1 + s2 * x2));
  const cplx a1 = ra ? sol.t : sol.r;
  const cplx a2 = rb ? sol.t : sol.r;
  return carrier * a1 * a2 + bound_realspace(sol, ch, x1, x2);
}

void write_csv(std::ostream& out, const TwoPhotonSolution& sol) {
  CurveSeries series;
  series.axis_name = "p";
  series.axis = sol.p_grid;
  series.config_hash = sol.config_hash;
  series.tolerances["grid_error"] = sol.grid_error;
  auto add = [&](const std::string& name, const std::vector<cplx>& v) {
    std::vector<double> re, im;
    for (const auto& z : v) {
      re.push_back(z.real());
      im.push_back(z.imag());
    }
    series.add_column("Re_B_" + name, std::move(re));
    series.add_column("Im_B_" + name, std::move(im));
  };
  if (!sol.semi_infinite)
    add("RR", sol.b_rr);
  add("LL", sol.b_ll);
  if (!sol.semi_infinite)
    add("RL", sol.b_rl);
  write_csv(out, series);
}

void write_dump(std::ostream& out, const TwoPhotonSolution& sol) {
  auto z = [](cplx v) { return format_double(v.real()) + ' ' + format_double(v.imag()); };
  out << "config_hash " << sol.config_hash << '\n';
  out << "k_in " << format_double(sol.k_in) << '\n';
  out << "E " << format_double(sol.E) << '\n';
  out << "semi_infinite " << (sol.semi_infinite ? 1 : 0) << '\n';
  out << "t " << z(sol.t) << '\n';
  out << "r " << z(sol.r) << '\n';
  for (Channel ch : {Channel::RR, Channel::LL, Channel::RL})
    if (sol.has_channel(ch))
      out << "elastic " << to_string(ch) << ' ' << z(sol.elastic(ch)) << '\n';
  const auto dim = sol.t_matrix.rows();
  out << "subspace_dim " << dim << '\n';
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      out << "t_matrix " << i << ' ' << j << ' ' << z(sol.t_matrix(i, j)) << '\n';
  for (Channel ch : {Channel::RR, Channel::LL, Channel::RL}) {
    if (!sol.has_channel(ch))
      continue;
    const auto& table = ch == Channel::RR ? sol.poles_rr : ch == Channel::LL ? sol.poles_ll : sol.poles_rl;
    for (const auto& pt : table)
      out << "pole " << to_string(ch) << ' ' << z(pt.position) << ' ' << z(pt.residue) << '\n';
  }
  out << "grid_points " << sol.p_grid.size() << '\n';
  for (std::size_t i = 0; i < sol.p_grid.size(); ++i) {
    out << "b " << format_double(sol.p_grid[i]);
    if (!sol.semi_infinite)
      out << ' ' << z(sol.b_rr[i]);
    out << ' ' << z(sol.b_ll[i]);
    if (!sol.semi_infinite)
      out << ' ' << z(sol.b_rl[i]);
    out << '\n';
  }
}

} // namespace wqed
