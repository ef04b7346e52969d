#include "wqed/lattice_oracle.hpp"

#include "wqed/analytic_oracle.hpp"

#include <Eigen/Sparse>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace wqed {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double kHalfPi = 0.5 * std::numbers::pi;

using SpMat = Eigen::SparseMatrix<cplx>;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Number of sites whose band-centre phase reproduces k0 * gap.
std::size_t sites_for_phase(double phase, const char* what) {
  const double n = phase / kHalfPi;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-6)
    throw Error(ErrorCode::InvalidParameter,
                std::string(what) + " phase " + format_double(phase) +
                    " is not a positive multiple of pi/2; the band-centre lattice cannot host it");
  return static_cast<std::size_t>(rounded);
}

Eigen::MatrixXcd qubit_block(const LatticeScatteringProblem& pb) {
  const ValidatedConfig& cfg = pb.config;
  const auto q = static_cast<Eigen::Index>(cfg.mode_count());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(q, q);
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(cfg.e_mode(i));
    h(e, e) = cfg.qubit(i).omega_e - pb.band_centre;
    if (cfg.three_level()) {
      const auto s = static_cast<Eigen::Index>(cfg.s_mode(i));
      h(s, s) = cfg.omega_s(i) - pb.band_centre;
      h(e, s) = h(s, e) = 0.5 * cfg.rabi();
    }
  }
  return h;
}

// Site block of the single-particle operator, shifted by the band centre.
SpMat chain_block(const LatticeScatteringProblem& pb, bool with_cap) {
  const auto m = static_cast<Eigen::Index>(pb.sites);
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (with_cap && pb.cap[j] != 0.0)
      trip.emplace_back(j, j, -I * pb.cap[j]);
    if (j + 1 < m) {
      trip.emplace_back(j, j + 1, -pb.bond[j]);
      trip.emplace_back(j + 1, j, -pb.bond[j]);
    }
  }
  SpMat h(m, m);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

// Site-qubit coupling matrix G (sites x qubit modes).
Eigen::MatrixXd coupling_block(const LatticeScatteringProblem& pb) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pb.sites, pb.config.mode_count());
  for (std::size_t i = 0; i < pb.config.size(); ++i)
    g(pb.qubit_sites[i], pb.config.e_mode(i)) = pb.site_coupling[i];
  return g;
}

double repulsion_on(const ValidatedConfig& cfg, std::size_t a, std::size_t b, double u) {
  const std::size_t per = cfg.modes_per_qubit();
  return a / per == b / per ? u : 0.0;
}

std::size_t packed(std::size_t a, std::size_t b, std::size_t n) {
  if (a > b)
    std::swap(a, b);
  return a * n - a * (a - 1) / 2 + (b - a);
}

std::ptrdiff_t rel_site(const LatticeScatteringProblem& pb, std::size_t j) {
  return static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pb.qubit_sites.front());
}

// Physical scattered amplitude with both photons on sites; the even sector
// carries a factor 1/2 relative to the physical half-line wave function.
cplx scattered(const LatticeScatteringProblem& pb, const LatticeTwoPhotonState& st, std::size_t a,
               std::size_t b) {
  const cplx v = st.photon_pair(a, b);
  return pb.geometry == LatticeGeometry::EvenChannel ? 0.5 * v : v;
}

struct Region {
  std::size_t first;
  std::size_t last;
  bool right; // photons there move to the right
  std::size_t size() const { return last - first; }
  std::size_t middle() const { return first + size() / 2; }
};

std::optional<Region> region_for(const LatticeScatteringProblem& pb, bool right) {
  if (pb.geometry == LatticeGeometry::Mirror && right)
    return std::nullopt;
  auto [a, b] = right || pb.geometry == LatticeGeometry::EvenChannel ? pb.right_region()
                                                                      : pb.left_region();
  if (b <= a + 2)
    return std::nullopt;
  return Region{a, b, right};
}

// Signed offset from the first qubit along the outward direction.
double outward(const LatticeScatteringProblem& pb, std::size_t j, bool right) {
  if (pb.geometry == LatticeGeometry::EvenChannel)
    return static_cast<double>(j);
  const double rel = static_cast<double>(rel_site(pb, j));
  return right ? rel : -rel;
}

// Sites adjacent to the scatterer still carry near-field terms.
bool next_to_qubit(const LatticeScatteringProblem& pb, const Region& reg, std::size_t j) {
  const bool ascending = reg.right || pb.geometry == LatticeGeometry::EvenChannel;
  return ascending ? j < reg.first + 2 : j + 2 >= reg.last;
}

double continuum_x(const LatticeScatteringProblem& pb, std::size_t j, bool right) {
  if (pb.geometry == LatticeGeometry::EvenChannel) {
    const double x0 = pb.config.qubit(0).position;
    return right ? x0 + static_cast<double>(j) * pb.spacing : x0 - static_cast<double>(j) * pb.spacing;
  }
  return pb.position(j);
}

} // namespace

double LatticeScatteringProblem::position(std::size_t site) const {
  return config.qubit(0).position +
         static_cast<double>(static_cast<std::ptrdiff_t>(site) -
                             static_cast<std::ptrdiff_t>(qubit_sites.front())) *
             spacing;
}

double LatticeScatteringProblem::theta(double omega) const {
  const double c = -(omega - band_centre) / (2.0 * hopping);
  if (!(std::abs(c) < 1.0))
    throw Error(ErrorCode::DomainError, "frequency " + format_double(omega) + " lies outside the lattice band");
  return std::acos(c);
}

double LatticeScatteringProblem::group_velocity(double omega) const {
  return std::sin(theta(omega));
}

std::pair<std::size_t, std::size_t> LatticeScatteringProblem::right_region() const {
  if (geometry == LatticeGeometry::Mirror)
    return {0, 0};
  const std::size_t first = geometry == LatticeGeometry::EvenChannel ? 1 : qubit_sites.back() + 1;
  std::size_t last = first;
  while (last < sites && cap[last] == 0.0)
    ++last;
  return {first, last};
}

std::pair<std::size_t, std::size_t> LatticeScatteringProblem::left_region() const {
  if (geometry == LatticeGeometry::EvenChannel)
    return right_region();
  std::size_t first = qubit_sites.front();
  while (first > 0 && cap[first - 1] == 0.0)
    --first;
  return {first, qubit_sites.front()};
}

LatticeScatteringProblem build_lattice(const ValidatedConfig& cfg, std::size_t sites, double bandwidth,
                                       const LatticeOptions& opt) {
  if (sites < 400)
    throw Error(ErrorCode::InvalidParameter, "the lattice needs at least 400 sites");
  const double gamma = cfg.gamma_ref();
  if (!(bandwidth >= opt.min_bandwidth))
    throw Error(ErrorCode::DomainError, "bandwidth " + format_double(bandwidth) +
                                            " is below the required " + format_double(opt.min_bandwidth));
  const double w_abs = bandwidth * gamma;
  const double cos_limit = std::sqrt(1.0 - std::pow(1.0 - opt.max_velocity_deviation, 2));

  LatticeScatteringProblem pb{.config = cfg};
  pb.sites = sites;
  pb.spacing = opt.spacing.value_or(cos_limit / w_abs * (1.0 - 1e-9));
  if (!(pb.spacing > 0.0))
    throw Error(ErrorCode::InvalidParameter, "lattice spacing must be positive");
  pb.hopping = 0.5 / pb.spacing;
  pb.band_centre = cfg.k0();
  pb.bandwidth = bandwidth;
  const double edge = w_abs * pb.spacing;
  pb.velocity_deviation = edge < 1.0 ? 1.0 - std::sqrt(1.0 - edge * edge) : 1.0;
  if (pb.velocity_deviation > opt.max_velocity_deviation)
    throw Error(ErrorCode::DomainError,
                "bandwidth check failed: group velocity deviates by " + format_double(pb.velocity_deviation) +
                    " at the band edge W");
  pb.repulsion = opt.repulsion * gamma;

  const std::size_t n = cfg.size();
  std::vector<std::size_t> offset(n, 0);
  for (std::size_t i = 1; i < n; ++i)
    offset[i] = offset[i - 1] +
                sites_for_phase(cfg.k0() * (cfg.qubit(i).position - cfg.qubit(i - 1).position), "separation");
  const std::size_t span = offset.back();
  const std::size_t cap = opt.cap_sites;
  std::size_t q0 = 0;
  bool cap_left = true, cap_right = true;
  if (cfg.semi_infinite()) {
    pb.geometry = LatticeGeometry::Mirror;
    const std::size_t gap = sites_for_phase(cfg.k0() * cfg.mirror_gap(), "mirror gap");
    if (gap + span + cap + 10 > sites)
      throw Error(ErrorCode::InvalidParameter, "chain too short for the mirror geometry");
    q0 = sites - gap - span;
    cap_right = false;
  } else if (n == 1 && opt.even_reduction) {
    pb.geometry = LatticeGeometry::EvenChannel;
    q0 = 0;
    cap_left = false;
  } else {
    pb.geometry = LatticeGeometry::Full;
    if (span + 2 * cap + 20 > sites)
      throw Error(ErrorCode::InvalidParameter, "chain too short for the qubit array");
    q0 = (sites - span) / 2;
  }
  for (std::size_t i = 0; i < n; ++i) {
    pb.qubit_sites.push_back(q0 + offset[i]);
    pb.site_coupling.push_back(cfg.coupling(i) / std::sqrt(pb.spacing));
  }

  pb.bond.assign(sites - 1, pb.hopping);
  if (pb.geometry == LatticeGeometry::EvenChannel)
    pb.bond[0] = std::sqrt(2.0) * pb.hopping;

  pb.cap.assign(sites, 0.0);
  const double peak = opt.cap_strength * pb.hopping;
  for (std::size_t s = 1; s <= cap; ++s) {
    const double w = peak * std::pow(static_cast<double>(s) / static_cast<double>(cap), 2);
    if (cap_right)
      pb.cap[sites - cap - 1 + s] = w;
    if (cap_left)
      pb.cap[cap - s] = w;
  }

  if (pb.basis_dim() > opt.basis_cap)
    throw Error(ErrorCode::CapacityExceeded, "pair basis of " + std::to_string(pb.basis_dim()) +
                                                 " states exceeds the cap of " + std::to_string(opt.basis_cap));
  return pb;
}

double decay_window_bandwidth(const ValidatedConfig& cfg, const TwoPhotonSolution& sol, std::size_t sites,
                              const LatticeOptions& opt, double decay_lengths) {
  const double rate = sol.slowest_rate();
  // Full chains split the free sites between the two sides of the qubits.
  const bool two_sided = !cfg.semi_infinite() && !(cfg.size() == 1 && opt.even_reduction);
  const double sides = two_sided ? 2.0 : 1.0;
  const double free_sites = static_cast<double>(sites) - sides * static_cast<double>(opt.cap_sites + 4);
  if (!(rate > 0.0) || !(free_sites > 0.0))
    throw Error(ErrorCode::DomainError, "no finite decay window for this lattice");
  const double spacing = sides * 2.0 * decay_lengths / rate / free_sites;
  const double cos_limit = std::sqrt(1.0 - std::pow(1.0 - opt.max_velocity_deviation, 2));
  return cos_limit / spacing / cfg.gamma_ref();
}

LatticeSinglePhoton lattice_single(const LatticeScatteringProblem& pb, double omega) {
  const double th = pb.theta(omega);
  const cplx lead = pb.hopping * std::exp(I * th);
  const auto m = static_cast<Eigen::Index>(pb.sites);
  const auto q = static_cast<Eigen::Index>(pb.config.mode_count());
  const double eps = omega - pb.band_centre;
  const auto q0 = static_cast<double>(pb.qubit_sites.front());

  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index j = 0; j < m; ++j) {
    trip.emplace_back(j, j, eps);
    if (j + 1 < m) {
      trip.emplace_back(j, j + 1, pb.bond[j]);
      trip.emplace_back(j + 1, j, pb.bond[j]);
    }
  }
  const Eigen::MatrixXcd hq = qubit_block(pb);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b)
      if (a == b || hq(a, b) != 0.0)
        trip.emplace_back(m + a, m + b, (a == b ? eps : 0.0) - hq(a, b));
  for (std::size_t i = 0; i < pb.config.size(); ++i) {
    const auto s = static_cast<Eigen::Index>(pb.qubit_sites[i]);
    const auto e = m + static_cast<Eigen::Index>(pb.config.e_mode(i));
    trip.emplace_back(s, e, -pb.site_coupling[i]);
    trip.emplace_back(e, s, -pb.site_coupling[i]);
  }

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(m + q);
  switch (pb.geometry) {
  case LatticeGeometry::Full:
    trip.emplace_back(0, 0, lead);
    trip.emplace_back(m - 1, m - 1, lead);
    rhs(0) = 2.0 * I * pb.hopping * std::sin(th) * std::exp(-I * th * q0);
    break;
  case LatticeGeometry::Mirror:
    trip.emplace_back(0, 0, lead);
    rhs(0) = 2.0 * I * pb.hopping * std::sin(th) * std::exp(-I * th * q0);
    break;
  case LatticeGeometry::EvenChannel:
    trip.emplace_back(m - 1, m - 1, lead);
    rhs(m - 1) = -pb.hopping / std::sqrt(2.0) * std::exp(-I * th * static_cast<double>(m)) *
                 (1.0 - std::exp(2.0 * I * th));
    break;
  }
  SpMat a(m + q, m + q);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SpMat> lu(a);
  if (lu.info() != Eigen::Success)
    throw Error(ErrorCode::SingularSystem, "lattice single-photon system is singular at " + format_double(omega));

  LatticeSinglePhoton out;
  out.omega = omega;
  out.state = lu.solve(rhs);
  const double last = static_cast<double>(m - 1);
  if (pb.geometry == LatticeGeometry::EvenChannel) {
    const cplx re = (std::sqrt(2.0) * out.state(m - 1) - std::exp(-I * th * last)) * std::exp(-I * th * last);
    out.t = 0.5 * (re + 1.0);
    out.r = 0.5 * (re - 1.0);
  } else {
    out.r = (out.state(0) - std::exp(-I * th * q0)) * std::exp(-I * th * q0);
    out.t = pb.geometry == LatticeGeometry::Full ? out.state(m - 1) * std::exp(-I * th * (last - q0)) : cplx{};
  }
  return out;
}

double cap_reflection(const LatticeScatteringProblem& pb, double omega) {
  // Uniform chain: lead on the left, the absorbing profile on the right.
  std::vector<double> profile;
  for (double w : pb.cap)
    if (w > 0.0)
      profile.push_back(w);
  std::sort(profile.begin(), profile.end());
  const std::size_t pad = 20;
  const auto m = static_cast<Eigen::Index>(profile.size() + pad);
  const double th = pb.theta(omega);
  const double eps = omega - pb.band_centre;
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double w = j >= static_cast<Eigen::Index>(pad) ? profile[j - pad] : 0.0;
    trip.emplace_back(j, j, eps + I * w);
    if (j + 1 < m) {
      trip.emplace_back(j, j + 1, pb.hopping);
      trip.emplace_back(j + 1, j, pb.hopping);
    }
  }
  trip.emplace_back(0, 0, pb.hopping * std::exp(I * th));
  SpMat a(m, m);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(m);
  rhs(0) = 2.0 * I * pb.hopping * std::sin(th);
  Eigen::SparseLU<SpMat> lu(a);
  const Eigen::VectorXcd psi = lu.solve(rhs);
  return std::norm(psi(0) - 1.0);
}

double wigner_gamma(const LatticeScatteringProblem& pb) {
  const double w0 = pb.config.qubit(0).omega_e;
  const double h = 1e-4 * pb.config.gamma_ref();
  auto phase = [&](double w) { return std::arg(lattice_single(pb, w).r); };
  auto unwrap = [](double d) { return std::remainder(d, 2.0 * std::numbers::pi); };
  const double d1 = unwrap(phase(w0 + h) - phase(w0 - h)) / (2.0 * h);
  const double d2 = unwrap(phase(w0 + 0.5 * h) - phase(w0 - 0.5 * h)) / h;
  const double tau = (4.0 * d2 - d1) / 3.0;
  if (!(tau > 0.0))
    throw Error(ErrorCode::UndefinedPhase, "reflection phase has no positive delay at resonance");
  return 2.0 / tau;
}

LatticeTwoPhotonState solve_scattering(const LatticeScatteringProblem& pb, double k_in) {
  const ValidatedConfig& cfg = pb.config;
  const double gamma = cfg.gamma_ref();
  if (std::abs(k_in - pb.band_centre) > pb.bandwidth * gamma)
    throw Error(ErrorCode::DomainError, "k_in lies outside the validated bandwidth");

  LatticeTwoPhotonState st;
  st.k_in = k_in;
  st.E = 2.0 * k_in;
  st.incident = lattice_single(pb, k_in);

  // Absorber quality over the part of the operating band the spectrum can reach.
  const double lo = std::max(k_in - 5.0 * gamma, pb.band_centre - pb.bandwidth * gamma);
  const double hi = std::min(k_in + 5.0 * gamma, pb.band_centre + pb.bandwidth * gamma);
  double worst = 0.0;
  for (double w : linspace(lo, hi, 41))
    worst = std::max(worst, cap_reflection(pb, w));
  st.cap_reflection = worst;
  if (worst > 1e-3)
    throw Error(ErrorCode::ConvergenceFailure,
                "absorbing layer reflects " + format_double(worst) + " of the outgoing flux");

  const auto m = static_cast<Eigen::Index>(pb.sites);
  const auto q = static_cast<Eigen::Index>(cfg.mode_count());
  const cplx es = st.E - 2.0 * pb.band_centre;
  const double u = pb.repulsion;

  const SpMat hc = chain_block(pb, true);
  const Eigen::MatrixXcd hq = qubit_block(pb);
  const Eigen::MatrixXd g = coupling_block(pb);
  const Eigen::VectorXcd phi_q = st.incident.state.tail(q);

  // The photon-photon block is eliminated exactly in the eigenbasis of the
  // absorbing chain, leaving a dense system on the qubit-photon amplitudes.
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig{Eigen::MatrixXcd(hc)};
  if (eig.info() != Eigen::Success)
    throw Error(ErrorCode::ConvergenceFailure, "eigen-decomposition of the absorbing chain failed");
  const Eigen::VectorXcd lam = eig.eigenvalues();
  const Eigen::MatrixXcd& v = eig.eigenvectors();
  const Eigen::MatrixXcd vinv = v.partialPivLu().inverse();
  const Eigen::MatrixXcd ghat = vinv * g;          // V^{-1} G
  const Eigen::MatrixXcd gcheck = v.transpose() * g; // V^T G
  Eigen::MatrixXcd dinv(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      dinv(a, b) = 1.0 / (es - lam(a) - lam(b));

  std::vector<Eigen::Index> emodes;
  for (std::size_t i = 0; i < cfg.size(); ++i)
    emodes.push_back(static_cast<Eigen::Index>(cfg.e_mode(i)));
  const Eigen::Index ny = q * (q + 1) / 2;
  const Eigen::Index nx = q * m;
  auto xi = [&](Eigen::Index mode, Eigen::Index beta) { return mode * m + beta; };
  auto yi = [&](Eigen::Index a, Eigen::Index b) {
    return nx + static_cast<Eigen::Index>(packed(static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                                 static_cast<std::size_t>(q)));
  };

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(nx + ny, nx + ny);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(nx + ny);
  for (Eigen::Index mp = 0; mp < q; ++mp)
    for (Eigen::Index beta = 0; beta < m; ++beta) {
      const Eigen::Index row = xi(mp, beta);
      a(row, row) += es - lam(beta);
      for (Eigen::Index mm = 0; mm < q; ++mm)
        if (hq(mp, mm) != 0.0)
          a(row, xi(mm, beta)) -= hq(mp, mm);
      for (Eigen::Index mm : emodes)
        a(row, yi(mp, mm)) -= ghat(beta, mm);
    }
  for (Eigen::Index mp : emodes)
    for (Eigen::Index mm : emodes) {
      const Eigen::VectorXcd prod = gcheck.col(mp).cwiseProduct(ghat.col(mm));
      for (Eigen::Index beta = 0; beta < m; ++beta) {
        a(xi(mp, beta), xi(mm, beta)) -= (prod.transpose() * dinv.col(beta))(0);
        const cplx gb = ghat(beta, mm);
        for (Eigen::Index alpha = 0; alpha < m; ++alpha)
          a(xi(mp, beta), xi(mm, alpha)) -= gb * gcheck(alpha, mp) * dinv(alpha, beta);
      }
    }
  for (Eigen::Index ra = 0; ra < q; ++ra)
    for (Eigen::Index rb = ra; rb < q; ++rb) {
      const Eigen::Index row = yi(ra, rb);
      const double uab = repulsion_on(cfg, static_cast<std::size_t>(ra), static_cast<std::size_t>(rb), u);
      a(row, row) += es - uab;
      for (Eigen::Index c = 0; c < q; ++c) {
        if (hq(ra, c) != 0.0)
          a(row, yi(c, rb)) -= hq(ra, c);
        if (hq(c, rb) != 0.0)
          a(row, yi(ra, c)) -= hq(c, rb);
      }
      for (Eigen::Index beta = 0; beta < m; ++beta) {
        a(row, xi(ra, beta)) -= gcheck(beta, rb);
        a(row, xi(rb, beta)) -= gcheck(beta, ra);
      }
      b(row) = uab * phi_q(ra) * phi_q(rb);
    }

  const Eigen::VectorXcd sol = a.partialPivLu().solve(b);
  Eigen::MatrixXcd xhat(q, m);
  for (Eigen::Index mm = 0; mm < q; ++mm)
    for (Eigen::Index beta = 0; beta < m; ++beta)
      xhat(mm, beta) = sol(xi(mm, beta));
  st.qubit_pair.resize(q, q);
  for (Eigen::Index ra = 0; ra < q; ++ra)
    for (Eigen::Index rb = 0; rb < q; ++rb)
      st.qubit_pair(ra, rb) = sol(yi(ra, rb));
  st.qubit_photon = xhat * v.transpose();
  const Eigen::MatrixXcd ptilde = (ghat * xhat + xhat.transpose() * ghat.transpose()).cwiseProduct(dinv);
  st.photon_pair = v * ptilde * v.transpose();

  // Residual of the pair equation on the original sparse operator.
  const Eigen::MatrixXcd& p = st.photon_pair;
  const Eigen::MatrixXcd& x = st.qubit_photon;
  const Eigen::MatrixXcd& y = st.qubit_pair;
  const Eigen::MatrixXcd hcp = hc * p;
  const Eigen::MatrixXcd gx = g * x;
  const Eigen::MatrixXcd r_pp = es * p - hcp - hcp.transpose() - gx - gx.transpose();
  const Eigen::MatrixXcd r_qp = es * x - g.transpose() * p - hq * x - (hc * x.transpose()).transpose() -
                                y * g.transpose();
  Eigen::MatrixXcd uy = Eigen::MatrixXcd::Zero(q, q);
  Eigen::MatrixXcd src = Eigen::MatrixXcd::Zero(q, q);
  for (Eigen::Index ra = 0; ra < q; ++ra)
    for (Eigen::Index rb = 0; rb < q; ++rb) {
      const double uab = repulsion_on(cfg, static_cast<std::size_t>(ra), static_cast<std::size_t>(rb), u);
      uy(ra, rb) = uab * y(ra, rb);
      src(ra, rb) = uab * phi_q(ra) * phi_q(rb);
    }
  const Eigen::MatrixXcd xg = x * g;
  const Eigen::MatrixXcd r_qq = es * y - xg.transpose() - hq * y - xg - y * hq - uy - src;
  st.residual = std::sqrt(r_pp.squaredNorm() + 2.0 * r_qp.squaredNorm() + r_qq.squaredNorm()) /
                std::max(src.norm(), 1e-300);
  if (!(st.residual < 1e-8))
    throw Error(ErrorCode::ConvergenceFailure,
                "lattice pair solve residual " + format_double(st.residual) + " exceeds 1e-8");

  // Norms: every ordered pair of modes counts once.
  const Eigen::VectorXcd& phi = st.incident.state;
  double pnorm = 0.0, pfree = 0.0;
  for (Eigen::Index ra = 0; ra < q; ++ra)
    for (Eigen::Index rb = 0; rb < q; ++rb)
      if (repulsion_on(cfg, static_cast<std::size_t>(ra), static_cast<std::size_t>(rb), 1.0) > 0.0) {
        pnorm += std::norm(phi_q(ra) * phi_q(rb) + y(ra, rb));
        pfree += std::norm(phi_q(ra) * phi_q(rb));
      }
  double total = 0.0;
  std::vector<Eigen::Index> inside;
  for (Eigen::Index j = 0; j < m; ++j)
    if (pb.cap[j] == 0.0)
      inside.push_back(j);
  for (Eigen::Index j1 : inside)
    for (Eigen::Index j2 : inside)
      total += std::norm(phi(j1) * phi(j2) + p(j1, j2));
  for (Eigen::Index mm = 0; mm < q; ++mm)
    for (Eigen::Index j : inside)
      total += 2.0 * std::norm(phi_q(mm) * phi(j) + x(mm, j));
  for (Eigen::Index ra = 0; ra < q; ++ra)
    for (Eigen::Index rb = 0; rb < q; ++rb)
      total += std::norm(phi_q(ra) * phi_q(rb) + y(ra, rb));
  st.hardcore_fraction = std::sqrt(pnorm / total);
  st.hardcore_suppression = pfree > 0.0 ? std::sqrt(pnorm / pfree) : 0.0;

  // Pair probability absorbed per unit time, converted to photon flux F.
  double absorbed = 0.0;
  for (Eigen::Index j1 = 0; j1 < m; ++j1)
    for (Eigen::Index j2 = 0; j2 < m; ++j2)
      if (pb.cap[j1] + pb.cap[j2] > 0.0)
        absorbed += (pb.cap[j1] + pb.cap[j2]) * std::norm(p(j1, j2));
  for (Eigen::Index mm = 0; mm < q; ++mm)
    for (Eigen::Index j = 0; j < m; ++j)
      absorbed += 2.0 * pb.cap[j] * std::norm(x(mm, j));
  st.absorbed_flux = 2.0 * pb.spacing * pb.spacing * absorbed / std::numbers::pi;
  return st;
}

cplx lattice_amplitude(const LatticeScatteringProblem& pb, const LatticeTwoPhotonState& st, Channel ch,
                       double p) {
  if (pb.config.semi_infinite() && ch != Channel::LL)
    throw Error(ErrorCode::DomainError, "channel not available in front of a mirror");
  const bool first_right = ch == Channel::RR || ch == Channel::RL;
  const bool second_right = ch == Channel::RR;
  const auto r1 = region_for(pb, first_right);
  const auto r2 = region_for(pb, second_right);
  if (!r1 || !r2)
    throw Error(ErrorCode::DomainError, "no outgoing region for this channel");
  const double th1 = pb.theta(p);
  const double th2 = pb.theta(st.E - p);
  const std::size_t ref = r2->middle();
  cplx sum{};
  for (std::size_t j = r1->first; j < r1->last; ++j)
    sum += scattered(pb, st, j, ref) * std::exp(-I * th1 * outward(pb, j, first_right));
  const double weight = ch == Channel::RL ? std::numbers::sqrt2 : 1.0;
  return weight * pb.spacing / (2.0 * std::numbers::pi * std::sin(th1)) *
         std::exp(-I * th2 * outward(pb, ref, second_right)) * sum;
}

CurveSeries lattice_spectra(const LatticeScatteringProblem& pb, const LatticeTwoPhotonState& st,
                            std::span<const double> grid) {
  CurveSeries out;
  out.axis_name = "omega";
  out.axis.assign(grid.begin(), grid.end());
  out.config_hash = pb.config.hash();
  out.source = "lattice";
  out.tolerances["k_in"] = st.k_in;
  out.tolerances["sites"] = static_cast<double>(pb.sites);
  out.tolerances["spacing"] = pb.spacing;
  std::vector<double> sr, sl;
  for (double w : grid) {
    if (pb.config.semi_infinite()) {
      sr.push_back(0.0);
      sl.push_back(2.0 * std::norm(lattice_amplitude(pb, st, Channel::LL, w)));
      continue;
    }
    sr.push_back(2.0 * std::norm(lattice_amplitude(pb, st, Channel::RR, w)) +
                 std::norm(lattice_amplitude(pb, st, Channel::RL, w)));
    sl.push_back(2.0 * std::norm(lattice_amplitude(pb, st, Channel::LL, w)) +
                 std::norm(lattice_amplitude(pb, st, Channel::RL, st.E - w)));
  }
  out.add_column("S_R", std::move(sr));
  out.add_column("S_L", std::move(sl));
  return out;
}

double lattice_flux_imbalance(const LatticeScatteringProblem& pb, const LatticeTwoPhotonState& st) {
  const cplx t = st.incident.t, r = st.incident.r;
  const double k = st.k_in;
  cplx x = std::conj(r * r) * lattice_amplitude(pb, st, Channel::LL, k);
  if (!pb.config.semi_infinite())
    x += std::conj(t * t) * lattice_amplitude(pb, st, Channel::RR, k) +
         std::conj(t * r) * std::sqrt(2.0) * lattice_amplitude(pb, st, Channel::RL, k);
  return std::abs(st.absorbed_flux + 4.0 * x.real()) / std::max(st.absorbed_flux, 1e-300);
}

std::vector<double> lattice_g2(const LatticeScatteringProblem& pb, const LatticeTwoPhotonState& st,
                               Direction dir, std::span<const double> delays) {
  const bool right = dir == Direction::R;
  const auto reg = region_for(pb, right);
  if (!reg)
    throw Error(ErrorCode::DomainError, "no outgoing region in this direction");
  const cplx amp = right ? st.incident.t : st.incident.r;
  const double single = std::norm(amp);
  if (single * single < 1e-12)
    throw Error(ErrorCode::DomainError, "single-photon intensity vanishes; g2 is undefined");
  const double th = pb.theta(st.k_in);
  // Start next to the qubits and move outward.
  const bool ascending = right || pb.geometry == LatticeGeometry::EvenChannel;
  const std::size_t start = ascending ? reg->first + 2 : reg->last - 3;
  std::vector<double> out;
  for (double t : delays) {
    const auto n = static_cast<std::size_t>(std::llround(t / pb.spacing));
    if (n + 3 >= reg->size())
      throw Error(ErrorCode::DomainError, "delay exceeds the absorber-free region");
    const std::size_t other = ascending ? start + n : start - n;
    const double o1 = outward(pb, start, right), o2 = outward(pb, other, right);
    const cplx psi = amp * amp * std::exp(I * th * (o1 + o2)) + scattered(pb, st, start, other);
    out.push_back(std::norm(psi) / (single * single));
  }
  return out;
}

WavefunctionComparison compare_wavefunction(const LatticeScatteringProblem& pb,
                                            const LatticeTwoPhotonState& st, const TwoPhotonSolution& sol) {
  const double th = pb.theta(st.k_in);
  const double k = st.k_in;
  const double x0 = pb.config.qubit(0).position;
  double diff_full = 0.0, ref_full = 0.0, diff_bound = 0.0, ref_bound = 0.0;
  WavefunctionComparison out;
  for (Channel ch : channels(pb.config)) {
    const bool ra = ch == Channel::RR || ch == Channel::RL;
    const bool rb = ch == Channel::RR;
    const auto r1 = region_for(pb, ra);
    const auto r2 = region_for(pb, rb);
    if (!r1 || !r2)
      continue;
    const cplx a1 = ra ? st.incident.t : st.incident.r;
    const cplx a2 = rb ? st.incident.t : st.incident.r;
    const cplx c1 = ra ? sol.t : sol.r;
    const cplx c2 = rb ? sol.t : sol.r;
    const double s1 = ra ? 1.0 : -1.0, s2 = rb ? 1.0 : -1.0;
    // Whole-state phase between the lattice frame (first qubit) and the continuum one.
    const cplx frame = std::exp(I * k * (s1 + s2 - 2.0) * x0);
    std::map<long long, cplx> cache;
    const std::size_t stride1 = std::max<std::size_t>(1, r1->size() / 300);
    const std::size_t stride2 = std::max<std::size_t>(1, r2->size() / 300);
    for (std::size_t j1 = r1->first; j1 < r1->last; j1 += stride1) {
      if (next_to_qubit(pb, *r1, j1))
        continue;
      const double o1 = outward(pb, j1, ra);
      for (std::size_t j2 = r2->first; j2 < r2->last; j2 += stride2) {
        if (next_to_qubit(pb, *r2, j2))
          continue;
        const double o2 = outward(pb, j2, rb);
        const double tau = s1 * continuum_x(pb, j1, ra) - s2 * continuum_x(pb, j2, rb);
        const long long key = std::llround(o1 - o2);
        auto it = cache.find(key);
        if (it == cache.end())
          it = cache.emplace(key, sol.bound_relative(ch, tau)).first;
        const cplx lat_bound = scattered(pb, st, j1, j2) * std::exp(-I * th * (o1 + o2));
        const cplx lat_full = a1 * a2 + lat_bound;
        const cplx con_bound = frame * it->second;
        const cplx con_full = frame * c1 * c2 + con_bound;
        diff_full += std::norm(lat_full - con_full);
        ref_full += std::norm(con_full);
        diff_bound += std::norm(lat_bound - con_bound);
        ref_bound += std::norm(con_bound);
        ++out.samples;
      }
    }
  }
  out.full_l2 = std::sqrt(diff_full / std::max(ref_full, 1e-300));
  out.bound_l2 = std::sqrt(diff_bound / std::max(ref_bound, 1e-300));
  return out;
}

OracleReport oracle_compare(const ValidatedConfig& cfg, double k_in, const std::vector<std::size_t>& sizes,
                            double bandwidth, const LatticeOptions& opt) {
  OracleReport rep;
  rep.config_hash = cfg.hash();
  rep.k_in = k_in;
  rep.bandwidth = bandwidth;
  GridOptions grid;
  grid.sample = false;
  const TwoPhotonSolution sol = scatter_two(cfg, k_in, grid);
  const double f_pipe = integrate_flux(sol).value;
  GridOptions finite = grid;
  finite.repulsion = opt.repulsion * cfg.gamma_ref();
  const double f_u = integrate_flux(scatter_two(cfg, k_in, finite)).value;
  rep.finite_u_flux_rel = std::abs(f_u - f_pipe) / f_pipe;

  const double gamma = cfg.gamma_ref();
  const bool closed = cfg.size() == 1 && !cfg.semi_infinite();
  const std::vector<double> omegas = linspace(k_in - 3.0 * gamma, k_in + 3.0 * gamma, 241);
  rep.closed_form_linf = nan();
  if (closed) {
    double worst = 0.0, peak = 0.0;
    for (double w : omegas) {
      const double s = s_closed(gamma, cfg.rabi(), cfg.k0(), k_in, w);
      worst = std::max(worst, std::abs(sol.spectrum_right(w) - s));
      peak = std::max(peak, s);
    }
    rep.closed_form_linf = worst / peak;
  }

  for (std::size_t m : sizes) {
    const auto t0 = std::chrono::steady_clock::now();
    const LatticeScatteringProblem pb = build_lattice(cfg, m, bandwidth, opt);
    const LatticeTwoPhotonState st = solve_scattering(pb, k_in);
    OracleRow row;
    row.sites = m;
    row.spacing = pb.spacing;
    const double band = bandwidth * gamma;
    const std::vector<double> inband =
        linspace(std::max(k_in - 3.0 * gamma, pb.band_centre - band),
                 std::min(k_in + 3.0 * gamma, pb.band_centre + band), 241);
    const CurveSeries lat = lattice_spectra(pb, st, inband);
    const std::vector<double>& sl = lat.column(cfg.semi_infinite() ? "S_L" : "S_R");
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < inband.size(); ++i) {
      const double ref = closed ? s_closed(gamma, cfg.rabi(), cfg.k0(), k_in, inband[i])
                         : cfg.semi_infinite() ? sol.spectrum_left(inband[i])
                                               : sol.spectrum_right(inband[i]);
      worst = std::max(worst, std::abs(sl[i] - ref));
      peak = std::max(peak, ref);
    }
    row.spectrum_linf = worst / peak;
    row.wavefunction = compare_wavefunction(pb, st, sol);
    row.flux_pipeline = f_pipe;
    row.flux_lattice = st.absorbed_flux;
    row.hardcore_fraction = st.hardcore_fraction;
    row.residual = st.residual;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const double a = rep.rows[i - 1].wavefunction.bound_l2, b = rep.rows[i].wavefunction.bound_l2;
    rep.orders.push_back(a > 0.0 && b > 0.0 ? std::log2(a / b) : nan());
  }
  return rep;
}

void write_report(std::ostream& out, const OracleReport& rep) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v))
      return nullptr;
    return v;
  };
  nlohmann::ordered_json j;
  j["config_hash"] = rep.config_hash;
  j["k_in"] = rep.k_in;
  j["bandwidth"] = rep.bandwidth;
  j["pipeline_vs_closed_form_linf"] = num(rep.closed_form_linf);
  j["finite_u_flux_relative"] = rep.finite_u_flux_rel;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const OracleRow& r : rep.rows) {
    nlohmann::ordered_json o;
    o["sites"] = r.sites;
    o["spacing"] = r.spacing;
    o["spectrum_linf"] = num(r.spectrum_linf);
    o["wavefunction_l2"] = r.wavefunction.full_l2;
    o["bound_l2"] = r.wavefunction.bound_l2;
    o["samples"] = r.wavefunction.samples;
    o["flux_pipeline"] = r.flux_pipeline;
    o["flux_lattice"] = r.flux_lattice;
    o["hardcore_fraction"] = r.hardcore_fraction;
    o["residual"] = r.residual;
    o["seconds"] = r.seconds;
    rows.push_back(o);
  }
  j["convergence"] = rows;
  nlohmann::ordered_json orders = nlohmann::ordered_json::array();
  for (double v : rep.orders)
    orders.push_back(num(v));
  j["observed_order"] = orders;
  out << j.dump(2) << '\n';
}

} // namespace wqed
