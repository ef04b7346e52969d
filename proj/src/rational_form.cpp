#include "wqed/rational_form.hpp"

#include <algorithm>
#include <cmath>

namespace wqed {

namespace {

constexpr cplx I{0.0, 1.0};

Polynomial scaled_sum(const Polynomial& a, cplx ca, const Polynomial& b, cplx cb) {
  Polynomial out;
  out.shift = a.shift;
  out.coeffs.assign(std::max(a.coeffs.size(), b.coeffs.size()), cplx{});
  for (std::size_t j = 0; j < a.coeffs.size(); ++j)
    out.coeffs[j] += ca * a.coeffs[j];
  for (std::size_t j = 0; j < b.coeffs.size(); ++j)
    out.coeffs[j] += cb * b.coeffs[j];
  return out;
}

} // namespace

cplx Polynomial::operator()(cplx k) const {
  const cplx z = k - shift;
  cplx acc{};
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    acc = acc * z + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  Polynomial out;
  out.shift = shift;
  for (std::size_t j = 1; j < coeffs.size(); ++j)
    out.coeffs.push_back(static_cast<double>(j) * coeffs[j]);
  if (out.coeffs.empty())
    out.coeffs.push_back(0.0);
  return out;
}

std::vector<cplx> polynomial_roots(const Polynomial& p, bool* converged) {
  std::size_t deg = p.degree();
  while (deg > 0 && p.coeffs[deg] == cplx{})
    --deg;
  if (converged)
    *converged = true;
  if (deg == 0)
    return {};
  const auto n = static_cast<Eigen::Index>(deg);
  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i)
    companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i)
    companion(i, n - 1) = -p.coeffs[static_cast<std::size_t>(i)] / p.coeffs[deg];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
  if (solver.info() != Eigen::Success) {
    if (converged)
      *converged = false;
    return {};
  }
  std::vector<cplx> roots;
  for (Eigen::Index i = 0; i < n; ++i)
    roots.push_back(solver.eigenvalues()(i) + p.shift);
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

PoleResidueForm rational_form(const ValidatedConfig& cfg, std::size_t qubit_index) {
  if (qubit_index >= cfg.size())
    throw Error(ErrorCode::InvalidParameter, "qubit index out of range");
  const EffectiveModel model = effective_model(cfg);
  const auto n = static_cast<Eigen::Index>(model.dim());
  const double shift = cfg.k0();
  const Eigen::MatrixXcd a =
      model.hamiltonian - shift * Eigen::MatrixXcd::Identity(n, n);

  // Faddeev-LeVerrier: det(z - A) = sum_j c_j z^j and
  // adj(z - A) = sum_{m=1}^{n} M_m z^{n-m}.
  std::vector<cplx> c(static_cast<std::size_t>(n) + 1, cplx{});
  c[static_cast<std::size_t>(n)] = 1.0;
  std::vector<Eigen::VectorXcd> adj_drive; // M_m * drive, m = 1..n
  Eigen::MatrixXcd m_prev = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index m = 1; m <= n; ++m) {
    const Eigen::MatrixXcd mk =
        a * m_prev + c[static_cast<std::size_t>(n - m + 1)] * Eigen::MatrixXcd::Identity(n, n);
    c[static_cast<std::size_t>(n - m)] = -(a * mk).trace() / static_cast<double>(m);
    adj_drive.push_back(mk * model.drive);
    m_prev = mk;
  }

  auto numerator_of = [&](const Eigen::VectorXcd& row_weights) {
    Polynomial p;
    p.shift = shift;
    p.coeffs.assign(static_cast<std::size_t>(n) + 1, cplx{});
    for (Eigen::Index m = 1; m <= n; ++m)
      p.coeffs[static_cast<std::size_t>(n - m)] +=
          (row_weights.transpose() * adj_drive[static_cast<std::size_t>(m - 1)])(0);
    return p;
  };

  PoleResidueForm out;
  out.qubit = qubit_index;
  out.denominator.shift = shift;
  out.denominator.coeffs = c;

  Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(n);
  unit(static_cast<Eigen::Index>(cfg.e_mode(qubit_index))) = 1.0;
  out.e_numerator = numerator_of(unit);
  if (cfg.three_level()) {
    unit.setZero();
    unit(static_cast<Eigen::Index>(cfg.s_mode(qubit_index))) = 1.0;
    out.s_numerator = numerator_of(unit);
  } else {
    out.s_numerator = Polynomial{{cplx{}}, shift};
  }

  const Polynomial emitted_left = numerator_of(model.emit_left);
  if (model.semi_infinite) {
    out.t_numerator = Polynomial{{cplx{}}, shift};
    out.r_numerator = scaled_sum(out.denominator, model.bare_reflection, emitted_left, -I);
  } else {
    out.t_numerator = scaled_sum(out.denominator, 1.0, numerator_of(model.emit_right), -I);
    out.r_numerator = scaled_sum(out.denominator, 0.0, emitted_left, -I);
  }
  // Numerators have degree <= n and the denominator is monic of degree n.
  out.t_at_infinity = out.t_numerator.coeffs.back();
  out.r_at_infinity = out.r_numerator.coeffs.back();

  bool converged = true;
  out.poles = polynomial_roots(out.denominator, &converged);
  out.root_finder_converged = converged && out.poles.size() == static_cast<std::size_t>(n);

  double scale = 0.0;
  for (const auto& p : out.poles)
    scale = std::max(scale, std::abs(p - shift));
  scale = std::max(scale, cfg.gamma_ref());
  for (std::size_t i = 0; i < out.poles.size(); ++i)
    for (std::size_t j = i + 1; j < out.poles.size(); ++j)
      if (std::abs(out.poles[i] - out.poles[j]) < 1e-6 * scale)
        out.simple_poles = false;

  if (out.residues_enabled()) {
    const Polynomial dp = out.denominator.derivative();
    for (const auto& pole : out.poles) {
      const cplx slope = dp(pole);
      out.t_residues.push_back(out.t_numerator(pole) / slope);
      out.r_residues.push_back(out.r_numerator(pole) / slope);
    }
  }
  return out;
}

cplx PoleResidueForm::t_from_poles(cplx k) const {
  if (!residues_enabled())
    throw Error(ErrorCode::DomainError, "pole-residue shortcut disabled for this configuration");
  cplx acc = t_at_infinity;
  for (std::size_t i = 0; i < poles.size(); ++i)
    acc += t_residues[i] / (k - poles[i]);
  return acc;
}

cplx PoleResidueForm::r_from_poles(cplx k) const {
  if (!residues_enabled())
    throw Error(ErrorCode::DomainError, "pole-residue shortcut disabled for this configuration");
  cplx acc = r_at_infinity;
  for (std::size_t i = 0; i < poles.size(); ++i)
    acc += r_residues[i] / (k - poles[i]);
  return acc;
}

} // namespace wqed
