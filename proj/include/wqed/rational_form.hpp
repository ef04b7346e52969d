#pragma once

// Single-photon amplitudes of the Markovian model as explicit rational
// functions of k, plus their poles and residues.

#include "wqed/single_photon.hpp"

#include <vector>

namespace wqed {

// p(k) = sum_j coeffs[j] * (k - shift)^j. The shift keeps coefficients O(1)
// when the poles sit near omega_0 >> Gamma.
struct Polynomial {
  std::vector<cplx> coeffs;
  double shift = 0.0;

  cplx operator()(cplx k) const;
  Polynomial derivative() const;
  std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
};

struct PoleResidueForm {
  std::size_t qubit = 0;
  Polynomial denominator; // det(k - H_eff), monic, degree = number of modes
  Polynomial e_numerator; // selected qubit, excited level
  Polynomial s_numerator; // selected qubit, metastable level (zero without drive)
  Polynomial t_numerator;
  Polynomial r_numerator;

  std::vector<cplx> poles; // roots of the denominator (companion matrix)
  bool root_finder_converged = true;
  bool simple_poles = true;
  // Residue shortcuts are off when the roots did not converge or are
  // degenerate (exceptional points such as Omega = Gamma / 2 for one qubit).
  bool residues_enabled() const { return root_finder_converged && simple_poles; }

  std::vector<cplx> t_residues;
  std::vector<cplx> r_residues;
  cplx t_at_infinity;
  cplx r_at_infinity;

  cplx e(cplx k) const { return e_numerator(k) / denominator(k); }
  cplx s(cplx k) const { return s_numerator(k) / denominator(k); }
  cplx t(cplx k) const { return t_numerator(k) / denominator(k); }
  cplx r(cplx k) const { return r_numerator(k) / denominator(k); }

  // Partial-fraction reconstruction; requires residues_enabled().
  cplx t_from_poles(cplx k) const;
  cplx r_from_poles(cplx k) const;
};

PoleResidueForm rational_form(const ValidatedConfig& config, std::size_t qubit_index = 0);

// Roots of a polynomial through the eigenvalues of its companion matrix.
std::vector<cplx> polynomial_roots(const Polynomial& p, bool* converged = nullptr);

} // namespace wqed
