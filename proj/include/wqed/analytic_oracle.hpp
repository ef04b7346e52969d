#pragma once

// Closed-form inelastic spectrum and flux of one driven Lambda emitter with
// the metastable level on two-photon resonance (Delta = 0).

#include "wqed/curve.hpp"

#include <complex>
#include <span>

namespace wqed {

struct GammaPair {
  std::complex<double> plus;
  std::complex<double> minus;
};

// gamma_(+-) = sqrt(G^2 - 2 W^2 +- G sqrt(G^2 - 4 W^2)) with principal roots.
// Real and nonnegative for W <= G/2, complex conjugates with positive real
// parts above.
GammaPair gamma_pair(double gamma, double rabi);

// S(w) for two photons of momentum k_in. Throws DomainError if the complex
// evaluation leaves an imaginary part above 1e-10 relative.
double s_closed(double gamma, double rabi, double omega0, double k_in, double omega);

// Total inelastic flux F(k_in) = 2 int S dw.
double f_closed(double gamma, double rabi, double omega0, double k_in);

struct ClosedPeak {
  double k_peak = 0.0;
  double f_peak = 0.0;
  double twin = 0.0; // mirror image 2 omega0 - k_peak
};

// Maximizer of f_closed over k_in: grid scan then golden-section refinement.
// Returns the peak above omega0 when the pair is symmetric.
ClosedPeak f_closed_peak(double gamma, double rabi, double omega0);

CurveSeries s_closed_curve(double gamma, double rabi, double omega0, double k_in,
                           std::span<const double> omega_grid);
CurveSeries f_closed_curve(double gamma, double rabi, double omega0,
                           std::span<const double> k_grid);

} // namespace wqed
