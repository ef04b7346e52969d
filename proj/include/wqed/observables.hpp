#pragma once

// Measurable quantities built from the two-photon solution: inelastic power
// spectra, total inelastic flux, the flux peak and photon correlations.

#include "wqed/two_photon.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <utility>

namespace wqed {

enum class Direction { R, L };
Direction parse_direction(std::string_view text);
std::string_view to_string(Direction d);

// Columns S_R and S_L on the given grid. Elastic (delta) parts are excluded.
CurveSeries power_spectra(const ValidatedConfig& config, double k_in,
                          std::span<const double> omega_grid);
CurveSeries power_spectrum(const ValidatedConfig& config, double k_in, Direction direction,
                           std::span<const double> omega_grid);

struct FluxOptions {
  double abs_tol = 1e-12; // in units of 1/gamma_ref
  double rel_tol = 1e-8;
  int max_depth = 25;
};

struct FluxResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

// F = int (S_R + S_L) dw over the whole line, with panel edges at every
// spectral feature of the solution.
FluxResult integrate_flux(const TwoPhotonSolution& solution, const FluxOptions& options = {});
double inelastic_flux(const ValidatedConfig& config, double k_in, const FluxOptions& options = {});

// F(k) on a grid, evaluated on up to `jobs` threads; row order follows the grid.
CurveSeries flux_curve(const ValidatedConfig& config, std::span<const double> k_grid,
                       unsigned jobs = 1, const FluxOptions& options = {});

struct PeakReport {
  double k_peak = 0.0;
  double f_peak = 0.0;
  double t_at_peak = 0.0; // |t|^2, or |r|^2 in front of a mirror
  std::optional<double> twin; // the other member of a symmetric double peak
  std::size_t grid_points = 0;
};

// Global maximizer of F over `window` (default [w0 - 3 G, w0 + 3 G]): scan on
// a grid of spacing min(G/50, W^2/(20 G)), then Brent refinement to 1e-6 G.
PeakReport find_k_peak(const ValidatedConfig& config,
                       std::optional<std::pair<double, double>> window = std::nullopt,
                       unsigned jobs = 1);
void write_peak_report(std::ostream& out, const PeakReport& report);

// Normalized joint detection probability in channel RR (direction R) or LL
// (direction L) for the photons separated by t.
double g2_value(const TwoPhotonSolution& solution, Direction direction, double t);

// g2 on t_grid, verified independent of the detector position by evaluating
// at two reference points 7.3 / gamma apart.
CurveSeries g2(const ValidatedConfig& config, double k_in, Direction direction,
               std::span<const double> t_grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);

} // namespace wqed
