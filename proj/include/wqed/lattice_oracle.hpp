#pragma once

// Brute-force reference: the waveguide replaced by a tight-binding chain at
// band centre, qubits attached to single sites, outgoing boundary conditions
// imposed by complex absorbing layers. The two-excitation problem is solved
// as a linear system on the full symmetric pair space.

#include "wqed/observables.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wqed {

struct LatticeOptions {
  std::optional<double> spacing; // default: largest d meeting the bandwidth check
  double min_bandwidth = 20.0;   // in units of gamma_ref
  double max_velocity_deviation = 0.01;
  std::size_t cap_sites = 60;
  double cap_strength = 0.3;     // peak absorbing potential in units of the hopping
  double repulsion = 1e5;        // on-site U in units of gamma_ref
  std::size_t basis_cap = 5'000'000;
  bool even_reduction = true;    // single qubit in an infinite guide: keep the even sector only
};

enum class LatticeGeometry {
  Full,        // both ends absorbing, photons incident from the left
  EvenChannel, // half chain of even combinations |j> + |-j>, qubit on the end site
  Mirror,      // absorbing on the left, open end on the right acting as the mirror
};

struct LatticeScatteringProblem {
  ValidatedConfig config;
  LatticeGeometry geometry = LatticeGeometry::Full;
  std::size_t sites = 0;
  double spacing = 0.0;
  double hopping = 0.0;     // J = 1 / (2 d): unit group velocity at band centre
  double band_centre = 0.0; // on-site energy, equal to k0
  double bandwidth = 0.0;   // W actually validated
  double velocity_deviation = 0.0; // worst 1 - v / v0 over [k0 - W, k0 + W]
  std::vector<std::size_t> qubit_sites{};
  std::vector<double> site_coupling{}; // V_i / sqrt(d)
  std::vector<double> bond{};        // hopping on bond (j, j + 1)
  std::vector<double> cap{};         // absorbing potential per site
  double repulsion = 0.0;

  std::size_t modes() const { return sites + config.mode_count(); }
  std::size_t basis_dim() const { return modes() * (modes() + 1) / 2; }
  // Position of site j in the continuum frame of the configuration.
  double position(std::size_t site) const;
  double theta(double omega) const; // lattice momentum per site
  double group_velocity(double omega) const;
  // Sites free of absorption and beyond every qubit: [first, last).
  std::pair<std::size_t, std::size_t> right_region() const;
  std::pair<std::size_t, std::size_t> left_region() const;
};

// Throws DomainError when the bandwidth check fails, CapacityExceeded when the
// pair basis exceeds the cap, and InvalidParameter for M < 400 or qubit
// separations whose band-centre phase is not a multiple of pi / 2.
LatticeScatteringProblem build_lattice(const ValidatedConfig& config, std::size_t sites,
                                       double bandwidth, const LatticeOptions& options = {});

// Largest W whose spacing still fits `decay_lengths` decay lengths of the
// slowest bound-state component on each side of the reference site.
double decay_window_bandwidth(const ValidatedConfig& config, const TwoPhotonSolution& solution,
                              std::size_t sites,
                              const LatticeOptions& options = {}, double decay_lengths = 6.0);

struct LatticeSinglePhoton {
  double omega = 0.0;
  cplx t; // phases referenced to the first qubit site, as in the continuum
  cplx r;
  Eigen::VectorXcd state; // sites then qubit modes, with exact leads instead of absorbers
};

LatticeSinglePhoton lattice_single(const LatticeScatteringProblem& problem, double omega);

// Reflection probability of a unit wave sent into the absorbing layer.
double cap_reflection(const LatticeScatteringProblem& problem, double omega);

// Reflection-phase delay of the Omega = 0 dip turned into a decay rate, 2 / tau.
double wigner_gamma(const LatticeScatteringProblem& problem);

struct LatticeTwoPhotonState {
  double k_in = 0.0;
  double E = 0.0;
  LatticeSinglePhoton incident;
  Eigen::MatrixXcd photon_pair;  // scattered part, site x site
  Eigen::MatrixXcd qubit_photon; // scattered part, qubit mode x site
  Eigen::MatrixXcd qubit_pair;   // scattered part, qubit mode x qubit mode
  double residual = 0.0;         // ||A psi - b|| / ||b|| on the pair space
  double hardcore_fraction = 0.0;   // ||P psi|| / ||psi|| over the absorber-free region
  double hardcore_suppression = 0.0; // ||P psi|| / ||P phi||
  double absorbed_flux = 0.0;    // inelastic flux deposited in the absorbers
  double cap_reflection = 0.0;   // worst single-particle absorber reflection in the spectrum
};

// Throws DomainError if k_in lies outside the validated band, ConvergenceFailure
// when the residual exceeds 1e-8 or the absorbers reflect more than 1e-3.
LatticeTwoPhotonState solve_scattering(const LatticeScatteringProblem& problem, double k_in);

// Outgoing amplitude of the channel at frequency p, projected onto lattice
// plane-wave pairs; same normalization as TwoPhotonSolution::amplitude.
cplx lattice_amplitude(const LatticeScatteringProblem& problem, const LatticeTwoPhotonState& state,
                       Channel ch, double p);

CurveSeries lattice_spectra(const LatticeScatteringProblem& problem,
                            const LatticeTwoPhotonState& state, std::span<const double> omega_grid);

// Unitarity check: F + 4 Re X with X the elastic-bound interference at k_in,
// relative to F (absorbed flux).
double lattice_flux_imbalance(const LatticeScatteringProblem& problem,
                              const LatticeTwoPhotonState& state);

// |psi(x, x + t)|^2 / |t|^4 (or |r|^4) sampled on sites of the outgoing region.
std::vector<double> lattice_g2(const LatticeScatteringProblem& problem,
                               const LatticeTwoPhotonState& state, Direction direction,
                               std::span<const double> delays);

struct WavefunctionComparison {
  double full_l2 = 0.0;  // elastic plus bound
  double bound_l2 = 0.0; // bound part alone
  std::size_t samples = 0;
};

// Relative L2 distance of the outgoing two-photon wave function on every site
// pair of the outgoing regions, carriers removed.
WavefunctionComparison compare_wavefunction(const LatticeScatteringProblem& problem,
                                            const LatticeTwoPhotonState& state,
                                            const TwoPhotonSolution& solution);

struct OracleRow {
  std::size_t sites = 0;
  double spacing = 0.0;
  double spectrum_linf = 0.0; // against the closed form, or the pipeline without one
  WavefunctionComparison wavefunction;
  double flux_pipeline = 0.0;
  double flux_lattice = 0.0;
  double hardcore_fraction = 0.0;
  double residual = 0.0;
  double seconds = 0.0;
};

struct OracleReport {
  std::string config_hash;
  double k_in = 0.0;
  double bandwidth = 0.0;
  std::vector<OracleRow> rows; // one per lattice size
  std::vector<double> orders;  // log2 ratio of successive bound-part errors
  double closed_form_linf = 0.0; // pipeline S vs closed form, NaN when not applicable
  double finite_u_flux_rel = 0.0;
};

// Runs the pipeline and the lattice for each size in `sizes` at the same k_in.
OracleReport oracle_compare(const ValidatedConfig& config, double k_in,
                            const std::vector<std::size_t>& sizes, double bandwidth,
                            const LatticeOptions& options = {});
void write_report(std::ostream& out, const OracleReport& report);

} // namespace wqed
