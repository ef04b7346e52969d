#pragma once

// Two-photon scattering with bosonized qubits. The hardcore constraint is a
// contact repulsion U on the doubly excited states of each qubit, solved by
// the Lippmann-Schwinger equation and taken to U -> infinity analytically.

#include "wqed/single_photon.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wqed {

// Outgoing two-photon channels: both right-going, both left-going, or one of
// each. Only LL exists in front of a mirror.
enum class Channel { RR, LL, RL };
std::string_view to_string(Channel ch);
std::vector<Channel> channels(const ValidatedConfig& config);

// Doubly excited local states {ee_i, ss_i, es_i}; only ee_i when the drive is
// off, since the metastable level then never couples to the guide.
struct DoublySubspace {
  enum class Kind { EE, SS, ES };
  struct State {
    std::size_t qubit;
    Kind kind;
  };
  std::vector<State> states;
  // Columns are the normalized symmetric two-mode tensors of each state,
  // flattened as vec(M) with M(a, b) on the qubit-mode pair (a, b).
  Eigen::MatrixXd embedding;

  std::size_t dim() const { return states.size(); }
};
DoublySubspace doubly_subspace(const ValidatedConfig& config);

enum class G0Method { Resolvent, Quadrature };

struct G0QuadratureOptions {
  std::vector<double> epsilons{1e-3, 1e-4, 1e-5}; // in units of gamma_ref
  double rel_tol = 1e-9;
  double abs_tol = 1e-13;
};

struct G0QuadratureReport {
  Eigen::MatrixXcd value;               // Richardson extrapolation to eps -> 0
  std::vector<Eigen::MatrixXcd> at_eps; // raw values per epsilon
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

// Pair propagator <d_m|(E + i0 - H_0)^{-1}|d_n> on the doubly excited
// subspace. Resolvent closes both momentum contours at once and reduces to
// the two-excitation resolvent of the effective qubit Hamiltonian.
Eigen::MatrixXcd g0_matrix(const ValidatedConfig& config, double E,
                           G0Method method = G0Method::Resolvent);

// Direct double momentum integral over the single-photon scattering states
// with a finite i*eps, for eps in options.epsilons, then extrapolated.
G0QuadratureReport g0_quadrature(const ValidatedConfig& config, double E,
                                 const G0QuadratureOptions& options = {});

// Hardcore limit -G0^{-1}, or U (1 - G0 U)^{-1} for a finite repulsion U.
// Throws SingularSystem when cond(G0) exceeds 1e12.
Eigen::MatrixXcd t_matrix(const ValidatedConfig& config, double E,
                          std::optional<double> repulsion = std::nullopt);

struct PoleTerm {
  cplx position;
  cplx residue;
};

struct GridOptions {
  double tolerance = 1e-6;       // linear-interpolation error relative to sup |B|
  std::size_t initial_points = 401;
  std::size_t max_points = 200000;
  bool sample = true; // false skips the p-grid (amplitudes stay available on demand)
  std::optional<double> repulsion; // finite U instead of the hardcore limit
};

struct TwoPhotonSolution {
  std::string config_hash;
  double k_in = 0.0;
  double E = 0.0;
  bool semi_infinite = false;
  double x_min = 0.0; // scattering region [x_min, x_max]
  double x_max = 0.0;
  EffectiveModel model;

  cplx t;       // single-photon amplitudes at k_in (Markovian model)
  cplx r;
  cplx elastic_rr;
  cplx elastic_ll;
  cplx elastic_rl;

  DoublySubspace subspace;
  Eigen::MatrixXcd t_matrix;
  Eigen::VectorXcd incoming;   // projection of the free pair onto the subspace
  Eigen::VectorXcd correction; // T * incoming
  Eigen::MatrixXcd pair_state; // symmetric qubit-pair tensor of the correction

  std::vector<double> p_grid;
  std::vector<cplx> b_rr;
  std::vector<cplx> b_ll;
  std::vector<cplx> b_rl;
  std::vector<PoleTerm> poles_rr; // residues are empty at degenerate poles
  std::vector<PoleTerm> poles_ll;
  std::vector<PoleTerm> poles_rl;
  bool simple_poles = true;
  double grid_error = 0.0;
  // (E - K)^{-T} (w_a (x) w_b) per channel, reshaped to a mode-pair matrix.
  Eigen::MatrixXcd emission_rr;
  Eigen::MatrixXcd emission_ll;
  Eigen::MatrixXcd emission_rl;
  // With a diagonalizable H the amplitude is sum_jk K_jk / ((p - l_j)(E - p - l_k)).
  bool diagonal_form = false;
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd kernel_rr;
  Eigen::MatrixXcd kernel_ll;
  Eigen::MatrixXcd kernel_rl;

  bool has_channel(Channel ch) const { return !semi_infinite || ch == Channel::LL; }
  cplx elastic(Channel ch) const;
  // Bound-state amplitude of one photon at frequency p and the other at
  // E - p. For RL the first photon is the right-going one.
  cplx amplitude(Channel ch, double p) const;
  // Power carried into direction R (or L) at frequency w.
  double spectrum_right(double w) const;
  double spectrum_left(double w) const;
  // Bound part as a function of the signed separation (carrier removed).
  cplx bound_relative(Channel ch, double tau) const;
  // Slowest decay rate of the bound part, from the pole table.
  double slowest_rate() const;
};

TwoPhotonSolution scatter_two(const ValidatedConfig& config, double k_in,
                              const GridOptions& grid = {});

// Bound part of the outgoing wave function at (x1, x2), including the
// centre-of-mass phase. For RL, x1 is the right-going photon.
cplx bound_realspace(const TwoPhotonSolution& solution, Channel ch, double x1, double x2);

// Full outgoing amplitude: elastic plane-wave pair plus bound part.
cplx outgoing_realspace(const TwoPhotonSolution& solution, Channel ch, double x1, double x2);

void write_csv(std::ostream& out, const TwoPhotonSolution& solution);
// Line-oriented "key value..." text dump, consumed by the oracle comparator.
void write_dump(std::ostream& out, const TwoPhotonSolution& solution);

} // namespace wqed
