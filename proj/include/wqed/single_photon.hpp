#pragma once

// Exact one-excitation scattering: plane waves between delta-coupled qubits,
// matched at every qubit, with an optional hard-wall mirror on the right.

#include "wqed/curve.hpp"
#include "wqed/model.hpp"

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <vector>

namespace wqed {

using cplx = std::complex<double>;

// Exact keeps every propagation phase e^{i k x}. Markovian freezes the phases
// at k0, which is the model the two-photon sector is built on.
enum class PhaseModel { Exact, Markovian };

// Plane-wave coefficients between scatterers: right mover A e^{ikx}, left
// mover B e^{-ikx}, valid for x in [left, right].
struct FieldRegion {
  double left = 0.0;
  double right = 0.0;
  cplx right_amp;
  cplx left_amp;
};

struct SinglePhotonSolution {
  double k = 0.0;
  cplx t;                 // zero for the semi-infinite topology
  cplx r;
  Eigen::VectorXcd e;     // excited-level amplitude per qubit
  Eigen::VectorXcd s;     // metastable-level amplitude per qubit (zero if rabi == 0)
  std::vector<FieldRegion> regions;
  double condition = 1.0; // 2-norm condition number of the matching system

  double transmission() const { return std::norm(t); }
  double reflection() const { return std::norm(r); }
};

// Throws ErrorCode::SingularSystem (message carries the condition number) at
// an exact dark-state degeneracy; callers may retry at k +- eps.
SinglePhotonSolution solve_single(const ValidatedConfig& config, double k,
                                  PhaseModel model = PhaseModel::Exact);

// T(k) = |t|^2 on the grid plus Re/Im of t and r. Points where the solver
// fails are flagged and filled with NaN.
CurveSeries transmission_curve(const ValidatedConfig& config, std::span<const double> k_grid,
                               PhaseModel model = PhaseModel::Exact);

struct TimeDelay {
  double tau = 0.0;
  double error = 0.0;
};

// Group delay d(arg a)/dk of t (infinite) or r (semi-infinite), by central
// differences at h and h/2 combined with one Richardson step.
TimeDelay time_delay(const ValidatedConfig& config, double k,
                     PhaseModel model = PhaseModel::Exact, double h = 1e-6);

// Markovian effective description of the qubit sector. Modes are ordered
// (e_1, s_1, e_2, s_2, ...) or (e_1, e_2, ...) when the drive is off.
struct EffectiveModel {
  Eigen::MatrixXcd hamiltonian; // non-Hermitian, complex symmetric
  Eigen::VectorXcd drive;       // overlap of a left-incident unit plane wave
  Eigen::VectorXcd emit_right;  // projection of qubit modes onto outgoing R
  Eigen::VectorXcd emit_left;   // projection of qubit modes onto outgoing L
  cplx bare_reflection;         // -e^{2 i k0 x_M}, zero when infinite
  bool semi_infinite = false;
  double k0 = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(hamiltonian.rows()); }
  // Drive vector for a unit plane wave incident from the right (infinite only).
  Eigen::VectorXcd drive_from_right() const { return emit_right; }
};

EffectiveModel effective_model(const ValidatedConfig& config);

// Qubit amplitudes, t and r of the Markovian model at momentum k.
struct MarkovAmplitudes {
  Eigen::VectorXcd modes;
  cplx t;
  cplx r;
};
MarkovAmplitudes markov_amplitudes(const EffectiveModel& model, cplx k);

} // namespace wqed
