#pragma once

// Physical description of a waveguide coupled to driven Lambda-type three-level
// systems. Units: hbar = c = 1, rates and frequencies in units of the reference
// decay rate, lengths in c / Gamma.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace wqed {

enum class ErrorCode {
  DuplicatePosition,
  MirrorInsideSystem,
  NonPositiveRate,
  InvalidParameter,
  EmptySystem,
  ConfigParse,
  SingularSystem,
  ConvergenceFailure,
  UndefinedPhase,
  DomainError,
  CapacityExceeded,
};

const char* to_string(ErrorCode code) noexcept;

// Config errors map to CLI exit code 2, everything else to 3.
bool is_config_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

struct QubitSpec {
  double position = 0.0;
  double gamma = 1.0;     // decay rate into the waveguide, Gamma_i = 2 V_i^2
  double omega_e = 100.0; // |g> -> |e> transition frequency
  double delta = 0.0;     // drive detuning, omega_s = omega_e - delta
};

struct Infinite {};

struct SemiInfinite {
  double mirror_position = 0.0;
};

using Topology = std::variant<Infinite, SemiInfinite>;

struct SystemConfig {
  std::vector<QubitSpec> qubits;
  Topology topology = Infinite{};
  double rabi = 0.0; // one classical drive shared by every qubit
  double gamma_ref = 1.0;
};

inline constexpr double kDefaultOmegaE = 100.0;

class ValidatedConfig;

// Returns a validated copy or throws wqed::Error with a config error code.
ValidatedConfig validate(const SystemConfig& config);

// Immutable, validated configuration with derived quantities filled in.
class ValidatedConfig {
public:
  const SystemConfig& raw() const noexcept { return config_; }
  const std::vector<QubitSpec>& qubits() const noexcept { return config_.qubits; }
  std::size_t size() const noexcept { return config_.qubits.size(); }
  const QubitSpec& qubit(std::size_t i) const { return config_.qubits.at(i); }

  double rabi() const noexcept { return config_.rabi; }
  double gamma_ref() const noexcept { return config_.gamma_ref; }
  double omega_s(std::size_t i) const { return qubit(i).omega_e - qubit(i).delta; }
  double coupling(std::size_t i) const;

  // Reference wavevector k0 = omega_e of the first qubit (c = 1). All
  // Markovian phases are frozen at this value.
  double k0() const noexcept { return config_.qubits.front().omega_e; }

  bool semi_infinite() const noexcept {
    return std::holds_alternative<SemiInfinite>(config_.topology);
  }
  std::optional<double> mirror_position() const;
  // x_M - x_N; only meaningful for the semi-infinite topology.
  double mirror_gap() const;
  const std::vector<double>& separations() const noexcept { return separations_; }

  // The s level is dynamically disconnected when the drive is off.
  bool three_level() const noexcept { return config_.rabi > 0.0; }
  std::size_t modes_per_qubit() const noexcept { return three_level() ? 2 : 1; }
  std::size_t mode_count() const noexcept { return size() * modes_per_qubit(); }
  std::size_t e_mode(std::size_t i) const noexcept { return i * modes_per_qubit(); }
  std::size_t s_mode(std::size_t i) const noexcept { return i * modes_per_qubit() + 1; }

  bool identical() const noexcept { return identical_; }
  bool markov_valid() const noexcept { return markov_valid_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  // Stable hex digest of the physical content; used to tag every output.
  const std::string& hash() const noexcept { return hash_; }

  friend bool operator==(const ValidatedConfig& a, const ValidatedConfig& b) {
    return a.hash_ == b.hash_;
  }

private:
  friend ValidatedConfig validate(const SystemConfig& config);
  ValidatedConfig() = default;

  SystemConfig config_;
  std::vector<double> separations_;
  bool identical_ = true;
  bool markov_valid_ = true;
  std::vector<std::string> warnings_;
  std::string hash_;
};

// Idempotent: accepts an already-validated config.
ValidatedConfig validate(const ValidatedConfig& config);

// JSON config ingestion:
//   { "gamma": 1.0, "omega_e": 100.0, "rabi": 0.25, "delta": 0.0,
//     "qubit_positions": [0.0], "mirror": null | {"position": x_M} }
SystemConfig parse_config(const std::string& json_text);
SystemConfig load_config(const std::filesystem::path& path);
std::string to_json(const SystemConfig& config);

// Convenience builders for the three standard setups (identical qubits,
// separations given as phases k0 * L).
SystemConfig single_qubit(double rabi, double delta = 0.0,
                          double omega_e = kDefaultOmegaE, double gamma = 1.0);
SystemConfig qubit_with_mirror(double rabi, double k0a, double delta = 0.0,
                               double omega_e = kDefaultOmegaE, double gamma = 1.0);
SystemConfig qubit_chain(std::size_t n, double rabi, double k0L, double delta = 0.0,
                         double omega_e = kDefaultOmegaE, double gamma = 1.0);

// Stable 64-bit FNV-1a hash of a byte string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

} // namespace wqed
