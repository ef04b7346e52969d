#include "wqed/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace wqed {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::DuplicatePosition: return "DuplicatePosition";
  case ErrorCode::MirrorInsideSystem: return "MirrorInsideSystem";
  case ErrorCode::NonPositiveRate: return "NonPositiveRate";
  case ErrorCode::InvalidParameter: return "InvalidParameter";
  case ErrorCode::EmptySystem: return "EmptySystem";
  case ErrorCode::ConfigParse: return "ConfigParse";
  case ErrorCode::SingularSystem: return "SingularSystem";
  case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
  case ErrorCode::UndefinedPhase: return "UndefinedPhase";
  case ErrorCode::DomainError: return "DomainError";
  case ErrorCode::CapacityExceeded: return "CapacityExceeded";
  }
  return "Unknown";
}

bool is_config_error(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::DuplicatePosition:
  case ErrorCode::MirrorInsideSystem:
  case ErrorCode::NonPositiveRate:
  case ErrorCode::InvalidParameter:
  case ErrorCode::EmptySystem:
  case ErrorCode::ConfigParse:
    return true;
  default:
    return false;
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw Error(ErrorCode::InvalidParameter, std::string(what) + " is not finite");
}

} // namespace

double ValidatedConfig::coupling(std::size_t i) const {
  return std::sqrt(qubit(i).gamma / 2.0);
}

std::optional<double> ValidatedConfig::mirror_position() const {
  if (auto* m = std::get_if<SemiInfinite>(&config_.topology))
    return m->mirror_position;
  return std::nullopt;
}

double ValidatedConfig::mirror_gap() const {
  auto xm = mirror_position();
  if (!xm)
    throw Error(ErrorCode::DomainError, "mirror_gap requested for an infinite waveguide");
  return *xm - config_.qubits.back().position;
}

ValidatedConfig validate(const SystemConfig& config) {
  if (config.qubits.empty())
    throw Error(ErrorCode::EmptySystem, "configuration has no qubits");
  require_finite(config.rabi, "rabi");
  require_finite(config.gamma_ref, "gamma_ref");
  if (config.rabi < 0.0)
    throw Error(ErrorCode::NonPositiveRate, "Rabi frequency must be >= 0");
  if (config.gamma_ref <= 0.0)
    throw Error(ErrorCode::NonPositiveRate, "reference Gamma must be > 0");

  ValidatedConfig out;
  out.config_ = config;
  auto& qs = out.config_.qubits;
  for (const auto& q : qs) {
    require_finite(q.position, "qubit position");
    require_finite(q.gamma, "qubit Gamma");
    require_finite(q.omega_e, "omega_e");
    require_finite(q.delta, "delta");
    if (q.gamma <= 0.0)
      throw Error(ErrorCode::NonPositiveRate, "qubit decay rate must be > 0");
    if (q.omega_e <= 0.0)
      throw Error(ErrorCode::NonPositiveRate, "omega_e must be > 0");
    if (q.omega_e - q.delta <= 0.0)
      throw Error(ErrorCode::NonPositiveRate, "omega_s = omega_e - delta must be > 0");
  }
  std::stable_sort(qs.begin(), qs.end(),
                   [](const QubitSpec& a, const QubitSpec& b) { return a.position < b.position; });
  for (std::size_t i = 1; i < qs.size(); ++i) {
    if (qs[i].position == qs[i - 1].position)
      throw Error(ErrorCode::DuplicatePosition,
                  "two qubits share position " + exact(qs[i].position));
    out.separations_.push_back(qs[i].position - qs[i - 1].position);
  }

  if (auto* m = std::get_if<SemiInfinite>(&out.config_.topology)) {
    require_finite(m->mirror_position, "mirror position");
    if (m->mirror_position <= qs.back().position)
      throw Error(ErrorCode::MirrorInsideSystem,
                  "mirror at " + exact(m->mirror_position) +
                      " is not to the right of every qubit");
    const double phase = out.k0() * (m->mirror_position - qs.back().position);
    if (phase > 2.0 * std::numbers::pi) {
      out.markov_valid_ = false;
      out.warnings_.push_back("k0 * (x_M - x_N) = " + exact(phase) +
                              " exceeds 2 pi; Markovian treatment of the mirror is questionable");
    }
  }

  for (const auto& q : qs) {
    const auto& f = qs.front();
    if (q.gamma != f.gamma || q.omega_e != f.omega_e || q.delta != f.delta)
      out.identical_ = false;
  }

  std::ostringstream key;
  key << "rabi=" << exact(out.config_.rabi) << ";gref=" << exact(out.config_.gamma_ref);
  for (const auto& q : qs)
    key << ";q=" << exact(q.position) << ',' << exact(q.gamma) << ',' << exact(q.omega_e)
        << ',' << exact(q.delta);
  if (auto xm = out.mirror_position())
    key << ";mirror=" << exact(*xm);
  out.hash_ = fnv1a_hex(key.str());
  return out;
}

ValidatedConfig validate(const ValidatedConfig& config) { return validate(config.raw()); }

SystemConfig parse_config(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    SystemConfig cfg;
    const double gamma = j.value("gamma", 1.0);
    const double omega_e = j.value("omega_e", kDefaultOmegaE);
    const double delta = j.value("delta", 0.0);
    cfg.rabi = j.value("rabi", 0.0);
    cfg.gamma_ref = gamma;
    if (!j.contains("qubit_positions"))
      throw Error(ErrorCode::ConfigParse, "config is missing \"qubit_positions\"");
    for (double x : j.at("qubit_positions").get<std::vector<double>>())
      cfg.qubits.push_back(QubitSpec{x, gamma, omega_e, delta});
    if (j.contains("mirror") && !j.at("mirror").is_null())
      cfg.topology = SemiInfinite{j.at("mirror").at("position").get<double>()};
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("malformed config: ") + e.what());
  }
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ConfigParse, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const SystemConfig& config) {
  nlohmann::ordered_json j;
  const QubitSpec& q0 = config.qubits.empty() ? QubitSpec{} : config.qubits.front();
  j["gamma"] = q0.gamma;
  j["omega_e"] = q0.omega_e;
  j["rabi"] = config.rabi;
  j["delta"] = q0.delta;
  std::vector<double> xs;
  for (const auto& q : config.qubits)
    xs.push_back(q.position);
  j["qubit_positions"] = xs;
  if (auto* m = std::get_if<SemiInfinite>(&config.topology))
    j["mirror"] = {{"position", m->mirror_position}};
  else
    j["mirror"] = nullptr;
  return j.dump(2);
}

SystemConfig single_qubit(double rabi, double delta, double omega_e, double gamma) {
  SystemConfig cfg;
  cfg.rabi = rabi;
  cfg.gamma_ref = gamma;
  cfg.qubits.push_back(QubitSpec{0.0, gamma, omega_e, delta});
  return cfg;
}

SystemConfig qubit_with_mirror(double rabi, double k0a, double delta, double omega_e,
                               double gamma) {
  SystemConfig cfg = single_qubit(rabi, delta, omega_e, gamma);
  cfg.topology = SemiInfinite{k0a / omega_e};
  return cfg;
}

SystemConfig qubit_chain(std::size_t n, double rabi, double k0L, double delta, double omega_e,
                         double gamma) {
  SystemConfig cfg;
  cfg.rabi = rabi;
  cfg.gamma_ref = gamma;
  for (std::size_t i = 0; i < n; ++i)
    cfg.qubits.push_back(QubitSpec{static_cast<double>(i) * k0L / omega_e, gamma, omega_e, delta});
  return cfg;
}

} // namespace wqed
