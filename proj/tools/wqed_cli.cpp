#include "wqed/analytic_oracle.hpp"
#include "wqed/lattice_oracle.hpp"
#include "wqed/observables.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace wqed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitThreshold = 4;

struct Grid {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 0;
};

Grid parse_grid(const std::string& text) {
  Grid g;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> g.lo >> c1 >> g.hi >> c2 >> g.points) || c1 != ':' || c2 != ':' || !in.eof() ||
      !(g.hi > g.lo) || g.points < 2)
    throw Error(ErrorCode::InvalidParameter, "grid must read lo:hi:points with hi > lo and points >= 2");
  return g;
}

// Everything that determines the numbers of one invocation; its hash tags
// every CSV so identical requests produce identical files.
class Run {
public:
  Run(std::string command, fs::path out) : command_(std::move(command)), out_(std::move(out)) {
    start_ = std::chrono::steady_clock::now();
  }

  json& args() { return args_; }
  json& diagnostics() { return diag_; }
  void set_config(const std::string& path, const ValidatedConfig& cfg) {
    config_path_ = path;
    config_hash_ = cfg.hash();
  }

  std::string hash() const {
    json key;
    key["command"] = command_;
    key["args"] = args_;
    key["config_hash"] = config_hash_;
    return fnv1a_hex(key.dump());
  }

  fs::path file(const std::string& name) const { return out_ / name; }

  void write_curve(const std::string& name, const CurveSeries& series, bool normalize = false) {
    fs::create_directories(out_);
    std::ofstream f(file(name));
    write_csv(f, series, CsvOptions{hash(), normalize});
    if (!f)
      throw Error(ErrorCode::InvalidParameter, "cannot write " + file(name).string());
    outputs_.push_back(name);
  }

  void write_json(const std::string& name, const json& j) {
    fs::create_directories(out_);
    std::ofstream f(file(name));
    f << j.dump(2) << '\n';
    outputs_.push_back(name);
  }

  void finish() {
    json m;
    m["command"] = command_;
    m["config_path"] = config_path_;
    m["config_hash"] = config_hash_;
    m["manifest_hash"] = hash();
    m["args"] = args_;
    m["output_dir"] = out_.string();
    m["outputs"] = outputs_;
    m["diagnostics"] = diag_;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fs::create_directories(out_);
    std::ofstream f(file("manifest.json"));
    f << m.dump(2) << '\n';
  }

private:
  std::string command_;
  fs::path out_;
  json args_ = json::object();
  json diag_ = json::object();
  std::string config_path_;
  std::string config_hash_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

json flags_of(const CurveSeries& s) {
  json bad = json::array();
  for (std::size_t i = 0; i < s.point_flags.size(); ++i)
    if (!s.point_flags[i].empty())
      bad.push_back({{"index", i}, {"axis", s.axis[i]}, {"flag", s.point_flags[i]}});
  return bad;
}

json peak_json(const PeakReport& p) {
  json j;
  j["k_peak"] = p.k_peak;
  j["F_peak"] = p.f_peak;
  j["T_at_peak"] = p.t_at_peak;
  if (p.twin)
    j["twin"] = *p.twin;
  return j;
}

double single_intensity(const ValidatedConfig& cfg, double k) {
  const SinglePhotonSolution s = solve_single(cfg, k);
  return cfg.semi_infinite() ? s.reflection() : s.transmission();
}

std::vector<double> delay_grid(double t_max, std::size_t points) {
  if (!(t_max > 0.0) || points < 2)
    throw Error(ErrorCode::InvalidParameter, "g2 needs t-max > 0 and at least two points");
  return linspace(0.0, t_max, points);
}

// Panels for one configuration: T or R, F, spectra and g2 at the flux peak.
json figure_panels(Run& run, const std::string& tag, const ValidatedConfig& cfg, unsigned jobs) {
  const double w0 = cfg.k0();
  const double gamma = cfg.gamma_ref();
  const std::vector<double> ks = linspace(w0 - 3.0 * gamma, w0 + 3.0 * gamma, 1201);
  run.write_curve(tag + "_transmission.csv", transmission_curve(cfg, ks));
  const CurveSeries flux = flux_curve(cfg, ks, jobs);
  run.write_curve(tag + "_flux.csv", flux);
  const PeakReport peak = find_k_peak(cfg, std::nullopt, jobs);
  const std::vector<double> ws = linspace(peak.k_peak - 3.0 * gamma, peak.k_peak + 3.0 * gamma, 1201);
  run.write_curve(tag + "_spectrum.csv", power_spectra(cfg, peak.k_peak, ws));
  const std::vector<double> ts = linspace(0.0, 10.0 / gamma, 501);
  json g2_zero;
  for (Direction d : {Direction::R, Direction::L}) {
    if (d == Direction::R && cfg.semi_infinite())
      continue;
    const std::string name = tag + "_g2_" + std::string(to_string(d)) + ".csv";
    try {
      const CurveSeries g = g2(cfg, peak.k_peak, d, ts);
      run.write_curve(name, g);
      g2_zero[std::string(to_string(d))] = g.column("g2").front();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DomainError)
        throw;
      g2_zero[std::string(to_string(d))] = nullptr;
    }
  }
  json j = peak_json(peak);
  j["g2_at_zero"] = g2_zero;
  j["flagged_points"] = flags_of(flux);
  return j;
}

int run_reproduce(const std::string& figure, const fs::path& out, unsigned jobs) {
  Run run("reproduce " + figure, out / figure);
  run.args()["figure"] = figure;
  json summary;
  summary["figure"] = figure;
  const double pi = std::numbers::pi;
  if (figure == "fig2") {
    // Single emitter, omega0 = omega_s = 100, Delta = 0, drive Gamma/4 and Gamma.
    json rows = json::array();
    for (auto [label, rabi] : {std::pair{"rabi_0.25", 0.25}, std::pair{"rabi_1", 1.0}}) {
      const ValidatedConfig cfg = validate(single_qubit(rabi));
      json row = figure_panels(run, label, cfg, jobs);
      row["rabi"] = rabi;
      rows.push_back(row);
    }
    summary["panels"] = rows;
  } else if (figure == "fig3") {
    // Emitter in front of a mirror, k0 a in {pi/2, pi/4}; both drive presets are emitted.
    json rows = json::array();
    for (auto [alabel, k0a] : {std::pair{"k0a_pi_2", pi / 2.0}, std::pair{"k0a_pi_4", pi / 4.0}})
      for (auto [rlabel, rabi] : {std::pair{"rabi_0.25", 0.25}, std::pair{"rabi_1", 1.0}}) {
        const ValidatedConfig cfg = validate(qubit_with_mirror(rabi, k0a));
        json row = figure_panels(run, std::string(alabel) + "_" + rlabel, cfg, jobs);
        row["k0a"] = k0a;
        row["rabi"] = rabi;
        rows.push_back(row);
      }
    summary["panels"] = rows;
  } else if (figure == "fig4") {
    // Two emitters, k0 L in {pi/2, pi/4}, drive Gamma/4 and Gamma.
    json rows = json::array();
    for (auto [llabel, k0l] : {std::pair{"k0L_pi_2", pi / 2.0}, std::pair{"k0L_pi_4", pi / 4.0}})
      for (auto [rlabel, rabi] : {std::pair{"rabi_0.25", 0.25}, std::pair{"rabi_1", 1.0}}) {
        const ValidatedConfig cfg = validate(qubit_chain(2, rabi, k0l));
        json row = figure_panels(run, std::string(llabel) + "_" + rlabel, cfg, jobs);
        row["k0L"] = k0l;
        row["rabi"] = rabi;
        rows.push_back(row);
      }
    summary["panels"] = rows;
  } else {
    throw Error(ErrorCode::InvalidParameter, "unknown figure " + figure + " (fig2, fig3 or fig4)");
  }
  json ts = json::array();
  for (const json& row : summary["panels"])
    ts.push_back(row["T_at_peak"]);
  summary["T_at_peak"] = ts;
  run.write_json("summary.json", summary);
  run.finish();
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

void print_error(const std::string& code, const std::string& message, int exit_code,
                 const std::optional<fs::path>& out = std::nullopt) {
  json j;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  std::cerr << j.dump() << '\n';
  if (!out)
    return;
  std::error_code ec;
  fs::create_directories(*out, ec);
  std::ofstream f(*out / "error.json");
  f << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-photon scattering off driven three-level emitters in a waveguide"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_flag;
  unsigned jobs = 1;
  app.add_option("--out", out_flag, "Output directory (overrides WQED_OUTPUT_DIR)");
  app.add_option("--jobs", jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);

  std::string config_path;
  double kmin = 97.0, kmax = 103.0;
  std::size_t points = 1201;
  std::string omega_grid, direction = "both", window;
  double k = std::nan("");
  bool at_peak = false;
  double t_max = 10.0;
  std::size_t t_points = 201;
  bool markov = false;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "System JSON")->required(); };
  auto add_kgrid = [&](CLI::App* sub) {
    sub->add_option("--kmin", kmin);
    sub->add_option("--kmax", kmax);
    sub->add_option("--points", points);
  };

  auto* transmission = app.add_subcommand("transmission", "Single-photon T(k) and amplitudes");
  add_config(transmission);
  add_kgrid(transmission);
  transmission->add_flag("--markov", markov, "Freeze propagation phases at k0");

  auto* flux = app.add_subcommand("flux", "Inelastic flux F(k)");
  add_config(flux);
  add_kgrid(flux);

  auto* spectrum = app.add_subcommand("spectrum", "Inelastic power spectra at one k_in");
  add_config(spectrum);
  spectrum->add_option("--k", k, "Incoming momentum");
  spectrum->add_flag("--at-peak", at_peak, "Use the flux maximum as k_in");
  spectrum->add_option("--omega-grid", omega_grid, "lo:hi:points");
  spectrum->add_option("--direction", direction, "R, L or both");

  auto* corr = app.add_subcommand("g2", "Second-order correlation of the outgoing photons");
  add_config(corr);
  corr->add_option("--k", k, "Incoming momentum");
  corr->add_flag("--at-peak", at_peak, "Use the flux maximum as k_in");
  corr->add_option("--t-max", t_max);
  corr->add_option("--t-points", t_points);
  corr->add_option("--direction", direction, "R or L")->required();

  auto* peak = app.add_subcommand("find-peak", "Maximum of the inelastic flux");
  add_config(peak);
  peak->add_option("--window", window, "lo:hi search window");

  auto* delay = app.add_subcommand("delay", "Single-photon group delay");
  add_config(delay);
  delay->add_option("--k", k, "Momentum")->required();

  std::string figure;
  auto* reproduce = app.add_subcommand("reproduce", "All panels of a preset figure");
  reproduce->add_option("figure", figure, "fig2, fig3 or fig4")->required();

  std::size_t sites = 800;
  std::string bandwidth = "20";
  bool doubling = false, closed_form = false;
  auto* oracle = app.add_subcommand("oracle-compare", "Pipeline against the lattice oracle");
  add_config(oracle);
  oracle->add_option("--k", k, "Incoming momentum (default: flux maximum)");
  oracle->add_option("--sites", sites, "Lattice sites M");
  oracle->add_option("--bandwidth", bandwidth, "W in units of gamma, or 'auto' to fit the decay window");
  oracle->add_flag("--doubling", doubling, "Also run 2M and report the convergence order");
  oracle->add_flag("--closed-form", closed_form, "Only compare the numerical spectrum with the closed form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0)
      return kExitOk;
    print_error("UsageError", e.what(), kExitConfig);
    return kExitConfig;
  }

  fs::path out = ".";
  if (const char* env = std::getenv("WQED_OUTPUT_DIR"); env && *env)
    out = env;
  if (!out_flag.empty())
    out = out_flag;

  try {
    if (*reproduce)
      return run_reproduce(figure, out, jobs);

    const ValidatedConfig cfg = validate(load_config(config_path));
    for (const std::string& w : cfg.warnings())
      std::cerr << "warning: " << w << '\n';
    CLI::App* sub = app.get_subcommands().front();
    Run run(sub->get_name(), out);
    run.set_config(config_path, cfg);

    auto incoming = [&]() {
      if (at_peak) {
        const PeakReport p = find_k_peak(cfg, std::nullopt, jobs);
        run.diagnostics()["peak"] = peak_json(p);
        return p.k_peak;
      }
      if (std::isnan(k))
        throw Error(ErrorCode::InvalidParameter, "give --k or --at-peak");
      return k;
    };

    if (*transmission || *flux) {
      if (!(kmax > kmin) || points < 2)
        throw Error(ErrorCode::InvalidParameter, "need kmax > kmin and at least two points");
      run.args() = {{"kmin", kmin}, {"kmax", kmax}, {"points", points}, {"markov", markov}};
      const std::vector<double> ks = linspace(kmin, kmax, points);
      const CurveSeries s = *flux ? flux_curve(cfg, ks, jobs)
                                  : transmission_curve(cfg, ks, markov ? PhaseModel::Markovian : PhaseModel::Exact);
      run.diagnostics()["flagged_points"] = flags_of(s);
      run.write_curve(*flux ? "flux.csv" : "transmission.csv", s);
    } else if (*spectrum) {
      const double kin = incoming();
      Grid g{kin - 4.0 * cfg.gamma_ref(), kin + 4.0 * cfg.gamma_ref(), 801};
      if (!omega_grid.empty())
        g = parse_grid(omega_grid);
      run.args() = {{"k_in", kin}, {"omega_grid", {g.lo, g.hi, g.points}}, {"direction", direction}};
      const std::vector<double> ws = linspace(g.lo, g.hi, g.points);
      const CurveSeries s = direction == "both" ? power_spectra(cfg, kin, ws)
                                                : power_spectrum(cfg, kin, parse_direction(direction), ws);
      run.write_curve("spectrum.csv", s);
    } else if (*corr) {
      const double kin = incoming();
      const Direction d = parse_direction(direction);
      run.args() = {{"k_in", kin}, {"t_max", t_max}, {"t_points", t_points}, {"direction", direction}};
      run.write_curve("g2_" + std::string(to_string(d)) + ".csv", g2(cfg, kin, d, delay_grid(t_max, t_points)));
    } else if (*peak) {
      std::optional<std::pair<double, double>> win;
      if (!window.empty()) {
        const Grid g = parse_grid(window + ":2");
        win = std::pair{g.lo, g.hi};
      }
      run.args() = {{"window", window}};
      const PeakReport p = find_k_peak(cfg, win, jobs);
      json j = peak_json(p);
      j["grid_points"] = p.grid_points;
      run.write_json("peak.json", j);
      std::cout << j.dump(2) << '\n';
    } else if (*delay) {
      run.args() = {{"k", k}};
      const TimeDelay d = time_delay(cfg, k);
      json j;
      j["k"] = k;
      j["tau"] = d.tau;
      j["error_estimate"] = d.error;
      j["intensity"] = single_intensity(cfg, k);
      run.write_json("delay.json", j);
      std::cout << j.dump(2) << '\n';
    } else if (*oracle) {
      at_peak = std::isnan(k);
      const double kin = incoming();
      if (closed_form) {
        if (cfg.size() != 1 || cfg.semi_infinite())
          throw Error(ErrorCode::InvalidParameter, "the closed form covers a single emitter in an infinite guide");
        const double gamma = cfg.gamma_ref();
        const std::vector<double> ws = linspace(kin - 4.0 * gamma, kin + 4.0 * gamma, 801);
        const CurveSeries num = power_spectrum(cfg, kin, Direction::R, ws);
        const CurveSeries ref = s_closed_curve(gamma, cfg.rabi(), cfg.k0(), kin, ws);
        double worst = 0.0, top = 0.0;
        for (std::size_t i = 0; i < ws.size(); ++i) {
          worst = std::max(worst, std::abs(num.column("S_R")[i] - ref.columns.front().second[i]));
          top = std::max(top, ref.columns.front().second[i]);
        }
        run.args() = {{"k_in", kin}, {"closed_form", true}};
        json j;
        j["k_in"] = kin;
        j["spectrum_linf"] = worst / top;
        j["threshold"] = 1e-6;
        j["pass"] = worst / top < 1e-6;
        run.write_json("oracle_report.json", j);
        run.finish();
        std::cout << j.dump(2) << '\n';
        return worst / top < 1e-6 ? kExitOk : kExitThreshold;
      }
      LatticeOptions opt;
      double w = 0.0;
      if (bandwidth == "auto") {
        GridOptions grid;
        grid.sample = false;
        w = decay_window_bandwidth(cfg, scatter_two(cfg, kin, grid), sites, opt);
        opt.min_bandwidth = 0.0;
      } else {
        w = std::stod(bandwidth);
      }
      std::vector<std::size_t> sizes{sites};
      if (doubling)
        sizes.push_back(2 * sites);
      run.args() = {{"k_in", kin}, {"sites", sizes}, {"bandwidth", w}};
      const OracleReport rep = oracle_compare(cfg, kin, sizes, w, opt);
      std::ostringstream text;
      write_report(text, rep);
      run.write_json("oracle_report.json", json::parse(text.str()));
      std::cout << text.str();
      bool ok = rep.finite_u_flux_rel < 1e-3;
      for (const OracleRow& row : rep.rows) {
        ok = ok && row.wavefunction.full_l2 < 0.02 && row.hardcore_fraction < 1e-6;
        if (cfg.size() == 1 && !cfg.semi_infinite())
          ok = ok && row.spectrum_linf < (row.sites >= 1600 ? 0.02 : 0.05);
      }
      run.diagnostics()["thresholds_met"] = ok;
      run.finish();
      return ok ? kExitOk : kExitThreshold;
    }
    run.finish();
    return kExitOk;
  } catch (const Error& e) {
    const int code = is_config_error(e.code()) ? kExitConfig : kExitSolver;
    print_error(to_string(e.code()), e.what(), code, out);
    return code;
  } catch (const std::exception& e) {
    print_error("InvalidParameter", e.what(), kExitConfig, out);
    return kExitConfig;
  }
}
