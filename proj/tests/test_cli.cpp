#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kBinary = WQED_CLI_PATH;
const fs::path kConfigs = WQED_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wqed_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + kBinary.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string config(const std::string& name) { return (kConfigs / name).string(); }

} // namespace

TEST_CASE("flux sweep writes a CSV tagged with the manifest hash") {
  const fs::path out = scratch("flux");
  REQUIRE(run("flux --config " + config("single3ls.json") + " --kmin 97 --kmax 103 --points 61 --out " +
              out.string()) == 0);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  const std::string csv = slurp(out / "flux.csv");
  CHECK(csv.find("manifest_hash=" + manifest["manifest_hash"].get<std::string>()) != std::string::npos);
  CHECK(csv.find("k,F") != std::string::npos);
  CHECK(manifest["command"] == "flux");
  CHECK(manifest.contains("wall_clock_seconds"));
}

TEST_CASE("identical requests give byte-identical output, independent of jobs") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string args = "flux --config " + config("two3ls.json") + " --kmin 98 --kmax 102 --points 41";
  REQUIRE(run(args + " --jobs 1 --out " + a.string()) == 0);
  REQUIRE(run(args + " --jobs 3 --out " + b.string()) == 0);
  CHECK(slurp(a / "flux.csv") == slurp(b / "flux.csv"));
}

TEST_CASE("output directory comes from the flag, then the environment") {
  const fs::path env = scratch("env"), flag = scratch("flag");
  const std::string args = "transmission --config " + config("single3ls.json") + " --points 5";
  REQUIRE(run(args, "WQED_OUTPUT_DIR=" + env.string()) == 0);
  CHECK(fs::exists(env / "transmission.csv"));
  REQUIRE(run(args + " --out " + flag.string(), "WQED_OUTPUT_DIR=" + env.string() + "_unused") == 0);
  CHECK(fs::exists(flag / "transmission.csv"));
  CHECK_FALSE(fs::exists(env.string() + "_unused"));
}

TEST_CASE("spectrum and g2 chain the peak search") {
  const fs::path out = scratch("chain");
  REQUIRE(run("spectrum --at-peak --config " + config("single3ls.json") + " --omega-grid 99:101:21 --out " +
              out.string()) == 0);
  CHECK(slurp(out / "spectrum.csv").find("omega,S_R,S_L") != std::string::npos);
  REQUIRE(run("g2 --at-peak --direction L --config " + config("mirror.json") + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "g2_L.csv"));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["diagnostics"].contains("peak"));
}

TEST_CASE("delay of two emitters") {
  const fs::path out = scratch("delay");
  REQUIRE(run("delay --config " + config("two3ls.json") + " --k 100 --out " + out.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "delay.json"));
  CHECK(j["tau"].get<double>() == doctest::Approx(64.0).epsilon(1e-3));
}

TEST_CASE("exit codes and error records") {
  const fs::path out = scratch("errors");
  fs::create_directories(out);
  std::ofstream(out / "dup.json") << R"({"gamma": 1, "omega_e": 100, "rabi": 0.25, "delta": 0,
                                         "qubit_positions": [0, 0], "mirror": null})";
  CHECK(run("flux --config " + (out / "dup.json").string() + " --out " + out.string()) == 2);
  const auto err = nlohmann::json::parse(slurp(out / "error.json"));
  CHECK(err["error"] == "DuplicatePosition");
  CHECK(run("flux --config " + (out / "missing.json").string()) == 2);
  CHECK(run("spectrum --config " + config("single3ls.json") + " --omega-grid 3:1:5") == 2);
  CHECK(run("g2 --direction R --k 100 --config " + config("mirror.json") + " --out " + out.string()) == 3);
  CHECK(run("nonsense") == 2);
}

TEST_CASE("closed-form oracle comparison") {
  const fs::path out = scratch("oracle");
  CHECK(run("oracle-compare --closed-form --config " + config("single3ls.json") + " --out " + out.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "oracle_report.json"));
  CHECK(j["spectrum_linf"].get<double>() < 1e-6);
}

TEST_CASE("figure presets emit every panel and a summary") {
  const fs::path out = scratch("reproduce");
  REQUIRE(run("reproduce fig2 --out " + out.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "fig2" / "summary.json"));
  REQUIRE(j["T_at_peak"].size() == 2);
  CHECK(j["T_at_peak"][0].get<double>() == doctest::Approx(0.393).epsilon(0.005 / 0.393));
  CHECK(fs::exists(out / "fig2" / "rabi_1_g2_L.csv"));
  CHECK(run("reproduce fig9 --out " + out.string()) == 2);
}
