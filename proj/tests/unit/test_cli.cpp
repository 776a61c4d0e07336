#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "config.hpp"
#include "esqpt/errors.hpp"

using namespace esqpt;
using namespace esqpt::cli;
namespace fs = std::filesystem;

namespace {

const char* kLabTrap = R"({
  "trap": {"units": "2pi_hz", "secular_freq": 1.0e6, "red_detuning": -3600, "blue_detuning": -4100,
           "lamb_dicke": 0.1, "rabi_red": 58700, "rabi_blue": 19600}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("esqpt_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(ESQPT_CLI_BINARY) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

const char* kRampZero = R"({"model": {"system_size": 15.4, "coupling": 4, "regime": 0.5},
  "space": {"fock_cutoff": 40}, "protocol": {"duration": 0}})";

const char* kToyMcwf = R"({
  "model": {"system_size": 4, "coupling": 2, "regime": 0.5, "energy_scale": 0.15915494309189535, "units": "2pi_hz"},
  "space": {"fock_cutoff": 6},
  "protocol": {"duration": 10},
  "noise": {"motional_dephasing": 0.1, "qubit_dephasing": 0.2, "heating_rate": 0.2, "damping_rate": 0.8},
  "mcwf": {"trajectories": 300, "samples": 3}
})";

}  // namespace

TEST(Config, TomlAndJsonAgree) {
  const json a = parse_document(R"({"model": {"system_size": 15.4, "coupling": 4.0, "regime": 0.5}})", false);
  const json b = parse_document("[model]\nsystem_size = 15.4\ncoupling = 4.0\nregime = 0.5\n", true);
  EXPECT_EQ(a, b);
  const RunConfig c = resolve("spectrum", b);
  EXPECT_DOUBLE_EQ(c.model->system_size, 15.4);
  EXPECT_EQ(c.space().fock_cutoff(), default_fock_cutoff(15.4, 4.0));
}

TEST(Config, ParseErrorsAreConfigErrors) {
  EXPECT_THROW(parse_document("{not json", false), ConfigError);
  EXPECT_THROW(parse_document("[model\n", true), ConfigError);
  EXPECT_THROW(load_document("/nonexistent/config.json"), ConfigError);
}

TEST(Config, TrapIsMappedWithExplicitUnits) {
  const RunConfig c = resolve("map-params", parse_document(kLabTrap, false));
  ASSERT_TRUE(c.model && c.trap);
  EXPECT_NEAR(c.trap->secular_freq, kTwoPi * 1.0e6, 1e-6);
  EXPECT_NEAR(c.model->system_size, 15.4, 1e-12);
  EXPECT_NEAR(*c.model->energy_scale / kTwoPi, 980.0, 0.005 * 980.0);

  json no_units = parse_document(kLabTrap, false);
  no_units["trap"].erase("units");
  EXPECT_THROW(resolve("map-params", no_units), ConfigError);
}

TEST(Config, ExactlyOneParameterBlock) {
  json both = parse_document(kLabTrap, false);
  both["model"] = {{"system_size", 1.0}, {"coupling", 0.0}, {"regime", 0.0}};
  EXPECT_THROW(resolve("spectrum", both), ConfigError);
  EXPECT_THROW(resolve("spectrum", json::object()), ConfigError);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(resolve("spectrum", json{{"modle", json::object()}}), ConfigError);
  json doc = parse_document(kRampZero, false);
  doc["protocol"]["durations"] = 1.0;
  EXPECT_THROW(resolve("ramp", doc), ConfigError);
}

TEST(Config, ProtocolDurationForms) {
  json doc = parse_document(kRampZero, false);
  doc["protocol"] = {{"duration_pi", 10}};
  EXPECT_NEAR(resolve("ramp", doc).protocol->duration, 10 * kPi, 1e-12);
  doc["protocol"] = {{"duration_pi", 10}, {"duration", 1}};
  EXPECT_THROW(resolve("ramp", doc), ConfigError);
  doc["protocol"] = {{"duration_seconds", 1.3e-3}};
  EXPECT_THROW(resolve("ramp", doc), ConfigError);  // no energy scale
  doc["model"]["energy_scale"] = 980.0;
  doc["model"]["units"] = "2pi_hz";
  EXPECT_NEAR(resolve("ramp", doc).protocol->duration / kTwoPi, 5.0, 0.05);
}

TEST(Config, Grids) {
  const json b = {{"a", {0.0, 1.0, 2.5}},
                  {"b", {{"start", 0}, {"stop", 1}, {"points", 5}}},
                  {"c", {{"start", 0}, {"stop", 20}, {"step", 5}, {"unit", "pi"}}},
                  {"d", {{"start", 0}, {"stop", 1}}}};
  EXPECT_EQ(get_grid(b, "a").size(), 3u);
  EXPECT_DOUBLE_EQ(get_grid(b, "b")[1], 0.25);
  const auto c = get_grid(b, "c");
  ASSERT_EQ(c.size(), 5u);
  EXPECT_NEAR(c.back(), 20 * kPi, 1e-12);
  EXPECT_THROW(get_grid(b, "d"), ConfigError);
  EXPECT_THROW(get_grid(b, "missing"), ConfigError);
}

TEST(Config, OverridesAreMergedIntoTheEffectiveDocument) {
  Overrides o;
  o.seed = 7;
  o.tolerance_scale = 0.5;
  const RunConfig c = resolve("ramp", parse_document(kRampZero, false), o);
  EXPECT_EQ(*c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.propagation().tolerance_scale, 0.5);
  EXPECT_EQ(c.document["seed"], 7);
  EXPECT_EQ(c.document["subcommand"], "ramp");
}

TEST(Config, McwfNeedsSeed) {
  const json doc = parse_document(kToyMcwf, false);
  try {
    resolve("mcwf", doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("seed mandatory"), std::string::npos);
  }
  Overrides o;
  o.seed = 1;
  EXPECT_NO_THROW(resolve("mcwf", doc, o));
}

TEST(Validate, ReportsInvariantViolations) {
  const json report = validation_report(
      json{{"model", {{"system_size", 15.4}, {"coupling", 4.0}, {"regime", 1.5}}}, {"subcommand", "spectrum"}});
  EXPECT_FALSE(report["valid"]);
  bool found = false;
  for (const auto& issue : report["issues"]) found |= issue.get<std::string>().find("regime") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, LabTrapIsFeasible) {
  const json report = validation_report(parse_document(kLabTrap, false));
  EXPECT_TRUE(report["valid"]);
  EXPECT_EQ(report["feasibility"]["overall"], "pass");
  EXPECT_NEAR(report["feasibility"]["red_ratio"].get<double>(), 0.0036, 1e-6);
}

TEST(Validate, MissingSeedListed) {
  const json report = validation_report(parse_document(kToyMcwf, false), "mcwf");
  EXPECT_FALSE(report["valid"]);
  ASSERT_EQ(report["issues"].size(), 1u);
  EXPECT_EQ(report["issues"][0], "seed mandatory for trajectory runs");
}

TEST(Binary, MapParamsLabTrap) {
  const fs::path dir = scratch("map");
  const fs::path cfg = write_config(dir, "trap.json", kLabTrap);
  ASSERT_EQ(run_binary("map-params --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  const json m = read_json(dir / "out" / "mapping.json");
  EXPECT_NEAR(m["model"]["system_size"].get<double>(), 15.4, 1e-12);
  EXPECT_NEAR(m["model"]["coupling"].get<double>(), 4.0, 0.01);
  EXPECT_NEAR(m["model"]["regime"].get<double>(), 0.5, 0.002);
  EXPECT_NEAR(m["model"]["energy_scale_2pi_hz"].get<double>(), 980.0, 5.0);
  EXPECT_EQ(m["feasibility"]["overall"], "pass");
  const json manifest = read_json(dir / "out" / "manifest.json");
  EXPECT_EQ(manifest["exit_code"], 0);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
  EXPECT_TRUE(manifest["versions"].contains("eigen"));
}

TEST(Binary, RampAtZeroDurationWritesOneRow) {
  const fs::path dir = scratch("ramp0");
  const fs::path cfg = write_config(dir, "ramp.toml",
                                    "[model]\nsystem_size = 15.4\ncoupling = 4.0\nregime = 0.5\n"
                                    "[space]\nfock_cutoff = 40\n[protocol]\nduration = 0.0\n");
  ASSERT_EQ(run_binary("ramp --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  std::istringstream csv(slurp(dir / "out" / "witness.csv"));
  std::string header, row, extra;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "tau,lambda,h_mean,n_mean,jz_mean,p0");
  EXPECT_EQ(row, "0,4,-0.5,0,-0.5,1");
  EXPECT_FALSE(std::getline(csv, extra));
}

TEST(Binary, DeterministicAndReconstructibleFromManifest) {
  const fs::path dir = scratch("det");
  const fs::path cfg = write_config(dir, "mcwf.json", kToyMcwf);
  const std::string base = "mcwf --config " + cfg.string() + " --seed 11";
  ASSERT_EQ(run_binary(base + " --workers 1 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_binary(base + " --workers 2 --out " + (dir / "b").string()), 0);
  ASSERT_EQ(run_binary("mcwf --config " + (dir / "a" / "manifest.json").string() + " --out " + (dir / "c").string()),
            0);
  for (const char* f : {"mcwf.json", "mcwf_series.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
  const json summary = read_json(dir / "a" / "mcwf.json");
  EXPECT_EQ(summary["trajectories"], 300);
  EXPECT_EQ(read_json(dir / "a" / "manifest.json")["seed"], 11);
}

TEST(Binary, ConfigErrorExitsTwo) {
  const fs::path dir = scratch("cfgerr");
  const fs::path cfg = write_config(dir, "mcwf.json", kToyMcwf);
  EXPECT_EQ(run_binary("mcwf --config " + cfg.string() + " --out " + (dir / "out").string()), 2);
  EXPECT_EQ(read_json(dir / "out" / "manifest.json")["exit_code"], 2);
  EXPECT_EQ(run_binary("ramp --config " + (dir / "missing.json").string() + " --out " + (dir / "o2").string()), 2);
  EXPECT_EQ(run_binary("ramp --out " + (dir / "o3").string()), 2);
}

TEST(Binary, NumericFailureExitsThreeWithDiagnostics) {
  const fs::path dir = scratch("numeric");
  const fs::path cfg = write_config(
      dir, "ramp.json",
      R"({"model": {"system_size": 15.4, "coupling": 4, "regime": 0.5}, "space": {"fock_cutoff": 10},
          "protocol": {"duration_pi": 10}})");
  EXPECT_EQ(run_binary("ramp --config " + cfg.string() + " --out " + (dir / "out").string()), 3);
  const json d = read_json(dir / "out" / "diagnostics.json");
  EXPECT_EQ(d["kind"], "CutoffError");
  EXPECT_EQ(d["config"]["space"]["fock_cutoff"], 10);
}

TEST(Binary, ValidateIsReportOnly) {
  const fs::path dir = scratch("validate");
  const fs::path cfg = write_config(dir, "bad.json", R"({"model": {"system_size": 15.4, "coupling": 4, "regime": 1.5}})");
  EXPECT_EQ(run_binary("validate --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  EXPECT_FALSE(read_json(dir / "out" / "report.json")["valid"]);
}
