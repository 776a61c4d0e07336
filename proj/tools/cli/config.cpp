#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "esqpt/errors.hpp"

namespace esqpt::cli {

namespace {

const std::set<std::string> kTopLevel = {
    "subcommand", "seed", "workers", "model", "trap", "space", "protocol", "noise", "tolerance",
    "spectrum", "phase_map", "dos", "levels", "wigner", "quench", "ramp", "scan", "mcwf", "diagnose",
    "map_params"};

const std::map<std::string, std::set<std::string>> kBlockKeys = {
    {"model", {"system_size", "coupling", "regime", "energy_scale", "units"}},
    {"trap", {"secular_freq", "red_detuning", "blue_detuning", "lamb_dicke", "rabi_red", "rabi_blue",
              "qubit_freq", "units"}},
    {"space", {"fock_cutoff"}},
    {"protocol", {"duration", "duration_pi", "duration_seconds", "samples"}},
    {"noise", {"motional_dephasing", "qubit_dephasing", "bath_coupling", "thermal_occupation",
               "heating_rate", "damping_rate"}},
    {"tolerance", {"rel_tol", "abs_tol", "scale"}},
};

bool needs_model(const std::string& cmd) {
  return cmd != "phase-map" && cmd != "map-params" && cmd != "validate";
}
bool needs_protocol(const std::string& cmd) {
  return cmd == "ramp" || cmd == "scan" || cmd == "mcwf" || cmd == "diagnose";
}
bool needs_energy_scale(const std::string& cmd) { return cmd == "mcwf" || cmd == "diagnose"; }

std::string block_key(const std::string& cmd) {
  std::string k = cmd;
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

const json& empty_object() {
  static const json e = json::object();
  return e;
}

const json& sub(const json& doc, const std::string& name) {
  auto it = doc.find(name);
  if (it == doc.end()) return empty_object();
  if (!it->is_object()) throw ConfigError("'" + name + "' must be a table/object");
  return *it;
}

void check_keys(const json& block, const std::string& name) {
  auto allowed = kBlockKeys.find(name);
  if (allowed == kBlockKeys.end()) return;
  for (const auto& [key, value] : block.items()) {
    if (!allowed->second.count(key)) throw ConfigError("unknown key '" + key + "' in block '" + name + "'");
  }
}

// Strict mode rethrows; report mode records the message and carries on.
class Steps {
 public:
  explicit Steps(json* issues) : issues_(issues) {}
  void operator()(const std::function<void()>& f) const {
    if (!issues_) return f();
    try {
      f();
    } catch (const std::exception& e) {
      issues_->push_back(e.what());
    }
  }

 private:
  json* issues_;
};

void read_blocks(RunConfig& c, const Steps& step) {
  const json& doc = c.document;
  step([&] {
    if (!doc.is_object()) throw ConfigError("config root must be a table/object");
    for (const auto& [key, value] : doc.items()) {
      if (!kTopLevel.count(key)) throw ConfigError("unknown top-level key '" + key + "'");
    }
  });
  if (!doc.is_object()) return;
  step([&] {
    if (doc.contains("subcommand") && doc["subcommand"] != c.subcommand && c.subcommand != "validate") {
      throw ConfigError("config is for subcommand '" + doc["subcommand"].get<std::string>() + "', not '" +
                        c.subcommand + "'");
    }
  });
  step([&] {
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
      c.seed = doc["seed"].get<std::uint64_t>();
    }
  });
  step([&] {
    if (doc.contains("workers")) {
      if (!doc["workers"].is_number_unsigned()) throw ConfigError("workers must be a non-negative integer");
      c.workers = doc["workers"].get<unsigned>();
    }
  });
  step([&] {
    const json& t = sub(doc, "tolerance");
    check_keys(t, "tolerance");
    if (t.contains("rel_tol")) c.rel_tol = get_number(t, "rel_tol");
    if (t.contains("abs_tol")) c.abs_tol = get_number(t, "abs_tol");
    c.tolerance_scale = get_number(t, "scale", 1.0);
    if (!(c.tolerance_scale > 0.0)) throw ConfigError("tolerance scale must be positive");
    if ((c.rel_tol && !(*c.rel_tol > 0.0)) || (c.abs_tol && !(*c.abs_tol > 0.0))) {
      throw ConfigError("tolerances must be positive");
    }
  });

  step([&] {
    if (doc.contains("model") && doc.contains("trap")) {
      throw ConfigError("give exactly one of 'model' and 'trap'");
    }
  });
  step([&] {
    if (!doc.contains("trap")) return;
    const json& t = sub(doc, "trap");
    check_keys(t, "trap");
    TrapParams trap;
    trap.secular_freq = get_angular(t, "secular_freq", "trap");
    trap.red_detuning = get_angular(t, "red_detuning", "trap");
    trap.blue_detuning = get_angular(t, "blue_detuning", "trap");
    trap.rabi_red = get_angular(t, "rabi_red", "trap");
    trap.rabi_blue = get_angular(t, "rabi_blue", "trap");
    if (t.contains("qubit_freq")) trap.qubit_freq = get_angular(t, "qubit_freq", "trap");
    trap.lamb_dicke = get_number(t, "lamb_dicke");
    c.trap = trap;
    c.model = map_trap_to_model(trap);
  });
  step([&] {
    if (!doc.contains("model")) return;
    const json& m = sub(doc, "model");
    check_keys(m, "model");
    ModelParams p;
    p.system_size = get_number(m, "system_size");
    p.coupling = get_number(m, "coupling");
    p.regime = get_number(m, "regime");
    if (m.contains("energy_scale")) p.energy_scale = get_angular(m, "energy_scale", "model");
    p.validate();
    c.model = p;
  });
  step([&] {
    const json& s = sub(doc, "space");
    check_keys(s, "space");
    if (s.contains("fock_cutoff")) {
      c.fock_cutoff = get_int(s, "fock_cutoff");
      if (*c.fock_cutoff < 1) throw ConfigError("fock_cutoff must be at least 1");
    }
  });
  step([&] {
    if (!doc.contains("protocol")) return;
    const json& p = sub(doc, "protocol");
    check_keys(p, "protocol");
    const int given = p.contains("duration") + p.contains("duration_pi") + p.contains("duration_seconds");
    if (given != 1) throw ConfigError("protocol needs exactly one of duration, duration_pi, duration_seconds");
    c.samples = get_int(p, "samples", 401);
    if (c.samples < 2) throw ConfigError("protocol.samples must be at least 2");
    if (!c.model) throw ConfigError("protocol needs a model or trap block");
    double tau = 0.0;
    if (p.contains("duration")) tau = get_number(p, "duration");
    if (p.contains("duration_pi")) tau = kPi * get_number(p, "duration_pi");
    if (p.contains("duration_seconds")) {
      if (!c.model->energy_scale) throw ConfigError("duration_seconds needs model.energy_scale");
      c.ramp_seconds = get_number(p, "duration_seconds");
      tau = tau_from_lab_time(*c.ramp_seconds, *c.model->energy_scale, c.model->system_size);
    }
    RampProtocol r{c.model->system_size, c.model->regime, c.model->coupling, tau};
    r.validate();
    c.protocol = r;
  });
  step([&] {
    if (!doc.contains("noise")) return;
    const json& n = sub(doc, "noise");
    check_keys(n, "noise");
    DissipatorSpec d;
    d.motional_dephasing = get_number(n, "motional_dephasing", 0.0);
    d.qubit_dephasing = get_number(n, "qubit_dephasing", 0.0);
    if (n.contains("bath_coupling")) d.bath_coupling = get_number(n, "bath_coupling");
    if (n.contains("thermal_occupation")) d.thermal_occupation = get_number(n, "thermal_occupation");
    if (n.contains("heating_rate")) d.heating_rate = get_number(n, "heating_rate");
    if (n.contains("damping_rate")) d.damping_rate = get_number(n, "damping_rate");
    d.validate();
    c.noise = d;
  });
}

void check_requirements(const RunConfig& c, const std::string& cmd, const Steps& step) {
  step([&] {
    if (needs_model(cmd) && !c.model) throw ConfigError(cmd + " needs a 'model' or 'trap' block");
  });
  step([&] {
    if (needs_protocol(cmd) && !c.protocol) throw ConfigError(cmd + " needs a 'protocol' block");
  });
  step([&] {
    if (needs_energy_scale(cmd) && c.model && !c.model->energy_scale) {
      throw ConfigError(cmd + " needs model.energy_scale (or a trap block)");
    }
  });
  step([&] {
    if (cmd == "mcwf" && !c.noise) throw ConfigError("mcwf needs a 'noise' block");
  });
  step([&] {
    if ((cmd == "mcwf" || (cmd == "diagnose" && c.noise)) && !c.seed) {
      throw ConfigError("seed mandatory for trajectory runs");
    }
  });
  step([&] {
    if (cmd == "map-params" && !c.trap && !c.document.contains("map_params")) {
      throw ConfigError("map-params needs a 'trap' block, or 'model' plus 'map_params'");
    }
  });
  step([&] {
    const std::string key = block_key(cmd);
    if (c.document.is_object() && c.document.contains(key)) sub(c.document, key);
  });
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"spectrum", "phase-map", "dos",      "levels",
                                                 "wigner",   "quench",    "ramp",     "scan",
                                                 "mcwf",     "diagnose",  "map-params", "validate"};
  return names;
}

json parse_document(const std::string& text, bool toml) {
  json doc;
  if (toml) {
    try {
      const toml::table table = toml::parse(text);
      std::ostringstream os;
      os << toml::json_formatter{table};
      doc = json::parse(os.str());
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
      throw ConfigError(msg.str());
    }
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("JSON parse error: ") + e.what());
    }
  }
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) return doc["config"];
  return doc;
}

json load_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str(), path.extension() == ".toml");
}

const json& RunConfig::block(const std::string& name) const { return sub(document, name); }

const ModelParams& RunConfig::require_model() const {
  if (!model) throw ConfigError(subcommand + " needs a 'model' or 'trap' block");
  return *model;
}

double RunConfig::require_energy_scale() const {
  const ModelParams& m = require_model();
  if (!m.energy_scale) throw ConfigError(subcommand + " needs model.energy_scale");
  return *m.energy_scale;
}

const RampProtocol& RunConfig::require_protocol() const {
  if (!protocol) throw ConfigError(subcommand + " needs a 'protocol' block");
  return *protocol;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("seed mandatory for trajectory runs");
  return *seed;
}

HilbertSpace RunConfig::space() const {
  if (fock_cutoff) return HilbertSpace(*fock_cutoff);
  const ModelParams& m = require_model();
  return HilbertSpace(default_fock_cutoff(m.system_size, m.coupling));
}

PropagationOptions RunConfig::propagation() const {
  PropagationOptions o;
  if (rel_tol) o.rel_tol = *rel_tol;
  if (abs_tol) o.abs_tol = *abs_tol;
  o.tolerance_scale = tolerance_scale;
  o.samples = samples;
  return o;
}

RunConfig resolve(const std::string& subcommand, json document, const Overrides& overrides) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  if (!document.is_object()) throw ConfigError("config root must be a table/object");
  if (overrides.seed) document["seed"] = *overrides.seed;
  if (overrides.workers) document["workers"] = *overrides.workers;
  if (overrides.tolerance_scale) document["tolerance"]["scale"] = *overrides.tolerance_scale;
  if (subcommand != "validate") document["subcommand"] = subcommand;

  RunConfig c;
  c.subcommand = subcommand;
  c.document = std::move(document);
  const Steps strict(nullptr);
  read_blocks(c, strict);
  check_requirements(c, subcommand, strict);
  return c;
}

json validation_report(const json& document, const std::string& subcommand) {
  json issues = json::array();
  RunConfig c;
  c.subcommand = subcommand.empty() ? "validate" : subcommand;
  c.document = document;
  const Steps collect(&issues);
  read_blocks(c, collect);
  std::string target = subcommand;
  if (target.empty() && document.is_object() && document.contains("subcommand") &&
      document["subcommand"].is_string()) {
    target = document["subcommand"].get<std::string>();
  }
  if (!target.empty() && target != "validate") {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), target) == names.end()) {
      issues.push_back("unknown subcommand '" + target + "'");
    } else {
      check_requirements(c, target, collect);
    }
  }

  json report;
  report["subcommand"] = target.empty() ? json(nullptr) : json(target);
  report["issues"] = issues;
  report["valid"] = issues.empty();
  if (c.model) {
    json m{{"system_size", c.model->system_size}, {"coupling", c.model->coupling}, {"regime", c.model->regime}};
    if (c.model->energy_scale) m["energy_scale_2pi_hz"] = *c.model->energy_scale / kTwoPi;
    report["model"] = m;
  }
  if (document.is_object() && document.contains("trap") && document["trap"].is_object()) {
    // Feasibility is reported even when the mapping itself failed.
    json& f = report["feasibility"];
    try {
      const json& t = document["trap"];
      TrapParams trap;
      trap.secular_freq = get_angular(t, "secular_freq", "trap");
      trap.red_detuning = get_angular(t, "red_detuning", "trap");
      trap.blue_detuning = get_angular(t, "blue_detuning", "trap");
      trap.rabi_red = get_angular(t, "rabi_red", "trap");
      trap.rabi_blue = get_angular(t, "rabi_blue", "trap");
      trap.lamb_dicke = get_number(t, "lamb_dicke");
      const FeasibilityReport r = check_feasibility(trap, c.ramp_seconds.value_or(-1.0));
      f["red_ratio"] = r.red_ratio;
      f["blue_ratio"] = r.blue_ratio;
      f["red_status"] = to_string(r.red_status);
      f["blue_status"] = to_string(r.blue_status);
      f["lamb_dicke_status"] = to_string(r.lamb_dicke_status);
      f["sign_convention"] = r.sign_convention;
      f["overall"] = to_string(r.overall());
      f["messages"] = r.messages;
      if (r.tau_final) f["tau_final"] = *r.tau_final;
    } catch (const std::exception& e) {
      f["error"] = e.what();
    }
  }
  return report;
}

double get_number(const json& block, const std::string& key, std::optional<double> fallback) {
  auto it = block.find(key);
  if (it == block.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing key '" + key + "'");
  }
  if (!it->is_number()) throw ConfigError("'" + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError("'" + key + "' must be finite");
  return v;
}

int get_int(const json& block, const std::string& key, std::optional<int> fallback) {
  auto it = block.find(key);
  if (it == block.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing key '" + key + "'");
  }
  if (!it->is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return it->get<int>();
}

bool get_bool(const json& block, const std::string& key, bool fallback) {
  auto it = block.find(key);
  if (it == block.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return it->get<bool>();
}

double get_angular(const json& block, const std::string& key, const std::string& block_name) {
  auto units = block.find("units");
  if (units == block.end() || *units != "2pi_hz") {
    throw ConfigError("block '" + block_name + "' holds angular frequencies; set units = \"2pi_hz\"");
  }
  return kTwoPi * get_number(block, key);
}

std::vector<double> get_grid(const json& block, const std::string& key) {
  auto it = block.find(key);
  if (it == block.end()) throw ConfigError("missing grid '" + key + "'");
  std::vector<double> out;
  double scale = 1.0;
  if (it->is_array()) {
    for (const auto& v : *it) {
      if (!v.is_number()) throw ConfigError("grid '" + key + "' must hold numbers");
      out.push_back(v.get<double>());
    }
  } else if (it->is_object()) {
    const json& g = *it;
    const double start = get_number(g, "start");
    const double stop = get_number(g, "stop");
    if (g.contains("points") == g.contains("step")) {
      throw ConfigError("grid '" + key + "' needs exactly one of points, step");
    }
    if (g.contains("points")) {
      const int n = get_int(g, "points");
      if (n < 1) throw ConfigError("grid '" + key + "' needs at least one point");
      for (int k = 0; k < n; ++k) out.push_back(n == 1 ? start : start + (stop - start) * k / (n - 1));
    } else {
      const double step = get_number(g, "step");
      if (!(step > 0.0) || stop < start) throw ConfigError("grid '" + key + "' needs step > 0 and stop ≥ start");
      const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
      for (long k = 0; k <= n; ++k) out.push_back(start + step * k);
    }
    if (g.contains("unit")) {
      if (g["unit"] != "pi") throw ConfigError("grid unit must be \"pi\"");
      scale = kPi;
    }
  } else {
    throw ConfigError("grid '" + key + "' must be an array or {start, stop, points|step}");
  }
  if (out.empty()) throw ConfigError("grid '" + key + "' is empty");
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace esqpt::cli
