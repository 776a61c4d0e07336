#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/observables.hpp"
#include "esqpt/semiclassics.hpp"
#include "esqpt/spectrum.hpp"

#ifndef ESQPT_VERSION
#define ESQPT_VERSION "unknown"
#endif

namespace esqpt::cli {

namespace fs = std::filesystem;

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::ofstream OutputDir::open(const std::string& name) {
  std::ofstream os(root_ / name);
  if (!os) throw std::runtime_error("cannot create " + (root_ / name).string());
  files_.push_back(name);
  return os;
}

void OutputDir::write_json(const std::string& name, const json& value) {
  write(name, [&](std::ostream& os) { os << value.dump(2) << '\n'; });
}

namespace {

json model_json(const ModelParams& m) {
  json j{{"system_size", m.system_size}, {"coupling", m.coupling}, {"regime", m.regime}};
  if (m.energy_scale) {
    j["energy_scale_rad_s"] = *m.energy_scale;
    j["energy_scale_2pi_hz"] = *m.energy_scale / kTwoPi;
  }
  return j;
}

json summary_json(const RampSummary& s) {
  return {{"p0", s.p0},         {"p0_tilde", s.p0_tilde}, {"pdown", s.pdown},          {"n_mean", s.n_mean},
          {"jz_mean", s.jz_mean}, {"h_mean", s.h_mean},   {"norm_drift", s.norm_drift}};
}

bool has_emergent_phase(double coupling, double regime) {
  return critical_set(coupling, regime).e_sad.has_value();
}

QuantumState eigenstate(const Spectrum& spec, std::size_t j) {
  return QuantumState(spec.space, spec.eigenvectors.col(static_cast<Eigen::Index>(j)).cast<cplx>());
}

json cmd_spectrum(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const json& b = c.block("spectrum");
  Selection sel = Selection::all();
  if (b.contains("levels") && b.contains("window")) throw ConfigError("spectrum: give levels or window, not both");
  if (b.contains("levels")) sel = Selection::lowest(get_int(b, "levels"));
  if (b.contains("window")) {
    const auto w = get_grid(b, "window");
    if (w.size() != 2) throw ConfigError("spectrum.window must be [lower, upper]");
    sel = Selection::window(w[0], w[1]);
  }
  const Spectrum spec = diagonalize_erm(m, c.space(), sel);
  PeresLattice lattice = peres_lattice(spec);
  json summary;
  summary["spectrum"] = to_json(spec);
  summary["phase"] = to_string(classify_phase(m.coupling, m.regime).label);
  if (has_emergent_phase(m.coupling, m.regime)) {
    const EmergentClassification em = classify_emergent(spec, m.coupling, m.regime, m.system_size);
    for (std::size_t j : em.indices) lattice[j].emergent = true;
    summary["emergent"] = {{"count", em.indices.size()},       {"predicted", em.predicted},
                           {"relative_error", em.relative_error}, {"window_lower", em.window_lower},
                           {"window_upper", em.window_upper},   {"n_threshold", em.n_threshold}};
  }
  out.write("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, spec); });
  out.write("peres.csv", [&](std::ostream& os) { write_peres_csv(os, lattice); });
  out.write_json("spectrum.json", summary);
  return summary;
}

json cmd_phase_map(const RunConfig& c, OutputDir& out) {
  const json& b = c.block("phase_map");
  const auto lambdas = get_grid(b, "lambda");
  const auto deltas = get_grid(b, "delta");
  const auto rows = phase_map(lambdas, deltas, get_bool(b, "volumes", true), c.workers);
  out.write("phase_map.csv", [&](std::ostream& os) { write_phase_map_csv(os, rows); });
  std::map<std::string, int> counts;
  for (const auto& r : rows) ++counts[to_string(r.phase.label)];
  return {{"points", rows.size()}, {"phases", counts}};
}

json cmd_dos(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const json& b = c.block("dos");
  const Spectrum spec = diagonalize_erm(m, c.space(), Selection::all(), {.vectors = false});
  const double sigma = get_number(b, "sigma");
  const DosCurve dos = smoothed_dos(spec, sigma, get_int(b, "points", 2001), get_number(b, "lower", 0.0),
                                    get_number(b, "upper", 0.0));
  out.write("dos.csv", [&](std::ostream& os) {
    os << "energy,density\n" << std::setprecision(12);
    for (std::size_t k = 0; k < dos.energy.size(); ++k) os << dos.energy[k] << ',' << dos.density[k] << '\n';
  });
  json summary{{"sigma", dos.sigma}, {"levels", spec.size()}, {"model", model_json(m)}};
  const CriticalSet cs = critical_set(m.coupling, m.regime);
  summary["e_min"] = cs.e_min;
  summary["e_vac"] = cs.e_vac;
  if (cs.e_sad) summary["e_sad"] = *cs.e_sad;
  out.write_json("dos.json", summary);
  return summary;
}

json cmd_levels(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const json& b = c.block("levels");
  const auto grid = get_grid(b, "lambda");
  const int count = get_int(b, "count", 40);
  double lmax = 0.0;
  for (double l : grid) lmax = std::max(lmax, l);
  const HilbertSpace space = c.fock_cutoff ? HilbertSpace(*c.fock_cutoff)
                                           : HilbertSpace(default_fock_cutoff(m.system_size, lmax));
  const auto rows = level_dynamics(m.system_size, m.regime, grid, count, space, c.workers);
  out.write("levels.csv", [&](std::ostream& os) { write_levels_csv(os, rows); });
  return {{"rows", rows.size()}, {"fock_cutoff", space.fock_cutoff()}};
}

// Excited states reach beyond the default extent: widen to the turning point
// of the highest Fock level holding weight, unless an extent is configured.
std::vector<double> state_axis(const QuantumState& psi, const std::vector<double>& base, const json& b,
                               double system_size, int points) {
  double extent = base.back();
  if (b.contains("extent")) {
    extent = get_number(b, "extent");
    if (!(extent > 0.0)) throw ConfigError("wigner.extent must be positive");
  } else {
    const Eigen::VectorXd pops = psi.fock_populations();
    double tail = 0.0;
    Eigen::Index top = pops.size() - 1;
    while (top > 0 && tail + pops[top] < 1e-8) tail += pops[top--];
    extent = std::max(extent, std::sqrt((2.0 * top + 1.0) / system_size) + 3.0 / std::sqrt(system_size));
  }
  std::vector<double> axis(points);
  for (int i = 0; i < points; ++i) axis[i] = -extent + 2.0 * extent * i / (points - 1);
  return axis;
}

json cmd_wigner(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const json& b = c.block("wigner");
  if (!b.contains("states") || !b["states"].is_array() || b["states"].empty()) {
    throw ConfigError("wigner.states must list eigenstate indices");
  }
  std::vector<int> states;
  for (const auto& v : b["states"]) {
    if (!v.is_number_integer() || v.get<int>() < 0) throw ConfigError("wigner.states must hold indices ≥ 0");
    states.push_back(v.get<int>());
  }
  const int highest = *std::max_element(states.begin(), states.end());
  const Spectrum spec = diagonalize_erm(m, c.space(), Selection::lowest(highest + 1));
  const int points = get_int(b, "points", 201);
  const auto base_axis = default_wigner_axis(m.coupling, m.regime, m.system_size, points);
  WignerOptions wo;
  wo.workers = c.workers;
  const PeresLattice lattice = peres_lattice(spec);
  json panels = json::array();
  for (int j : states) {
    const QuantumState psi = eigenstate(spec, static_cast<std::size_t>(j));
    const WignerGrid w =
        wigner(reduced_motional(psi), m.system_size, state_axis(psi, base_axis, b, m.system_size, points),
               state_axis(psi, base_axis, b, m.system_size, points), wo);
    const std::string name = "wigner_" + std::to_string(j) + ".csv";
    out.write(name, [&](std::ostream& os) { write_wigner_csv(os, w); });
    panels.push_back({{"index", j},
                      {"energy", spec.eigenvalues[j]},
                      {"n_mean", lattice[j].n_mean},
                      {"entropy", lattice[j].entropy},
                      {"integral", w.integral()},
                      {"minimum", w.values.minCoeff()},
                      {"file", name}});
  }
  json summary{{"panels", panels}, {"model", model_json(m)}};
  out.write_json("wigner.json", summary);
  return summary;
}

json cmd_quench(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const HilbertSpace space = c.space();
  const Spectrum spec = diagonalize_erm(m, space);
  const StrengthFunction sf = strength_function(QuantumState::vacuum(space), spec);
  out.write("strength.csv", [&](std::ostream& os) { write_strength_csv(os, sf); });
  json summary{{"total", sf.total}, {"mean_energy", sf.mean_energy()}, {"model", model_json(m)}};
  const CriticalSet cs = critical_set(m.coupling, m.regime);
  if (cs.e_sad) {
    double inside = 0.0;
    for (const auto& e : sf.entries) inside += (e.energy > *cs.e_sad && e.energy < cs.e_vac) ? e.weight : 0.0;
    summary["weight_between_saddle_and_vacuum"] = inside;
  }
  out.write_json("strength.json", summary);
  return summary;
}

json cmd_ramp(const RunConfig& c, OutputDir& out) {
  const RampProtocol& p = c.require_protocol();
  const StateTrajectory tr = propagate_schrodinger(QuantumState::vacuum(c.space()), p, c.propagation());
  const QuantumState end = tr.final_state();
  RampSummary s = summarize(end, p);
  s.norm_drift = tr.stats.norm_drift;
  out.write("witness.csv", [&](std::ostream& os) { write_witness_csv(os, witness_series(tr)); });
  const DownProjection d = down_project(end);
  out.write("motional_populations.csv", [&](std::ostream& os) {
    os << "n,population\n" << std::setprecision(12);
    for (Eigen::Index n = 0; n < d.motional.size(); ++n) os << n << ',' << std::norm(d.motional[n]) << '\n';
  });
  json summary{{"summary", summary_json(s)},
               {"tau_final", p.duration},
               {"fock_cutoff", end.space.fock_cutoff()},
               {"tail_mass", end.tail_mass()},
               {"steps", tr.stats.steps},
               {"rejected_steps", tr.stats.rejected}};
  out.write_json("ramp.json", summary);
  return summary;
}

json cmd_scan(const RunConfig& c, OutputDir& out) {
  const json& b = c.block("scan");
  const ScanAxis axis = scan_axis_from_string(b.value("axis", std::string("tau_f")));
  const auto grid = get_grid(b, "values");
  PropagationOptions o = c.propagation();
  const auto pts = ramp_scan(axis, grid, c.require_protocol(), c.fock_cutoff.value_or(0), o, c.workers);
  out.write("scan.csv", [&](std::ostream& os) { write_scan_csv(os, pts); });
  return {{"axis", to_string(axis)}, {"points", pts.size()}};
}

McwfOptions mcwf_options(const RunConfig& c) {
  McwfOptions o;
  o.tolerance_scale = c.tolerance_scale;
  o.workers = c.workers;
  return o;
}

json cmd_mcwf(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const RampProtocol& p = c.require_protocol();
  const json& b = c.block("mcwf");
  const int trajectories = get_int(b, "trajectories");
  if (trajectories < 2) throw ConfigError("mcwf.trajectories must be at least 2");
  const int samples = get_int(b, "samples", 1);
  if (samples < 1) throw ConfigError("mcwf.samples must be at least 1");

  const HilbertSpace space = c.space();
  const NoiseModel noise = build_dissipators(*c.noise, c.require_energy_scale(), m.system_size, space);
  McwfOptions o = mcwf_options(c);
  if (samples > 1) {
    for (int k = 0; k < samples; ++k) o.sample_times.push_back(p.duration * k / (samples - 1));
  }
  const TrajectoryEnsemble e = mcwf_evolve(QuantumState::vacuum(space), p, noise,
                                           static_cast<std::size_t>(trajectories), c.require_seed(), o);

  const std::vector<std::pair<std::string, std::string>> observables = {
      {"p0", ""}, {"pdown", ""}, {"n", "n2"}, {"jz", "jz2"}};
  json results;
  for (const auto& [name, square] : observables) results[name] = to_json(mcwf_expectation(e, name, std::nullopt, square));
  const double p0 = results["p0"]["mean"];
  const double pdown = results["pdown"]["mean"];
  json summary{{"observables", results},
               {"p0_tilde", p0 / pdown},
               {"ensemble", esqpt::summary_json(e)},
               {"trajectories", trajectories},
               {"tau_final", p.duration},
               {"fock_cutoff", space.fock_cutoff()},
               {"model", model_json(m)}};
  out.write_json("mcwf.json", summary);
  out.write("mcwf_series.csv", [&](std::ostream& os) {
    os << "tau";
    for (const auto& [name, square] : observables) os << ',' << name << "_mean," << name << "_mre";
    os << '\n' << std::setprecision(12);
    for (std::size_t k = 0; k < e.sample_times.size(); ++k) {
      os << e.sample_times[k];
      for (const auto& [name, square] : observables) {
        const McwfResult r = mcwf_expectation(e, name, k);
        os << ',' << r.mean << ',' << r.mre;
      }
      os << '\n';
    }
  });
  return summary;
}

json cmd_diagnose(const RunConfig& c, OutputDir& out) {
  const ModelParams& m = c.require_model();
  const RampProtocol& p = c.require_protocol();
  const json& b = c.block("diagnose");
  double eta_omega = 0.0;
  if (b.contains("eta_omega")) {
    eta_omega = get_angular(b, "eta_omega", "diagnose");
  } else if (c.trap) {
    eta_omega = c.trap->lamb_dicke * c.trap->rabi_blue;
  } else {
    throw ConfigError("diagnose needs diagnose.eta_omega (units = \"2pi_hz\") or a trap block");
  }
  if (!(eta_omega > 0.0)) throw ConfigError("diagnose.eta_omega must be positive");
  const double t_max = get_number(b, "duration_seconds", 10.0 * kTwoPi / eta_omega);
  const int points = get_int(b, "points", 401);
  if (points < 2 || !(t_max > 0.0)) throw ConfigError("diagnose needs points ≥ 2 and duration_seconds > 0");
  std::vector<double> times(points);
  for (int k = 0; k < points; ++k) times[k] = t_max * k / (points - 1);

  const HilbertSpace space = c.space();
  std::vector<Eigen::VectorXcd> motional;
  std::vector<double> weights;
  double direct_p0_tilde = 0.0;
  if (c.noise) {
    const int trajectories = get_int(b, "trajectories", 1000);
    if (trajectories < 1) throw ConfigError("diagnose.trajectories must be positive");
    const NoiseModel noise = build_dissipators(*c.noise, c.require_energy_scale(), m.system_size, space);
    McwfOptions o = mcwf_options(c);
    o.keep_final_states = true;
    const TrajectoryEnsemble e =
        mcwf_evolve(QuantumState::vacuum(space), p, noise, static_cast<std::size_t>(trajectories), *c.seed, o);
    direct_p0_tilde = mcwf_expectation(e, "p0").mean / mcwf_expectation(e, "pdown").mean;
    for (const auto& tr : e.trajectories) {
      const QuantumState psi(space, tr.final_state / std::sqrt(tr.final_state.squaredNorm()));
      const DownProjection d = down_project(psi);
      motional.push_back(d.motional);
      weights.push_back(tr.weight * d.pdown);
    }
  } else {
    const QuantumState end = propagate(QuantumState::vacuum(space), p, c.propagation(), nullptr);
    const DownProjection d = down_project(end);
    direct_p0_tilde = summarize(end, p).p0_tilde;
    motional.push_back(d.motional);
    weights.push_back(1.0);
  }

  Eigen::VectorXd populations = Eigen::VectorXd::Zero(space.fock_cutoff() + 1);
  double total = 0.0;
  for (std::size_t k = 0; k < motional.size(); ++k) {
    populations += weights[k] * motional[k].cwiseAbs2();
    total += weights[k];
  }
  populations /= total;

  const std::vector<double> unitary = blue_sideband_signal(populations, eta_omega, times);
  out.write("rabi_unitary.csv", [&](std::ostream& os) {
    os << "t_seconds,jz\n" << std::setprecision(12);
    for (int k = 0; k < points; ++k) os << times[k] << ',' << unitary[k] << '\n';
  });

  std::vector<double> signal = unitary;
  if (c.noise) {
    // Independent stream for the second stage.
    const std::uint64_t stage_seed = *c.seed + 0x9E3779B97F4A7C15ULL;
    const RabiSignal noisy = blue_sideband_mcwf(motional, weights, eta_omega, times, *c.noise, stage_seed,
                                                mcwf_options(c));
    out.write("rabi.csv", [&](std::ostream& os) { write_rabi_csv(os, noisy); });
    signal = noisy.jz_mean;
  }

  FitOptions fo;
  fo.damped = get_bool(b, "damped", true);
  const int components = b.contains("components") ? get_int(b, "components") : default_component_count(populations);
  const VacuumFit fit = extract_vacuum_population(times, signal, eta_omega, components, fo);
  json summary{{"p0_fit", fit.p0},
               {"p0_fit_error", fit.p0_error},
               {"p0_direct", direct_p0_tilde},
               {"components", components},
               {"residual_rms", fit.residual_rms},
               {"condition_number", fit.condition_number},
               {"constrained", fit.constrained},
               {"fitted_populations", std::vector<double>(fit.populations.data(),
                                                          fit.populations.data() + fit.populations.size())},
               {"fitted_damping", std::vector<double>(fit.damping.data(), fit.damping.data() + fit.damping.size())},
               {"eta_omega_2pi_hz", eta_omega / kTwoPi},
               {"noisy", c.noise.has_value()},
               {"tau_final", p.duration}};
  out.write_json("diagnose.json", summary);
  return summary;
}

json cmd_map_params(const RunConfig& c, OutputDir& out) {
  json summary;
  if (c.trap) {
    const FeasibilityReport r = check_feasibility(*c.trap, c.ramp_seconds.value_or(-1.0));
    summary["model"] = model_json(*c.model);
    summary["feasibility"] = {{"red_ratio", r.red_ratio},
                              {"blue_ratio", r.blue_ratio},
                              {"red_status", to_string(r.red_status)},
                              {"blue_status", to_string(r.blue_status)},
                              {"lamb_dicke_status", to_string(r.lamb_dicke_status)},
                              {"sign_convention", r.sign_convention},
                              {"overall", to_string(r.overall())},
                              {"messages", r.messages}};
    if (r.tau_final) summary["tau_final"] = *r.tau_final;
  } else {
    const ModelParams& m = c.require_model();
    if (!m.energy_scale) throw ConfigError("inverse mapping needs model.energy_scale");
    const json& b = c.block("map_params");
    const TrapParams t = map_model_to_trap(m, get_angular(b, "secular_freq", "map_params"), get_number(b, "lamb_dicke"));
    summary["trap_2pi_hz"] = {{"secular_freq", t.secular_freq / kTwoPi}, {"red_detuning", t.red_detuning / kTwoPi},
                              {"blue_detuning", t.blue_detuning / kTwoPi}, {"rabi_red", t.rabi_red / kTwoPi},
                              {"rabi_blue", t.rabi_blue / kTwoPi},       {"lamb_dicke", t.lamb_dicke}};
  }
  out.write_json("mapping.json", summary);
  return summary;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json versions() {
  return {{"esqpt", ESQPT_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const StiffnessError*>(&e)) return "StiffnessError";
  if (dynamic_cast<const CutoffError*>(&e)) return "CutoffError";
  if (dynamic_cast<const CoverageError*>(&e)) return "CoverageError";
  if (dynamic_cast<const FitDegeneracyError*>(&e)) return "FitDegeneracyError";
  if (dynamic_cast<const ProjectionError*>(&e)) return "ProjectionError";
  if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
  if (dynamic_cast<const ConventionError*>(&e)) return "ConventionError";
  if (dynamic_cast<const ParameterError*>(&e)) return "ParameterError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const PhaseError*>(&e)) return "PhaseError";
  if (dynamic_cast<const OracleScopeError*>(&e)) return "OracleScopeError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "Exception";
}

}  // namespace

json run_subcommand(const RunConfig& c, OutputDir& out) {
  const std::string& s = c.subcommand;
  if (s == "spectrum") return cmd_spectrum(c, out);
  if (s == "phase-map") return cmd_phase_map(c, out);
  if (s == "dos") return cmd_dos(c, out);
  if (s == "levels") return cmd_levels(c, out);
  if (s == "wigner") return cmd_wigner(c, out);
  if (s == "quench") return cmd_quench(c, out);
  if (s == "ramp") return cmd_ramp(c, out);
  if (s == "scan") return cmd_scan(c, out);
  if (s == "mcwf") return cmd_mcwf(c, out);
  if (s == "diagnose") return cmd_diagnose(c, out);
  if (s == "map-params") return cmd_map_params(c, out);
  throw ConfigError("unknown subcommand '" + s + "'");
}

int run(const Invocation& inv, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  json manifest;
  manifest["manifest_version"] = 1;
  manifest["subcommand"] = inv.subcommand;
  manifest["config_path"] = inv.config.string();
  manifest["versions"] = versions();
  manifest["started_utc"] = utc_now();

  std::optional<OutputDir> out;
  int status = kSuccess;
  auto fail = [&](int code, const std::exception& e) {
    status = code;
    manifest["error"] = {{"kind", error_kind(e)}, {"message", e.what()}};
    log << "esqpt " << inv.subcommand << ": " << error_kind(e) << ": " << e.what() << '\n';
  };

  json document;
  try {
    out.emplace(inv.out);
    document = load_document(inv.config);
    if (inv.subcommand == "validate") {
      const json report = validation_report(document);
      out->write_json("report.json", report);
      log << report.dump(2) << '\n';
      manifest["config"] = document;
    } else {
      const RunConfig config = resolve(inv.subcommand, document, inv.overrides);
      manifest["config"] = config.document;
      manifest["seed"] = config.seed ? json(*config.seed) : json(nullptr);
      manifest["workers"] = config.workers;
      manifest["tolerance_scale"] = config.tolerance_scale;
      const json summary = run_subcommand(config, *out);
      log << summary.dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    fail(kConfigFailure, e);
  } catch (const ParameterError& e) {
    fail(kConfigFailure, e);
  } catch (const PhaseError& e) {
    fail(kConfigFailure, e);
  } catch (const std::exception& e) {
    fail(kNumericFailure, e);
    if (out) {
      try {
        out->write_json("diagnostics.json", {{"subcommand", inv.subcommand},
                                             {"kind", error_kind(e)},
                                             {"message", e.what()},
                                             {"config", manifest.value("config", document)}});
      } catch (const std::exception&) {
      }
    }
  }

  manifest["exit_code"] = status;
  manifest["finished_utc"] = utc_now();
  manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out) {
    manifest["outputs"] = out->files();
    try {
      std::ofstream os(out->root() / "manifest.json");
      os << manifest.dump(2) << '\n';
    } catch (const std::exception&) {
    }
  }
  return status;
}

}  // namespace esqpt::cli
