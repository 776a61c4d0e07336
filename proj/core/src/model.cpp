#include "esqpt/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "esqpt/errors.hpp"

namespace esqpt {

void ModelParams::validate() const {
  std::ostringstream msg;
  if (!(system_size > 0.0) || !std::isfinite(system_size)) {
    msg << "system size must be positive, got " << system_size;
    throw ParameterError(msg.str());
  }
  if (!(coupling >= 0.0) || !std::isfinite(coupling)) {
    msg << "coupling must be non-negative, got " << coupling;
    throw ParameterError(msg.str());
  }
  if (!(regime >= -1.0 && regime <= 1.0)) {
    msg << "regime must lie in [-1, 1], got " << regime;
    throw ParameterError(msg.str());
  }
  if (energy_scale && !(*energy_scale > 0.0)) {
    msg << "energy scale must be positive, got " << *energy_scale;
    throw ParameterError(msg.str());
  }
}

double ModelParams::energy_scale_joule() const {
  if (!energy_scale) throw ParameterError("energy scale not set");
  return kHbar * *energy_scale;
}

bool TrapParams::sign_convention_holds() const {
  return (red_detuning + blue_detuning) < 0.0 && red_detuning > blue_detuning;
}

HilbertSpace::HilbertSpace(int fock_cutoff) : fock_cutoff_(fock_cutoff) {
  if (fock_cutoff < 0) throw ParameterError("Fock cutoff must be non-negative");
}

int default_fock_cutoff(double system_size, double max_coupling) {
  double xc2 = 0.0;
  if (max_coupling > 1.0) {
    xc2 = 0.5 * max_coupling * max_coupling * (1.0 - std::pow(max_coupling, -4.0));
  }
  return static_cast<int>(std::ceil(system_size * std::max(4.0 * xc2, 8.0) + 40.0));
}

ModelParams map_trap_to_model(const TrapParams& trap) {
  if (!trap.sign_convention_holds()) {
    std::ostringstream msg;
    msg << "detuning convention requires (d_r + d_b) < 0 and d_r > d_b; got d_r = "
        << trap.red_detuning << ", d_b = " << trap.blue_detuning;
    throw ConventionError(msg.str());
  }
  if (!(trap.lamb_dicke > 0.0)) throw ParameterError("Lamb-Dicke parameter must be positive");
  if (trap.rabi_red < 0.0 || trap.rabi_blue < 0.0) {
    throw ParameterError("Rabi frequencies must be non-negative");
  }
  const double rabi_sum = trap.rabi_red + trap.rabi_blue;
  if (rabi_sum == 0.0) throw UndefinedRegimeError("regime undefined for zero total Rabi frequency");

  const double db = trap.blue_detuning;
  const double dr = trap.red_detuning;
  const double root = std::sqrt(db * db - dr * dr);
  const double big_lambda = trap.lamb_dicke * rabi_sum / 2.0;

  ModelParams p;
  p.energy_scale = root / 2.0;
  p.system_size = (db + dr) / (db - dr);
  p.coupling = 2.0 * big_lambda / root;
  p.regime = (trap.rabi_red - trap.rabi_blue) / rabi_sum;
  return p;
}

TrapParams map_model_to_trap(const ModelParams& params, double secular_freq, double lamb_dicke,
                             double qubit_freq) {
  params.validate();
  if (!params.energy_scale) throw ParameterError("energy scale required for the inverse mapping");
  if (!(lamb_dicke > 0.0)) throw ParameterError("Lamb-Dicke parameter must be positive");
  const double root = 2.0 * *params.energy_scale;  // √(δ_b² − δ_r²)
  const double sqrt_delta = std::sqrt(params.system_size);
  TrapParams t;
  t.secular_freq = secular_freq;
  t.lamb_dicke = lamb_dicke;
  t.qubit_freq = qubit_freq;
  t.blue_detuning = -0.5 * root * (sqrt_delta + 1.0 / sqrt_delta);
  t.red_detuning = -0.5 * root * (sqrt_delta - 1.0 / sqrt_delta);
  const double rabi_sum = params.coupling * root / lamb_dicke;
  t.rabi_red = 0.5 * rabi_sum * (1.0 + params.regime);
  t.rabi_blue = 0.5 * rabi_sum * (1.0 - params.regime);
  return t;
}

std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Warn: return "warn";
    case CheckStatus::Fail: return "fail";
  }
  return "fail";
}

CheckStatus FeasibilityReport::overall() const {
  CheckStatus worst = CheckStatus::Pass;
  for (auto s : {red_status, blue_status, lamb_dicke_status}) worst = std::max(worst, s);
  if (!sign_convention) worst = CheckStatus::Fail;
  return worst;
}

namespace {

CheckStatus grade(double value, double pass, double warn) {
  if (!std::isfinite(value)) return CheckStatus::Fail;
  if (value <= pass) return CheckStatus::Pass;
  if (value <= warn) return CheckStatus::Warn;
  return CheckStatus::Fail;
}

}  // namespace

FeasibilityReport check_feasibility(const TrapParams& trap, double ramp_duration,
                                    const FeasibilityThresholds& thresholds) {
  if (!(trap.secular_freq > 0.0)) throw ParameterError("secular frequency must be positive");
  FeasibilityReport r;
  r.red_ratio = std::abs(trap.red_detuning) / trap.secular_freq;
  r.blue_ratio = std::abs(trap.blue_detuning) / trap.secular_freq;
  r.red_status = grade(r.red_ratio, thresholds.detuning_pass, thresholds.detuning_warn);
  r.blue_status = grade(r.blue_ratio, thresholds.detuning_pass, thresholds.detuning_warn);
  r.lamb_dicke_status = trap.lamb_dicke > 0.0
                            ? grade(trap.lamb_dicke, thresholds.lamb_dicke_pass,
                                    thresholds.lamb_dicke_warn)
                            : CheckStatus::Fail;
  r.sign_convention = trap.sign_convention_holds();

  if (r.red_status != CheckStatus::Pass) r.messages.push_back("|d_r|/nu outside the sideband-detuning band");
  if (r.blue_status != CheckStatus::Pass) r.messages.push_back("|d_b|/nu outside the sideband-detuning band");
  if (r.lamb_dicke_status != CheckStatus::Pass) r.messages.push_back("Lamb-Dicke parameter not small");
  if (!r.sign_convention) {
    r.messages.push_back("detuning sign convention violated: need (d_r + d_b) < 0 and d_r > d_b");
  }

  try {
    r.model = map_trap_to_model(trap);
    if (ramp_duration >= 0.0) {
      r.tau_final = tau_from_lab_time(ramp_duration, *r.model->energy_scale, r.model->system_size);
    }
  } catch (const ParameterError& e) {
    r.messages.push_back(std::string("mapping undefined: ") + e.what());
  }
  return r;
}

double tau_from_lab_time(double seconds, double energy_scale, double system_size) {
  if (!(energy_scale > 0.0) || !(system_size > 0.0)) {
    throw ParameterError("time conversion needs positive energy scale and system size");
  }
  return energy_scale * seconds * std::sqrt(system_size);
}

double lab_time_from_tau(double tau, double energy_scale, double system_size) {
  if (!(energy_scale > 0.0) || !(system_size > 0.0)) {
    throw ParameterError("time conversion needs positive energy scale and system size");
  }
  return tau / (energy_scale * std::sqrt(system_size));
}

}  // namespace esqpt
