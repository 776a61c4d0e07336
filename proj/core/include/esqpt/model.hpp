#pragma once

// Model/trap parameters, Hilbert-space conventions and the mapping between
// laboratory sideband settings and the dimensionless extended Rabi model.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace esqpt {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
/// Reduced Planck constant in J·s.
inline constexpr double kHbar = 1.054571817e-34;

/// Dimensionless control parameters of the extended Rabi model.
///
/// `energy_scale` holds ε/ħ in rad/s; it is only needed when converting to
/// laboratory time.
struct ModelParams {
  double system_size = 1.0;  // Δ
  double coupling = 0.0;     // λ
  double regime = 0.0;       // δ
  std::optional<double> energy_scale;

  /// Throws ParameterError when Δ ≤ 0, λ < 0 or δ ∉ [−1, 1].
  void validate() const;
  double energy_scale_joule() const;
};

/// Laboratory quantities; all frequencies are angular (rad/s).
struct TrapParams {
  double secular_freq = 0.0;   // ν
  double red_detuning = 0.0;   // δ_r
  double blue_detuning = 0.0;  // δ_b
  double lamb_dicke = 0.0;     // η
  double rabi_red = 0.0;       // Ω₁ (peak)
  double rabi_blue = 0.0;      // Ω₂ (peak)
  double qubit_freq = 0.0;     // ω₀, informational

  /// Sign convention (δ_r + δ_b) < 0 and δ_r > δ_b.
  bool sign_convention_holds() const;
};

/// Truncated qubit ⊗ Fock space. Basis index i = 2n + s with s = 0 for
/// qubit-down and s = 1 for qubit-up.
class HilbertSpace {
 public:
  HilbertSpace() = default;
  explicit HilbertSpace(int fock_cutoff);

  int fock_cutoff() const { return fock_cutoff_; }
  std::size_t dimension() const { return 2 * static_cast<std::size_t>(fock_cutoff_ + 1); }

  static constexpr std::size_t index(int n, int s) {
    return 2 * static_cast<std::size_t>(n) + static_cast<std::size_t>(s);
  }
  static constexpr int fock_of(std::size_t i) { return static_cast<int>(i / 2); }
  static constexpr int qubit_of(std::size_t i) { return static_cast<int>(i % 2); }

  friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;

 private:
  int fock_cutoff_ = 1;
};

/// Default Fock cutoff ceil(Δ·max(4x_c², 8) + 40) with x_c taken at the
/// largest coupling the run reaches.
int default_fock_cutoff(double system_size, double max_coupling);

ModelParams map_trap_to_model(const TrapParams& trap);

/// Inverse of map_trap_to_model for fixed ν, η. Requires energy_scale.
TrapParams map_model_to_trap(const ModelParams& params, double secular_freq,
                             double lamb_dicke, double qubit_freq = 0.0);

enum class CheckStatus { Pass, Warn, Fail };
std::string to_string(CheckStatus status);

struct FeasibilityThresholds {
  double detuning_pass = 0.025;
  double detuning_warn = 0.05;
  double lamb_dicke_pass = 0.1;
  double lamb_dicke_warn = 0.3;
};

struct FeasibilityReport {
  double red_ratio = 0.0;   // |δ_r|/ν
  double blue_ratio = 0.0;  // |δ_b|/ν
  CheckStatus red_status = CheckStatus::Fail;
  CheckStatus blue_status = CheckStatus::Fail;
  bool sign_convention = false;
  CheckStatus lamb_dicke_status = CheckStatus::Fail;
  std::optional<ModelParams> model;  // present when the mapping is defined
  std::optional<double> tau_final;   // τ_f for the supplied t_f
  std::vector<std::string> messages;

  CheckStatus overall() const;
};

/// Report-only feasibility assessment. `ramp_duration` is t_f in seconds.
FeasibilityReport check_feasibility(const TrapParams& trap, double ramp_duration,
                                    const FeasibilityThresholds& thresholds = {});

/// τ = (ε/ħ)·t·√Δ, with `energy_scale` = ε/ħ in rad/s.
double tau_from_lab_time(double seconds, double energy_scale, double system_size);
double lab_time_from_tau(double tau, double energy_scale, double system_size);

}  // namespace esqpt
