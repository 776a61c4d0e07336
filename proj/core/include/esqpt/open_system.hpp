#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "esqpt/band_operator.hpp"
#include "esqpt/dynamics.hpp"
#include "esqpt/quantum_state.hpp"

namespace esqpt {

/// Environmental rates in SI units (1/s).
struct DissipatorSpec {
  double motional_dephasing = 0.0;  // Γ_m
  double qubit_dephasing = 0.0;     // Γ_q
  std::optional<double> bath_coupling;       // γ
  std::optional<double> thermal_occupation;  // n_th
  std::optional<double> heating_rate;        // γ·n_th, overrides γ and n_th
  std::optional<double> damping_rate;        // γ·(n_th + 1), overrides γ and n_th

  void validate() const;
  /// γ·n_th from heating_rate or γ, n_th; 0 when unspecified.
  double resolved_heating() const;
  /// γ·(n_th + 1); falls back to the heating rate (n_th ≫ 1) when only the
  /// product is known.
  double resolved_damping() const;
  bool empty() const;
};

/// A jump operator l = coefficient·O with O one of n̂-like diagonals, â or â†.
struct JumpOperator {
  enum class Kind { Diagonal, Lower, Raise };
  std::string name;
  Kind kind = Kind::Diagonal;
  double coefficient = 0.0;
  Eigen::VectorXd diagonal;  // Kind::Diagonal only

  /// out = l·in on the truncated space (â† drops the top Fock level).
  void apply(const cplx* in, cplx* out, const HilbertSpace& space) const;
  /// Diagonal of l†l.
  Eigen::VectorXd rate_diagonal(const HilbertSpace& space) const;
  Eigen::MatrixXd dense(const HilbertSpace& space) const;
};

struct NoiseModel {
  HilbertSpace space;
  std::vector<JumpOperator> jumps;
  Eigen::VectorXd decay;   // Σ_j diag(l_j†l_j)
  double time_unit = 1.0;  // seconds per unit of the evolution variable

  bool empty() const { return jumps.empty(); }
};

/// Dimensionless jump operators l_j = (ε√Δ/ħ)^{−1/2} L_j for the ERM frame.
/// `energy_scale` is ε/ħ in rad/s.
NoiseModel build_dissipators(const DissipatorSpec& spec, double energy_scale, double system_size,
                             const HilbertSpace& space);
/// Unscaled jump operators for evolution in laboratory seconds.
NoiseModel build_dissipators_lab(const DissipatorSpec& spec, const HilbertSpace& space);

/// ĥ(t) = fixed + scale(t)·scaled.
struct TimeDependentHamiltonian {
  SymmetricBand fixed;
  SymmetricBand scaled;
  std::function<double(double)> scale;

  static TimeDependentHamiltonian ramp(const RampProtocol& protocol, const HilbertSpace& space);
  static TimeDependentHamiltonian constant(SymmetricBand h);
};

struct McwfOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double tolerance_scale = 1.0;
  double min_step = 1e-10;
  std::vector<double> sample_times;  // empty: only the final time
  std::vector<std::pair<std::string, SymmetricBand>> observables;
  bool keep_final_states = false;
  unsigned workers = 1;
  int max_resamples = 3;
  double root_tol = 1e-12;  // absolute tolerance on the jump time
};

struct TrajectoryRecord {
  std::uint64_t index = 0;
  double weight = 1.0;
  std::vector<double> jump_times;
  std::vector<int> jump_channels;
  Eigen::MatrixXd samples;          // (sample, observable), normalized expectations
  Eigen::VectorXcd final_state;     // unnormalized, when kept
  double final_norm_squared = 1.0;
  double tail_mass = 0.0;           // of the normalized final state
  int resamples = 0;
};

struct TrajectoryEnsemble {
  std::uint64_t seed = 0;
  std::vector<double> sample_times;
  std::vector<std::string> observable_names;
  std::vector<std::string> channel_names;
  std::vector<TrajectoryRecord> trajectories;
  std::vector<std::string> incidents;
  std::size_t prefix_steps = 0;

  std::size_t size() const { return trajectories.size(); }
  std::size_t observable_index(const std::string& name) const;
  double mean_jumps() const;
  std::vector<std::size_t> jumps_per_channel() const;
  /// Tail mass of the ensemble density matrix.
  double mean_tail_mass() const;
  double max_tail_mass() const;
};

/// One trajectory's uniform stream, derived from (master seed, index, attempt).
class TrajectoryRng {
 public:
  TrajectoryRng(std::uint64_t master, std::uint64_t index, int attempt = 0);
  /// Uniform on the open interval (0, 1).
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// MCWF unraveling from a common pure initial state. Trajectories share the
/// deterministic no-jump prefix up to their first jump.
TrajectoryEnsemble mcwf_evolve(const QuantumState& psi0, const TimeDependentHamiltonian& h,
                               const NoiseModel& noise, double t_final, std::size_t n,
                               std::uint64_t seed, const McwfOptions& opts = {});

TrajectoryEnsemble mcwf_evolve(const QuantumState& psi0, const RampProtocol& protocol,
                               const NoiseModel& noise, std::size_t n, std::uint64_t seed,
                               const McwfOptions& opts = {});

/// One trajectory per weighted initial state (weights need not sum to 1).
TrajectoryEnsemble mcwf_evolve_mixture(const std::vector<QuantumState>& initial,
                                       const std::vector<double>& weights,
                                       const TimeDependentHamiltonian& h, const NoiseModel& noise,
                                       double t_final, std::uint64_t seed,
                                       const McwfOptions& opts = {});

struct McwfResult {
  double mean = 0.0;
  double spread = 0.0;        // weighted std of per-trajectory expectations
  double mre = 0.0;           // spread/(√N·|mean|)
  double operator_mre = 0.0;  // √(⟨A²⟩ − ⟨A⟩²)/(√N·|mean|), when ⟨A²⟩ is registered
  std::size_t n = 0;
  double effective_n = 0.0;  // (Σw)²/Σw², equals n for unit weights

  /// √N·MRE, the prefactor quoted as η·√N.
  double mre_prefactor() const;
  double standard_error() const { return mre * std::abs(mean); }
};

/// Ensemble statistics for a registered observable at a sample index
/// (default: last). `square_name` names the registered Â² for operator_mre.
McwfResult mcwf_expectation(const TrajectoryEnsemble& ensemble, const std::string& name,
                            std::optional<std::size_t> sample = std::nullopt,
                            const std::string& square_name = "");

nlohmann::json to_json(const McwfResult& r);
nlohmann::json summary_json(const TrajectoryEnsemble& e);

struct LindbladOptions {
  std::size_t max_dimension = 34;  // 2·(16 + 1)
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  std::vector<double> sample_times;  // empty: only the final time
  double trace_tol = 1e-8;
};

struct LindbladResult {
  std::vector<double> times;
  std::vector<Eigen::MatrixXcd> rho;
  double max_trace_drift = 0.0;
  double min_eigenvalue = 0.0;  // smallest eigenvalue seen over samples
};

/// Direct density-matrix integration; small spaces only.
LindbladResult lindblad_dense_evolve(const Eigen::MatrixXcd& rho0, const TimeDependentHamiltonian& h,
                                     const NoiseModel& noise, double t_final,
                                     const LindbladOptions& opts = {});
LindbladResult lindblad_dense_evolve(const Eigen::MatrixXcd& rho0, const RampProtocol& protocol,
                                     const NoiseModel& noise, const LindbladOptions& opts = {});

/// Unitary blue-sideband signal ⟨Ĵ_z⟩(t) = −½ Σ p_n cos(ηΩ₂√(n+1)t).
std::vector<double> blue_sideband_signal(const Eigen::VectorXd& populations, double eta_omega,
                                         const std::vector<double>& times);

struct RabiSignal {
  std::vector<double> t;
  std::vector<double> jz_mean;
  std::vector<double> jz_mre;
};

/// Noisy diagnostic drive in laboratory seconds: qubit-down ⊗ motional input
/// states, one MCWF trajectory each, weighted by `weights`.
RabiSignal blue_sideband_mcwf(const std::vector<Eigen::VectorXcd>& motional,
                              const std::vector<double>& weights, double eta_omega,
                              const std::vector<double>& times, const DissipatorSpec& spec,
                              std::uint64_t seed, const McwfOptions& opts = {});

void write_rabi_csv(std::ostream& os, const RabiSignal& signal);

struct VacuumFit {
  Eigen::VectorXd populations;
  Eigen::VectorXd damping;  // per-component rates (1/s), zero for the plain model
  double p0 = 0.0;
  double p0_error = 0.0;
  double residual_rms = 0.0;
  double condition_number = 0.0;
  bool constrained = false;  // Σp = 1 enforced
};

struct FitOptions {
  bool damped = true;  // free exponential envelope per component
  double min_periods = 5.0;
  double max_condition = 1e8;
};

/// Smallest component count covering `coverage` of the populations.
int default_component_count(const Eigen::VectorXd& populations, double coverage = 0.999);

/// Least-squares fit of p_n onto the known frequencies ηΩ₂√(n+1).
VacuumFit extract_vacuum_population(const std::vector<double>& times,
                                    const std::vector<double>& signal, double eta_omega,
                                    int n_components, const FitOptions& opts = {});

}  // namespace esqpt
