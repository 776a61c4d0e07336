#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esqpt/hamiltonian.hpp"
#include "esqpt/quantum_state.hpp"

namespace esqpt {

/// Linear ramp λ(τ) = λ_f·τ/τ_f; τ_f = 0 is an instantaneous quench.
struct RampProtocol {
  double system_size = 1.0;
  double regime = 0.0;
  double final_coupling = 0.0;
  double duration = 0.0;

  void validate() const;
  double coupling_at(double tau) const;
};

struct PropagationOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int samples = 401;             // uniform τ samples including both ends
  double min_step = 1e-10;       // step-size floor before StiffnessError
  double tail_tol = 1e-6;        // cutoff-health threshold on the final state
  bool check_tail = true;
  double tolerance_scale = 1.0;  // multiplies rel_tol/abs_tol
};

struct PropagationStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  double norm_drift = 0.0;  // max |‖ψ‖ − 1| over samples
  double min_step = 0.0;
};

/// Called at every sample time with the current state.
using SampleObserver = std::function<void(double tau, const Eigen::VectorXcd& psi)>;

/// Integrates i dψ/dτ = ĥ(λ(τ))ψ with an adaptive embedded Runge-Kutta-Fehlberg
/// 7(8) pair. The norm is never renormalized; its drift is reported.
QuantumState propagate(const QuantumState& psi0, const RampProtocol& protocol,
                       const PropagationOptions& opts, const SampleObserver& observer,
                       PropagationStats* stats = nullptr);

struct StateTrajectory {
  RampProtocol protocol;
  HilbertSpace space;
  std::vector<double> tau;
  std::vector<Eigen::VectorXcd> states;
  PropagationStats stats;

  QuantumState final_state() const { return QuantumState(space, states.back()); }
};

StateTrajectory propagate_schrodinger(const QuantumState& psi0, const RampProtocol& protocol,
                                      const PropagationOptions& opts = {});

struct WitnessSample {
  double tau;
  double lambda;
  double h_mean;
  double n_mean;
  double jz_mean;
  double p0;  // |⟨↓,0|ψ⟩|²
};

using WitnessSeries = std::vector<WitnessSample>;

WitnessSample witness_at(double tau, const Eigen::VectorXcd& psi, const RampProtocol& protocol,
                         const ErmTerms& terms, const HilbertSpace& space);
WitnessSeries witness_series(const StateTrajectory& trajectory);
void write_witness_csv(std::ostream& os, const WitnessSeries& series);

struct DownProjection {
  Eigen::VectorXcd motional;  // normalized, length N_max + 1
  double pdown = 0.0;         // ⟨P̂_↓⟩
};

DownProjection down_project(const QuantumState& psi);

/// End-of-ramp observables used by scans and the Table-style summaries.
struct RampSummary {
  double p0 = 0.0;        // |⟨↓,0|ψ⟩|²
  double p0_tilde = 0.0;  // p0/⟨P̂_↓⟩
  double pdown = 0.0;
  double n_mean = 0.0;
  double jz_mean = 0.0;
  double h_mean = 0.0;
  double norm_drift = 0.0;
};

RampSummary summarize(const QuantumState& psi, const RampProtocol& protocol);

enum class ScanAxis { Duration, Regime, SystemSize };
std::string to_string(ScanAxis axis);
ScanAxis scan_axis_from_string(const std::string& name);

struct ScanPoint {
  double axis_value;
  RampSummary summary;
  int fock_cutoff;
};

/// One Schrödinger ramp per grid value with the remaining protocol fields
/// taken from `base`. `fock_cutoff` ≤ 0 picks default_fock_cutoff per point.
std::vector<ScanPoint> ramp_scan(ScanAxis axis, const std::vector<double>& grid,
                                 const RampProtocol& base, int fock_cutoff = 0,
                                 const PropagationOptions& opts = {}, unsigned workers = 1);

/// Columns axis_value,p0_tilde,p0,pdown,n_mean,jz_mean.
void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& points);

}  // namespace esqpt
