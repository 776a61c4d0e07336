#pragma once

#include <Eigen/Dense>

#include "esqpt/band_operator.hpp"
#include "esqpt/model.hpp"

namespace esqpt {

/// Pure state on the truncated qubit ⊗ Fock space.
struct QuantumState {
  HilbertSpace space;
  Eigen::VectorXcd amplitudes;
  double norm_tolerance = 1e-8;
  bool normalized = true;  // false for MCWF intermediates

  QuantumState() = default;
  QuantumState(HilbertSpace s, Eigen::VectorXcd amps, double tol = 1e-8);

  /// |s, n⟩ with s = 0 (down) or 1 (up).
  static QuantumState basis(const HilbertSpace& space, int n, int s);
  /// |↓,0⟩, the λ = 0 ground state.
  static QuantumState vacuum(const HilbertSpace& space);

  double norm_squared() const { return amplitudes.squaredNorm(); }
  bool is_normalized() const;
  void normalize();

  /// Σ_{n > 0.9 N_max} |ψ_n|² summed over both qubit states.
  double tail_mass() const;
  /// p_n = Σ_s |ψ_{n,s}|².
  Eigen::VectorXd fock_populations() const;

  double expectation(const SymmetricBand& op) const { return op.expectation(amplitudes); }
};

/// Tail-mass threshold used for the cutoff-health check.
inline constexpr double kDefaultTailTolerance = 1e-6;

/// Throws CutoffError when the state's tail mass exceeds `threshold`.
void check_cutoff(const QuantumState& psi, double threshold = kDefaultTailTolerance);

}  // namespace esqpt
