#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "esqpt/quantum_state.hpp"
#include "esqpt/spectrum.hpp"

namespace esqpt {

/// ρ_m = Tr_q |ψ⟩⟨ψ|, an (N_max+1)² Hermitian matrix.
Eigen::MatrixXcd reduced_motional(const QuantumState& psi);
/// 2×2 qubit reduced density matrix (index s = 0 down, 1 up).
Eigen::Matrix2cd reduced_qubit(const QuantumState& psi);

struct Entropy {
  double value = 0.0;       // S_E in nats
  double normalized = 0.0;  // S_E / ln 2
};

Entropy entanglement_entropy(const QuantumState& psi);
Entropy entanglement_entropy(const Eigen::Ref<const Eigen::VectorXd>& amplitudes);

struct PeresPoint {
  double energy;
  double n_mean;
  double jz_mean;
  int parity;
  double entropy;  // normalized S_E/ln 2
  bool emergent = false;
};

using PeresLattice = std::vector<PeresPoint>;

PeresLattice peres_lattice(const Spectrum& spec);
void write_peres_csv(std::ostream& os, const PeresLattice& lattice);

struct WignerGrid {
  std::vector<double> x;
  std::vector<double> p;
  Eigen::MatrixXd values;  // values(ix, ip)
  double system_size = 1.0;

  /// Σ W dx dp with trapezoid weights.
  double integral() const;
};

/// Default symmetric grid ±1.5·max(x_c, p_c, 3/√Δ) with `points` nodes.
std::vector<double> default_wigner_axis(double coupling, double regime, double system_size,
                                        int points = 201);

struct WignerOptions {
  double coverage_tol = 1e-3;  // allowed marginal mass outside the grid
  double hermiticity_tol = 1e-10;
  unsigned workers = 1;
};

/// Wigner function of ρ_m with ħ_eff = 1/Δ, evaluated pairwise from the
/// Laguerre closed form. Throws CoverageError when either marginal leaves
/// more than `coverage_tol` outside the grid.
WignerGrid wigner(const Eigen::MatrixXcd& rho_m, double system_size, const std::vector<double>& x,
                  const std::vector<double>& p, const WignerOptions& opts = {});

/// Position- and momentum-space densities of ρ_m on the given axes.
std::vector<double> position_density(const Eigen::MatrixXcd& rho_m, double system_size,
                                     const std::vector<double>& x);
std::vector<double> momentum_density(const Eigen::MatrixXcd& rho_m, double system_size,
                                     const std::vector<double>& p);

void write_wigner_csv(std::ostream& os, const WignerGrid& w);

struct StrengthEntry {
  double energy;
  double weight;
};

struct StrengthFunction {
  std::vector<StrengthEntry> entries;
  double total = 0.0;

  double mean_energy() const;
};

/// w_i = |⟨ψ_i|ψ⟩|². With `require_complete`, |Σw − 1| > tol raises NumericError.
StrengthFunction strength_function(const QuantumState& psi, const Spectrum& spec,
                                   bool require_complete = true, double tol = 1e-8);
void write_strength_csv(std::ostream& os, const StrengthFunction& sf);

struct EmergentClassification {
  std::vector<std::size_t> indices;
  double window_lower = 0.0;
  double window_upper = 0.0;
  double n_threshold = 0.0;  // Δ·p_c²/2
  double predicted = 0.0;    // v⁻Δ/2π
  double relative_error = 0.0;
};

/// Energy window (e_sad, e_vac + 1/Δ) used for the emergent classification.
std::pair<double, double> emergent_window(double coupling, double regime, double system_size);

/// States in the emergent window with ⟨n̂⟩/Δ < p_c²/2. Needs eigenvectors.
EmergentClassification classify_emergent(const Spectrum& spec, double coupling, double regime,
                                         double system_size);

/// Diagonalizes only the emergent window (sector route) and classifies.
EmergentClassification count_emergent(double coupling, double regime, double system_size,
                                      int fock_cutoff);

}  // namespace esqpt
