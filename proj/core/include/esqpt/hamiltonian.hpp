#pragma once

#include "esqpt/band_operator.hpp"
#include "esqpt/model.hpp"

namespace esqpt {

/// ĥ(λ) = free + λ·coupling, split so time-dependent ramps only rescale the
/// coupling term.
struct ErmTerms {
  SymmetricBand free;      // Ĵ_z + n̂/Δ
  SymmetricBand coupling;  // Δ^{-1/2}[(1+δ)/2 (Ĵ₊â + Ĵ₋â†) + (1−δ)/2 (Ĵ₊â† + Ĵ₋â)]

  SymmetricBand at(double coupling_strength) const;
};

ErmTerms erm_terms(double system_size, double regime, const HilbertSpace& space);

/// Matrix of the ERM Hamiltonian in the i = 2n + s basis. Nonzero offsets are
/// 0, 1 and 3 (bandwidth 3).
SymmetricBand build_hamiltonian(const ModelParams& params, const HilbertSpace& space);

/// P̂ = (−1)^{n̂ + Ĵ_z + 1/2}, i.e. (−1)^{n+s}.
SymmetricBand build_parity(const HilbertSpace& space);

SymmetricBand number_operator(const HilbertSpace& space);
SymmetricBand jz_operator(const HilbertSpace& space);
/// |↓,0⟩⟨↓,0|, the survival projector of the non-interacting ground state.
SymmetricBand vacuum_down_projector(const HilbertSpace& space);
/// P̂_↓ = 1/2 − Ĵ_z.
SymmetricBand qubit_down_projector(const HilbertSpace& space);

/// Resonant blue-sideband coupling (ηΩ₂/2)(σ₊â† + σ₋â) in rad/s.
SymmetricBand blue_sideband_operator(double eta_omega, const HilbertSpace& space);

inline int parity_of(int n, int s) { return ((n + s) % 2 == 0) ? 1 : -1; }

}  // namespace esqpt
