#include "esqpt/hamiltonian.hpp"

#include <cmath>

#include "esqpt/errors.hpp"

namespace esqpt {

namespace {

// Adds c·√(n+1) between |↑,n⟩ and |↓,n+1⟩ (Ĵ₊â + h.c.) and
// a·√(n+1) between |↓,n⟩ and |↑,n+1⟩ (Ĵ₊â† + h.c.).
SymmetricBand ladder_coupling(double jc_weight, double ajc_weight, const HilbertSpace& space) {
  SymmetricBand v(space.dimension(), 3);
  const int nmax = space.fock_cutoff();
  for (int n = 0; n < nmax; ++n) {
    const double root = std::sqrt(static_cast<double>(n + 1));
    v.upper(HilbertSpace::index(n, 1), 1) = jc_weight * root;   // (↑,n)-(↓,n+1)
    v.upper(HilbertSpace::index(n, 0), 3) = ajc_weight * root;  // (↓,n)-(↑,n+1)
  }
  return v;
}

}  // namespace

SymmetricBand ErmTerms::at(double coupling_strength) const {
  SymmetricBand h = free;
  SymmetricBand c = coupling;
  c *= coupling_strength;
  h += c;
  return h;
}

ErmTerms erm_terms(double system_size, double regime, const HilbertSpace& space) {
  ModelParams check{system_size, 0.0, regime, std::nullopt};
  check.validate();
  if (space.fock_cutoff() < 1) throw ParameterError("Fock cutoff must be at least 1");

  ErmTerms t;
  Eigen::VectorXd diag(static_cast<Eigen::Index>(space.dimension()));
  for (int n = 0; n <= space.fock_cutoff(); ++n) {
    diag[HilbertSpace::index(n, 0)] = -0.5 + n / system_size;
    diag[HilbertSpace::index(n, 1)] = 0.5 + n / system_size;
  }
  t.free = SymmetricBand::diagonal(diag);
  const double scale = 1.0 / std::sqrt(system_size);
  t.coupling = ladder_coupling(scale * (1.0 + regime) / 2.0, scale * (1.0 - regime) / 2.0, space);
  return t;
}

SymmetricBand build_hamiltonian(const ModelParams& params, const HilbertSpace& space) {
  params.validate();
  return erm_terms(params.system_size, params.regime, space).at(params.coupling);
}

SymmetricBand build_parity(const HilbertSpace& space) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(space.dimension()));
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    d[static_cast<Eigen::Index>(i)] = parity_of(HilbertSpace::fock_of(i), HilbertSpace::qubit_of(i));
  }
  return SymmetricBand::diagonal(d);
}

SymmetricBand number_operator(const HilbertSpace& space) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(space.dimension()));
  for (std::size_t i = 0; i < space.dimension(); ++i) d[static_cast<Eigen::Index>(i)] = HilbertSpace::fock_of(i);
  return SymmetricBand::diagonal(d);
}

SymmetricBand jz_operator(const HilbertSpace& space) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(space.dimension()));
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    d[static_cast<Eigen::Index>(i)] = HilbertSpace::qubit_of(i) == 0 ? -0.5 : 0.5;
  }
  return SymmetricBand::diagonal(d);
}

SymmetricBand vacuum_down_projector(const HilbertSpace& space) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.dimension()));
  d[0] = 1.0;
  return SymmetricBand::diagonal(d);
}

SymmetricBand qubit_down_projector(const HilbertSpace& space) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(space.dimension()));
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    d[static_cast<Eigen::Index>(i)] = HilbertSpace::qubit_of(i) == 0 ? 1.0 : 0.0;
  }
  return SymmetricBand::diagonal(d);
}

SymmetricBand blue_sideband_operator(double eta_omega, const HilbertSpace& space) {
  return ladder_coupling(0.0, eta_omega / 2.0, space);
}

}  // namespace esqpt
