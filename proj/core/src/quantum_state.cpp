#include "esqpt/quantum_state.hpp"

#include <cmath>
#include <sstream>

#include "esqpt/errors.hpp"

namespace esqpt {

QuantumState::QuantumState(HilbertSpace s, Eigen::VectorXcd amps, double tol)
    : space(s), amplitudes(std::move(amps)), norm_tolerance(tol) {
  if (static_cast<std::size_t>(amplitudes.size()) != space.dimension()) {
    throw DimensionError("amplitude count does not match the Hilbert space");
  }
}

QuantumState QuantumState::basis(const HilbertSpace& space, int n, int s) {
  if (n < 0 || n > space.fock_cutoff() || (s != 0 && s != 1)) {
    throw ParameterError("basis label outside the truncated space");
  }
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
  v[static_cast<Eigen::Index>(HilbertSpace::index(n, s))] = 1.0;
  return QuantumState(space, std::move(v));
}

QuantumState QuantumState::vacuum(const HilbertSpace& space) { return basis(space, 0, 0); }

bool QuantumState::is_normalized() const {
  return std::abs(norm_squared() - 1.0) <= norm_tolerance;
}

void QuantumState::normalize() {
  const double nrm = amplitudes.norm();
  if (!(nrm > 0.0)) throw NumericError("cannot normalize a zero state");
  amplitudes /= nrm;
  normalized = true;
}

double QuantumState::tail_mass() const {
  const int first = static_cast<int>(std::floor(0.9 * space.fock_cutoff())) + 1;
  double tail = 0.0;
  for (int n = first; n <= space.fock_cutoff(); ++n) {
    tail += std::norm(amplitudes[HilbertSpace::index(n, 0)]) +
            std::norm(amplitudes[HilbertSpace::index(n, 1)]);
  }
  return tail;
}

Eigen::VectorXd QuantumState::fock_populations() const {
  Eigen::VectorXd p(space.fock_cutoff() + 1);
  for (int n = 0; n <= space.fock_cutoff(); ++n) {
    p[n] = std::norm(amplitudes[HilbertSpace::index(n, 0)]) +
           std::norm(amplitudes[HilbertSpace::index(n, 1)]);
  }
  return p;
}

void check_cutoff(const QuantumState& psi, double threshold) {
  const double tail = psi.tail_mass();
  if (tail > threshold) {
    std::ostringstream msg;
    msg << "tail mass " << tail << " above " << threshold << " at N_max = "
        << psi.space.fock_cutoff() << "; increase the Fock cutoff";
    throw CutoffError(msg.str());
  }
}

}  // namespace esqpt
