#include "esqpt/observables.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "esqpt/errors.hpp"
#include "esqpt/parallel.hpp"
#include "esqpt/semiclassics.hpp"

namespace esqpt {

namespace {

double entropy_from_qubit(const Eigen::Matrix2cd& rq) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(rq, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double v = es.eigenvalues()[k];
    if (v > 1e-300) s -= v * std::log(v);
  }
  return std::max(0.0, s);
}

// Normalized oscillator eigenfunctions φ_n(ξ), n = 0..nmax, with ħ = 1.
// A running log scale keeps the three-term recurrence away from underflow
// far out in ξ where e^{−ξ²/2} alone is zero.
void hermite_functions(double xi, int nmax, double* out) {
  constexpr double kBig = 1e150;
  const double log_big = std::log(kBig);
  double log_scale = -0.5 * xi * xi - 0.25 * std::log(kPi);
  double prev = 0.0;
  double cur = 1.0;
  out[0] = std::exp(log_scale);
  for (int n = 0; n < nmax; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * xi * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      prev /= kBig;
      log_scale += log_big;
    }
    out[n + 1] = cur * std::exp(log_scale);
  }
}

int effective_cutoff(const Eigen::MatrixXcd& rho) {
  int top = 0;
  for (Eigen::Index n = 0; n < rho.rows(); ++n) {
    if (std::abs(rho(n, n)) > 1e-18) top = static_cast<int>(n);
  }
  return top;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return acc;
}

std::vector<double> trapezoid_weights(const std::vector<double>& x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = 0.5 * (x[i] - x[i - 1]);
    w[i - 1] += h;
    w[i] += h;
  }
  return w;
}

}  // namespace

Eigen::MatrixXcd reduced_motional(const QuantumState& psi) {
  const int nmax = psi.space.fock_cutoff();
  Eigen::Map<const Eigen::Matrix<cplx, 2, Eigen::Dynamic>> amp(psi.amplitudes.data(), 2, nmax + 1);
  return amp.transpose() * amp.conjugate();
}

Eigen::Matrix2cd reduced_qubit(const QuantumState& psi) {
  const int nmax = psi.space.fock_cutoff();
  Eigen::Map<const Eigen::Matrix<cplx, 2, Eigen::Dynamic>> amp(psi.amplitudes.data(), 2, nmax + 1);
  return amp * amp.adjoint();
}

Entropy entanglement_entropy(const QuantumState& psi) {
  const double s = entropy_from_qubit(reduced_qubit(psi));
  return {s, s / std::log(2.0)};
}

Entropy entanglement_entropy(const Eigen::Ref<const Eigen::VectorXd>& amplitudes) {
  const Eigen::Index cols = amplitudes.size() / 2;
  Eigen::Map<const Eigen::Matrix<double, 2, Eigen::Dynamic>> amp(amplitudes.data(), 2, cols);
  const Eigen::Matrix2d rq = amp * amp.transpose();
  const double s = entropy_from_qubit(rq.cast<cplx>());
  return {s, s / std::log(2.0)};
}

PeresLattice peres_lattice(const Spectrum& spec) {
  if (!spec.has_vectors()) throw DomainError("Peres lattice needs eigenvectors");
  PeresLattice out;
  out.reserve(spec.size());
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const Eigen::VectorXd v = spec.eigenvectors.col(j);
    double n_mean = 0.0;
    double jz = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double w = v[i] * v[i];
      n_mean += w * HilbertSpace::fock_of(i);
      jz += w * (HilbertSpace::qubit_of(i) == 0 ? -0.5 : 0.5);
    }
    out.push_back({spec.eigenvalues[j], n_mean, jz, spec.parities[j],
                   entanglement_entropy(v).normalized, false});
  }
  return out;
}

void write_peres_csv(std::ostream& os, const PeresLattice& lattice) {
  os << "energy,n_mean,jz_mean,parity,entropy,emergent_flag\n" << std::setprecision(12);
  for (const auto& p : lattice) {
    os << p.energy << ',' << p.n_mean << ',' << p.jz_mean << ',' << p.parity << ',' << p.entropy
       << ',' << (p.emergent ? 1 : 0) << '\n';
  }
}

double WignerGrid::integral() const {
  const auto wx = trapezoid_weights(x);
  const auto wp = trapezoid_weights(p);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) acc += wx[i] * wp[j] * values(i, j);
  return acc;
}

std::vector<double> default_wigner_axis(double coupling, double regime, double system_size,
                                        int points) {
  if (points < 2) throw DomainError("Wigner axis needs at least two points");
  const CriticalSet cs = critical_set(coupling, regime);
  const double extent =
      1.5 * std::max({cs.x_c, cs.p_c.value_or(0.0), 3.0 / std::sqrt(system_size)});
  std::vector<double> axis(points);
  for (int i = 0; i < points; ++i) axis[i] = -extent + 2.0 * extent * i / (points - 1);
  return axis;
}

std::vector<double> position_density(const Eigen::MatrixXcd& rho_m, double system_size,
                                     const std::vector<double>& x) {
  const int nmax = effective_cutoff(rho_m);
  const double sd = std::sqrt(system_size);
  std::vector<double> out(x.size());
  Eigen::VectorXd phi(nmax + 1);
  const Eigen::MatrixXcd rho = rho_m.topLeftCorner(nmax + 1, nmax + 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    hermite_functions(sd * x[i], nmax, phi.data());
    const Eigen::VectorXcd pc = phi.cast<cplx>();
    out[i] = sd * std::real(pc.cwiseProduct(rho * pc).sum());
  }
  return out;
}

std::vector<double> momentum_density(const Eigen::MatrixXcd& rho_m, double system_size,
                                     const std::vector<double>& p) {
  const int nmax = effective_cutoff(rho_m);
  const double sd = std::sqrt(system_size);
  std::vector<double> out(p.size());
  Eigen::VectorXd phi(nmax + 1);
  Eigen::VectorXcd c(nmax + 1);
  const Eigen::MatrixXcd rho = rho_m.topLeftCorner(nmax + 1, nmax + 1);
  const cplx minus_i(0.0, -1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    hermite_functions(sd * p[i], nmax, phi.data());
    cplx phase(1.0, 0.0);
    for (int n = 0; n <= nmax; ++n) {
      c[n] = phase * phi[n];
      phase *= minus_i;
    }
    // ⟨p|ρ|p⟩ = Σ c_m ρ_mn c̄_n
    out[i] = sd * std::real(c.cwiseProduct(rho * c.conjugate()).sum());
  }
  return out;
}

WignerGrid wigner(const Eigen::MatrixXcd& rho_m, double system_size, const std::vector<double>& x,
                  const std::vector<double>& p, const WignerOptions& opts) {
  if (rho_m.rows() != rho_m.cols()) throw DimensionError("density matrix must be square");
  if (!(system_size > 0.0)) throw ParameterError("system size must be positive");
  if (x.size() < 2 || p.size() < 2) throw DomainError("Wigner grid needs at least 2×2 points");
  if ((rho_m - rho_m.adjoint()).cwiseAbs().maxCoeff() > opts.hermiticity_tol) {
    throw NumericError("density matrix is not Hermitian; Wigner function would be complex");
  }

  const double trace = rho_m.trace().real();
  const double outside_x = trace - trapezoid(x, position_density(rho_m, system_size, x));
  const double outside_p = trace - trapezoid(p, momentum_density(rho_m, system_size, p));
  if (std::max(outside_x, outside_p) > opts.coverage_tol) {
    std::ostringstream msg;
    msg << "Wigner grid misses marginal mass " << std::max(outside_x, outside_p)
        << " (limit " << opts.coverage_tol << ")";
    throw CoverageError(msg.str());
  }

  const int nmax = effective_cutoff(rho_m);
  // a_k[m] = (−1)^m ρ_{m, m+k}
  std::vector<std::vector<cplx>> diag(nmax + 1);
  for (int k = 0; k <= nmax; ++k) {
    diag[k].resize(nmax + 1 - k);
    for (int m = 0; m + k <= nmax; ++m) diag[k][m] = (m % 2 == 0 ? 1.0 : -1.0) * rho_m(m, m + k);
  }
  std::vector<double> lg(nmax + 2);
  for (int k = 0; k <= nmax + 1; ++k) lg[k] = std::lgamma(k + 1.0);

  WignerGrid out;
  out.x = x;
  out.p = p;
  out.system_size = system_size;
  out.values.resize(x.size(), p.size());
  const double sd = std::sqrt(system_size);
  const double pref = system_size / kPi;

  parallel_for(x.size(), opts.workers, [&](std::size_t ix) {
    for (std::size_t ip = 0; ip < p.size(); ++ip) {
      const double xs = sd * x[ix];
      const double ps = sd * p[ip];
      const double z = 2.0 * (xs * xs + ps * ps);
      const cplx step = (z > 0.0) ? cplx(xs, ps) / std::sqrt(xs * xs + ps * ps) : cplx(1.0, 0.0);
      const double lz = z > 0.0 ? std::log(z) : 0.0;
      cplx rot(1.0, 0.0);
      double total = 0.0;
      for (int k = 0; k <= nmax; ++k) {
        double g_prev = 0.0;
        double g = (z > 0.0) ? std::exp(0.5 * k * lz - 0.5 * z - 0.5 * lg[k]) : (k == 0 ? 1.0 : 0.0);
        cplx acc(0.0, 0.0);
        const auto& a = diag[k];
        for (int m = 0; m + k <= nmax; ++m) {
          acc += a[m] * g;
          const double next = ((2.0 * m + 1.0 + k - z) * g - std::sqrt(static_cast<double>(m) * (m + k)) * g_prev) /
                              std::sqrt((m + 1.0) * (m + 1.0 + k));
          g_prev = g;
          g = next;
        }
        total += (k == 0) ? acc.real() : 2.0 * std::real(acc * rot);
        rot *= step;
      }
      out.values(ix, ip) = pref * total;
    }
  });
  return out;
}

void write_wigner_csv(std::ostream& os, const WignerGrid& w) {
  os << "x,p,w\n" << std::setprecision(10);
  for (std::size_t i = 0; i < w.x.size(); ++i)
    for (std::size_t j = 0; j < w.p.size(); ++j) os << w.x[i] << ',' << w.p[j] << ',' << w.values(i, j) << '\n';
}

double StrengthFunction::mean_energy() const {
  double acc = 0.0;
  for (const auto& e : entries) acc += e.energy * e.weight;
  return acc / total;
}

StrengthFunction strength_function(const QuantumState& psi, const Spectrum& spec,
                                   bool require_complete, double tol) {
  if (!(psi.space == spec.space)) throw DimensionError("state and spectrum live on different spaces");
  if (!spec.has_vectors()) throw DomainError("strength function needs eigenvectors");
  const Eigen::VectorXcd overlaps = spec.eigenvectors.transpose().cast<cplx>() * psi.amplitudes;
  StrengthFunction sf;
  sf.entries.reserve(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double w = std::norm(overlaps[i]);
    sf.entries.push_back({spec.eigenvalues[i], w});
    sf.total += w;
  }
  if (require_complete && std::abs(sf.total - psi.norm_squared()) > tol) {
    std::ostringstream msg;
    msg << "strength-function weights sum to " << sf.total << ", expected " << psi.norm_squared();
    throw NumericError(msg.str());
  }
  return sf;
}

void write_strength_csv(std::ostream& os, const StrengthFunction& sf) {
  os << "energy,weight\n" << std::setprecision(15);
  for (const auto& e : sf.entries) os << e.energy << ',' << e.weight << '\n';
}

std::pair<double, double> emergent_window(double coupling, double regime, double system_size) {
  const CriticalSet cs = critical_set(coupling, regime);
  if (!cs.e_sad) throw PhaseError("emergent states exist only for λ|δ| > 1");
  // One oscillator quantum of padding above e_vac: at finite Δ the stabilized
  // vacuum sits slightly above −1/2.
  return {*cs.e_sad, cs.e_vac + 1.0 / system_size};
}

EmergentClassification classify_emergent(const Spectrum& spec, double coupling, double regime,
                                         double system_size) {
  const auto [lo, hi] = emergent_window(coupling, regime, system_size);
  if (!spec.has_vectors()) throw DomainError("emergent classification needs eigenvectors");
  const CriticalSet cs = critical_set(coupling, regime);
  EmergentClassification out;
  out.window_lower = lo;
  out.window_upper = hi;
  out.n_threshold = system_size * 0.5 * (*cs.p_c) * (*cs.p_c);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double e = spec.eigenvalues[j];
    if (!(e > lo && e < hi)) continue;
    double n_mean = 0.0;
    for (Eigen::Index i = 0; i < spec.eigenvectors.rows(); ++i) {
      n_mean += spec.eigenvectors(i, j) * spec.eigenvectors(i, j) * HilbertSpace::fock_of(i);
    }
    if (n_mean < out.n_threshold) out.indices.push_back(j);
  }
  out.predicted = predict_emergent_counts(coupling, regime, system_size).emergent;
  out.relative_error = std::abs(static_cast<double>(out.indices.size()) - out.predicted) / out.predicted;
  return out;
}

EmergentClassification count_emergent(double coupling, double regime, double system_size,
                                      int fock_cutoff) {
  const auto [lo, hi] = emergent_window(coupling, regime, system_size);
  const ModelParams params{system_size, coupling, regime, std::nullopt};
  const Spectrum spec = diagonalize_erm(params, HilbertSpace(fock_cutoff), Selection::window(lo, hi));
  return classify_emergent(spec, coupling, regime, system_size);
}

}  // namespace esqpt
