#include "esqpt/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/parallel.hpp"

namespace esqpt {

namespace odeint = boost::numeric::odeint;

namespace {

using StateVec = std::vector<cplx>;

void check_rate(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be a finite rate ≥ 0");
}

double norm2(const StateVec& x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return s;
}

Eigen::VectorXcd to_eigen(const StateVec& x) {
  return Eigen::Map<const Eigen::VectorXcd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

StateVec to_state(const Eigen::VectorXcd& v) { return StateVec(v.data(), v.data() + v.size()); }

/// dx/dt = −i·𝔥(t)x with 𝔥 = ĥ(t) − (i/2)·K and K diagonal.
struct Generator {
  const TimeDependentHamiltonian* h;
  const Eigen::VectorXd* decay;
  std::size_t dim;

  void operator()(const StateVec& x, StateVec& dxdt, double t) const {
    const std::span<const cplx> in(x.data(), dim);
    const std::span<cplx> out(dxdt.data(), dim);
    h->fixed.apply(in, out);
    if (h->scale) {
      const double s = h->scale(t);
      if (s != 0.0) h->scaled.apply(in, out, s, 1.0);
    }
    const bool damped = decay->size() > 0;
    for (std::size_t i = 0; i < dim; ++i) {
      cplx v(dxdt[i].imag(), -dxdt[i].real());
      if (damped) v -= 0.5 * (*decay)[i] * x[i];
      dxdt[i] = v;
    }
  }
};

using Stepper =
    decltype(odeint::make_controlled(1.0, 1.0, odeint::runge_kutta_fehlberg78<StateVec>()));

/// Raised when the jump time cannot be bracketed; triggers a resample.
class RootFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

struct Knot {
  double t;
  double s;
  StateVec x;
};

struct Prefix {
  std::vector<Knot> knots;
  Eigen::MatrixXd samples;
  double tail_mass = 0.0;
};

double tail_of(const StateVec& x, const HilbertSpace& space) {
  Eigen::VectorXcd v = to_eigen(x);
  v.normalize();
  return QuantumState(space, v).tail_mass();
}

class Runner {
 public:
  Runner(const TimeDependentHamiltonian& h, const NoiseModel& noise, double t_final,
         const std::vector<double>& times, const McwfOptions& opts,
         const std::vector<Eigen::VectorXd>& channel_rates)
      : gen_{&h, &noise.decay, noise.space.dimension()},
        noise_(noise),
        t_final_(t_final),
        times_(times),
        opts_(opts),
        rates_(channel_rates),
        stepper_(odeint::make_controlled(opts.abs_tol * opts.tolerance_scale,
                                         opts.rel_tol * opts.tolerance_scale,
                                         odeint::runge_kutta_fehlberg78<StateVec>())),
        dt_(std::max(t_final * 1e-3, opts.min_step)) {}

  /// One accepted step from t toward `target`, never past it.
  void step(StateVec& x, double& t, double target) {
    for (;;) {
      const bool clipped = t + dt_ >= target;
      double trial = clipped ? target - t : dt_;
      if (stepper_.try_step(gen_, x, t, trial) == odeint::success) {
        if (clipped) t = target;
        if (!clipped || trial > dt_) dt_ = trial;
        return;
      }
      dt_ = trial;
      if (dt_ < opts_.min_step) {
        std::ostringstream msg;
        msg << "step size " << dt_ << " fell below " << opts_.min_step << " at t = " << t
            << " (dim = " << x.size() << ")";
        throw StiffnessError(msg.str());
      }
    }
  }

  /// Integrates x from t0 to exactly t1 with a private step-size history.
  void evolve_to(StateVec& x, double t0, double t1) {
    const double saved = dt_;
    dt_ = std::max(t1 - t0, opts_.min_step);
    double t = t0;
    while (t < t1) step(x, t, t1);
    dt_ = saved;
  }

  /// -dS/dt = ⟨x|K|x⟩ for the unnormalized no-jump state.
  double loss_rate(const StateVec& x) const {
    if (noise_.decay.size() == 0) return 0.0;
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r += noise_.decay[static_cast<Eigen::Index>(i)] * std::norm(x[i]);
    return r;
  }

  /// Finds t* in (ta, tb] with ‖x(t*)‖² = xi and moves x to it. Safeguarded
  /// Newton on the bracket, seeded by the cubic Hermite interpolant of S; every
  /// iterate is a re-integration from the left knot.
  double locate(StateVec& x, const StateVec& xa, double ta, double sa, const StateVec& xb,
                double tb, double sb, double xi) {
    if (!(sa > xi) || !(sb <= xi)) throw RootFailure("jump time not bracketed by the step");
    if (sb == xi) {
      x = xb;
      return tb;
    }
    const double h = tb - ta;
    const double da = -loss_rate(xa) * h, db = -loss_rate(xb) * h;
    // Hermite cubic in u ∈ [0, 1]; bisection on it gives the first iterate.
    auto hermite = [&](double u) {
      const double u2 = u * u, u3 = u2 * u;
      return (2 * u3 - 3 * u2 + 1) * sa + (u3 - 2 * u2 + u) * da + (-2 * u3 + 3 * u2) * sb +
             (u3 - u2) * db - xi;
    };
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 40; ++k) {
      const double mid = 0.5 * (lo + hi);
      (hermite(mid) > 0.0 ? lo : hi) = mid;
    }
    double a = ta, b = tb;
    double t = ta + 0.5 * (lo + hi) * h;
    const double tol = std::max(opts_.root_tol, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(tb));
    // S itself is only known to the integrator's accuracy.
    const double ftol = opts_.rel_tol * opts_.tolerance_scale * xi;
    for (int it = 0; it < 100; ++it) {
      StateVec y = xa;
      evolve_to(y, ta, t);
      const double f = norm2(y) - xi;
      const double df = -loss_rate(y);
      (f > 0.0 ? a : b) = t;
      double next = (df < 0.0) ? t - f / df : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(f) <= ftol || std::abs(next - t) <= tol || b - a <= tol) {
        x = std::move(y);
        return t;
      }
      t = next;
    }
    throw RootFailure("jump-time root finder did not converge");
  }

  void jump(StateVec& x, double t, TrajectoryRng& rng, TrajectoryRecord& rec) {
    const double s = norm2(x);
    std::vector<double> gamma(rates_.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < rates_.size(); ++j) {
      double g = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) g += rates_[j][i] * std::norm(x[i]);
      gamma[j] = g / s;
      total += gamma[j];
    }
    if (!(total > 1e-300) || !std::isfinite(total)) {
      std::ostringstream msg;
      msg << "forced jump at t = " << t << " with total rate " << total;
      throw NumericError(msg.str());
    }
    const double r = rng.uniform() * total;
    std::size_t j = 0;
    double acc = gamma[0];
    while (acc < r && j + 1 < gamma.size()) acc += gamma[++j];
    StateVec y(x.size());
    noise_.jumps[j].apply(x.data(), y.data(), noise_.space);
    const double ny = std::sqrt(norm2(y));
    if (!(ny > 0.0)) throw NumericError("jump produced a null state");
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] / ny;
    rec.jump_times.push_back(t);
    rec.jump_channels.push_back(static_cast<int>(j));
  }

  void record(const StateVec& x, std::size_t k, Eigen::MatrixXd& samples) const {
    if (opts_.observables.empty()) return;
    const Eigen::VectorXcd v = to_eigen(x);
    const double s = v.squaredNorm();
    for (std::size_t o = 0; o < opts_.observables.size(); ++o)
      samples(k, o) = opts_.observables[o].second.expectation(v) / s;
  }

  /// Continues a trajectory from (x, t) with sample index `next` to t_final.
  void run_from(StateVec x, double t, std::size_t next, TrajectoryRng& rng, TrajectoryRecord& rec) {
    double xi = rng.uniform();
    for (;;) {
      while (next < times_.size() && times_[next] <= t) record(x, next++, rec.samples);
      if (t >= t_final_) break;
      const double target = next < times_.size() ? times_[next] : t_final_;
      const StateVec xa = x;
      const double ta = t;
      const double sa = norm2(xa);
      step(x, t, target);
      const double sb = norm2(x);
      if (sb < xi) {
        t = locate(x, xa, ta, sa, StateVec(x), t, sb, xi);
        jump(x, t, rng, rec);
        xi = rng.uniform();
      }
    }
    finish(x, rec);
  }

  void finish(const StateVec& x, TrajectoryRecord& rec) const {
    rec.final_norm_squared = norm2(x);
    rec.tail_mass = tail_of(x, noise_.space);
    if (opts_.keep_final_states) rec.final_state = to_eigen(x);
  }

  Prefix build_prefix(const StateVec& x0) {
    Prefix p;
    p.samples = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times_.size()),
                                      static_cast<Eigen::Index>(opts_.observables.size()));
    StateVec x = x0;
    double t = 0.0;
    std::size_t next = 0;
    p.knots.push_back({t, norm2(x), x});
    for (;;) {
      while (next < times_.size() && times_[next] <= t) record(x, next++, p.samples);
      if (t >= t_final_) break;
      const double target = next < times_.size() ? times_[next] : t_final_;
      step(x, t, target);
      p.knots.push_back({t, norm2(x), x});
    }
    p.tail_mass = tail_of(x, noise_.space);
    return p;
  }

  /// A trajectory that shares the no-jump prefix until its first jump.
  void run_with_prefix(const Prefix& p, TrajectoryRng& rng, TrajectoryRecord& rec) {
    const double xi = rng.uniform();
    const Knot& last = p.knots.back();
    if (xi < last.s) {
      rec.samples = p.samples;
      rec.final_norm_squared = last.s;
      rec.tail_mass = p.tail_mass;
      if (opts_.keep_final_states) rec.final_state = to_eigen(last.x);
      return;
    }
    // S is non-increasing along the knots; find the first knot below xi.
    auto it = std::partition_point(p.knots.begin(), p.knots.end(),
                                   [xi](const Knot& k) { return k.s >= xi; });
    if (it == p.knots.begin() || it == p.knots.end()) throw RootFailure("prefix knots do not bracket the jump");
    const Knot& a = *(it - 1);
    const Knot& b = *it;
    StateVec x;
    const double ts = locate(x, a.x, a.t, a.s, b.x, b.t, b.s, xi);
    std::size_t next = 0;
    while (next < times_.size() && times_[next] < ts) {
      rec.samples.row(static_cast<Eigen::Index>(next)) = p.samples.row(static_cast<Eigen::Index>(next));
      ++next;
    }
    jump(x, ts, rng, rec);
    run_from(std::move(x), ts, next, rng, rec);
  }

 private:
  Generator gen_;
  const NoiseModel& noise_;
  double t_final_;
  const std::vector<double>& times_;
  const McwfOptions& opts_;
  const std::vector<Eigen::VectorXd>& rates_;
  Stepper stepper_;
  double dt_;
};

std::vector<double> resolve_times(const std::vector<double>& requested, double t_final) {
  if (requested.empty()) return {t_final};
  std::vector<double> t = requested;
  if (!std::is_sorted(t.begin(), t.end())) throw ParameterError("sample times must be sorted");
  if (t.front() < 0.0 || t.back() > t_final * (1.0 + 1e-14))
    throw ParameterError("sample times must lie in [0, t_final]");
  t.back() = std::min(t.back(), t_final);
  return t;
}

void check_problem(const TimeDependentHamiltonian& h, const NoiseModel& noise, double t_final) {
  const std::size_t dim = noise.space.dimension();
  if (h.fixed.dimension() != dim || (h.scale && h.scaled.dimension() != dim))
    throw DimensionError("Hamiltonian and noise model live on different spaces");
  if (noise.decay.size() != 0 && static_cast<std::size_t>(noise.decay.size()) != dim)
    throw DimensionError("decay diagonal has the wrong length");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ParameterError("final time must be ≥ 0");
}

TrajectoryEnsemble make_ensemble(const NoiseModel& noise, std::uint64_t seed,
                                 const std::vector<double>& times, const McwfOptions& opts,
                                 std::size_t n) {
  TrajectoryEnsemble e;
  e.seed = seed;
  e.sample_times = times;
  for (const auto& [name, op] : opts.observables) {
    if (op.dimension() != noise.space.dimension()) throw DimensionError("observable '" + name + "' has the wrong dimension");
    e.observable_names.push_back(name);
  }
  for (const auto& j : noise.jumps) e.channel_names.push_back(j.name);
  e.trajectories.resize(n);
  return e;
}

template <class Body>
void run_ensemble(TrajectoryEnsemble& e, const McwfOptions& opts, Body&& body) {
  const std::size_t n = e.trajectories.size();
  const auto rows = static_cast<Eigen::Index>(e.sample_times.size());
  const auto cols = static_cast<Eigen::Index>(e.observable_names.size());
  std::vector<std::vector<std::string>> incidents(n);
  parallel_for(n, opts.workers, [&](std::size_t i) {
    for (int attempt = 0;; ++attempt) {
      TrajectoryRecord rec;
      rec.index = i;
      rec.samples = Eigen::MatrixXd::Zero(rows, cols);
      TrajectoryRng rng(e.seed, i, attempt);
      try {
        body(i, rng, rec);
        rec.resamples = attempt;
        rec.weight = e.trajectories[i].weight;
        e.trajectories[i] = std::move(rec);
        return;
      } catch (const RootFailure& err) {
        std::ostringstream msg;
        msg << "trajectory " << i << " attempt " << attempt << ": " << err.what();
        incidents[i].push_back(msg.str());
        if (attempt >= opts.max_resamples) throw NumericError(msg.str() + " (resamples exhausted)");
      }
    }
  });
  for (auto& v : incidents)
    for (auto& s : v) e.incidents.push_back(std::move(s));
}

std::vector<Eigen::VectorXd> channel_rates(const NoiseModel& noise) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& j : noise.jumps) out.push_back(j.rate_diagonal(noise.space));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void DissipatorSpec::validate() const {
  check_rate(motional_dephasing, "motional dephasing Γ_m");
  check_rate(qubit_dephasing, "qubit dephasing Γ_q");
  if (bath_coupling) check_rate(*bath_coupling, "bath coupling γ");
  if (thermal_occupation) check_rate(*thermal_occupation, "thermal occupation n_th");
  if (heating_rate) check_rate(*heating_rate, "heating rate γ·n_th");
  if (damping_rate) check_rate(*damping_rate, "damping rate γ·(n_th+1)");
}

double DissipatorSpec::resolved_heating() const {
  if (heating_rate) return *heating_rate;
  if (bath_coupling && thermal_occupation) return *bath_coupling * *thermal_occupation;
  return 0.0;
}

double DissipatorSpec::resolved_damping() const {
  if (damping_rate) return *damping_rate;
  if (bath_coupling) return *bath_coupling * (thermal_occupation.value_or(0.0) + 1.0);
  return resolved_heating();
}

bool DissipatorSpec::empty() const {
  return motional_dephasing == 0.0 && qubit_dephasing == 0.0 && resolved_heating() == 0.0 &&
         resolved_damping() == 0.0;
}

void JumpOperator::apply(const cplx* in, cplx* out, const HilbertSpace& space) const {
  const std::size_t dim = space.dimension();
  const int nmax = space.fock_cutoff();
  switch (kind) {
    case Kind::Diagonal:
      for (std::size_t i = 0; i < dim; ++i) out[i] = coefficient * diagonal[static_cast<Eigen::Index>(i)] * in[i];
      return;
    case Kind::Lower:
      for (int n = 0; n <= nmax; ++n)
        for (int s = 0; s < 2; ++s)
          out[HilbertSpace::index(n, s)] =
              n < nmax ? coefficient * std::sqrt(n + 1.0) * in[HilbertSpace::index(n + 1, s)] : cplx{};
      return;
    case Kind::Raise:
      for (int n = 0; n <= nmax; ++n)
        for (int s = 0; s < 2; ++s)
          out[HilbertSpace::index(n, s)] =
              n > 0 ? coefficient * std::sqrt(static_cast<double>(n)) * in[HilbertSpace::index(n - 1, s)] : cplx{};
      return;
  }
}

Eigen::VectorXd JumpOperator::rate_diagonal(const HilbertSpace& space) const {
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  const int nmax = space.fock_cutoff();
  const double c2 = coefficient * coefficient;
  Eigen::VectorXd d(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const int n = HilbertSpace::fock_of(static_cast<std::size_t>(i));
    switch (kind) {
      case Kind::Diagonal: d[i] = c2 * diagonal[i] * diagonal[i]; break;
      case Kind::Lower: d[i] = c2 * n; break;
      case Kind::Raise: d[i] = n < nmax ? c2 * (n + 1.0) : 0.0; break;
    }
  }
  return d;
}

Eigen::MatrixXd JumpOperator::dense(const HilbertSpace& space) const {
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<cplx> e(dim), col(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    std::fill(e.begin(), e.end(), cplx{});
    e[c] = 1.0;
    apply(e.data(), col.data(), space);
    for (Eigen::Index r = 0; r < dim; ++r) m(r, c) = col[r].real();
  }
  return m;
}

NoiseModel build_dissipators_lab(const DissipatorSpec& spec, const HilbertSpace& space) {
  spec.validate();
  NoiseModel nm;
  nm.space = space;
  const auto dim = static_cast<Eigen::Index>(space.dimension());
  const double heating = spec.resolved_heating();
  const double damping = spec.resolved_damping();
  if (spec.motional_dephasing > 0.0) {
    Eigen::VectorXd n(dim);
    for (Eigen::Index i = 0; i < dim; ++i) n[i] = HilbertSpace::fock_of(static_cast<std::size_t>(i));
    nm.jumps.push_back({"motional_dephasing", JumpOperator::Kind::Diagonal,
                        std::sqrt(2.0 * spec.motional_dephasing), n});
  }
  if (heating > 0.0) nm.jumps.push_back({"heating", JumpOperator::Kind::Raise, std::sqrt(heating), {}});
  if (damping > 0.0) nm.jumps.push_back({"damping", JumpOperator::Kind::Lower, std::sqrt(damping), {}});
  if (spec.qubit_dephasing > 0.0) {
    Eigen::VectorXd up(dim);
    for (Eigen::Index i = 0; i < dim; ++i) up[i] = HilbertSpace::qubit_of(static_cast<std::size_t>(i));
    nm.jumps.push_back({"qubit_dephasing", JumpOperator::Kind::Diagonal,
                        std::sqrt(2.0 * spec.qubit_dephasing), up});
  }
  nm.decay = Eigen::VectorXd::Zero(dim);
  for (const auto& j : nm.jumps) nm.decay += j.rate_diagonal(space);
  nm.time_unit = 1.0;
  return nm;
}

NoiseModel build_dissipators(const DissipatorSpec& spec, double energy_scale, double system_size,
                             const HilbertSpace& space) {
  if (!(energy_scale > 0.0) || !(system_size > 0.0))
    throw ParameterError("energy scale and system size must be positive");
  NoiseModel nm = build_dissipators_lab(spec, space);
  const double rate_unit = energy_scale * std::sqrt(system_size);  // 1/s per unit of τ
  const double c = 1.0 / std::sqrt(rate_unit);
  for (auto& j : nm.jumps) j.coefficient *= c;
  nm.decay /= rate_unit;
  nm.time_unit = 1.0 / rate_unit;
  return nm;
}

TimeDependentHamiltonian TimeDependentHamiltonian::ramp(const RampProtocol& protocol,
                                                        const HilbertSpace& space) {
  protocol.validate();
  ErmTerms terms = erm_terms(protocol.system_size, protocol.regime, space);
  TimeDependentHamiltonian h;
  h.fixed = std::move(terms.free);
  h.scaled = std::move(terms.coupling);
  h.scale = [protocol](double t) { return protocol.coupling_at(t); };
  return h;
}

TimeDependentHamiltonian TimeDependentHamiltonian::constant(SymmetricBand band) {
  TimeDependentHamiltonian h;
  h.fixed = std::move(band);
  return h;
}

// ---------------------------------------------------------------------------

TrajectoryRng::TrajectoryRng(std::uint64_t master, std::uint64_t index, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(attempt)};
  engine_.seed(seq);
}

double TrajectoryRng::uniform() {
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

std::size_t TrajectoryEnsemble::observable_index(const std::string& name) const {
  const auto it = std::find(observable_names.begin(), observable_names.end(), name);
  if (it == observable_names.end()) throw DomainError("observable '" + name + "' was not recorded");
  return static_cast<std::size_t>(it - observable_names.begin());
}

double TrajectoryEnsemble::mean_jumps() const {
  if (trajectories.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trajectories) s += static_cast<double>(t.jump_times.size());
  return s / static_cast<double>(trajectories.size());
}

std::vector<std::size_t> TrajectoryEnsemble::jumps_per_channel() const {
  std::vector<std::size_t> out(channel_names.size(), 0);
  for (const auto& t : trajectories)
    for (int c : t.jump_channels) ++out[static_cast<std::size_t>(c)];
  return out;
}

double TrajectoryEnsemble::mean_tail_mass() const {
  double s = 0.0, w = 0.0;
  for (const auto& t : trajectories) {
    s += t.weight * t.tail_mass;
    w += t.weight;
  }
  return w > 0.0 ? s / w : 0.0;
}

double TrajectoryEnsemble::max_tail_mass() const {
  double m = 0.0;
  for (const auto& t : trajectories) m = std::max(m, t.tail_mass);
  return m;
}

TrajectoryEnsemble mcwf_evolve(const QuantumState& psi0, const TimeDependentHamiltonian& h,
                               const NoiseModel& noise, double t_final, std::size_t n,
                               std::uint64_t seed, const McwfOptions& opts) {
  if (n < 1) throw ParameterError("need at least one trajectory");
  if (!psi0.is_normalized()) throw ParameterError("initial state must be normalized");
  if (psi0.space.dimension() != noise.space.dimension()) throw DimensionError("initial state and noise model differ in dimension");
  check_problem(h, noise, t_final);
  const std::vector<double> times = resolve_times(opts.sample_times, t_final);
  TrajectoryEnsemble e = make_ensemble(noise, seed, times, opts, n);
  const auto rates = channel_rates(noise);

  Runner shared(h, noise, t_final, times, opts, rates);
  const Prefix prefix = shared.build_prefix(to_state(psi0.amplitudes));
  e.prefix_steps = prefix.knots.size() - 1;

  run_ensemble(e, opts, [&](std::size_t, TrajectoryRng& rng, TrajectoryRecord& rec) {
    Runner r(h, noise, t_final, times, opts, rates);
    r.run_with_prefix(prefix, rng, rec);
  });
  return e;
}

TrajectoryEnsemble mcwf_evolve(const QuantumState& psi0, const RampProtocol& protocol,
                               const NoiseModel& noise, std::size_t n, std::uint64_t seed,
                               const McwfOptions& opts) {
  const HilbertSpace& space = psi0.space;
  McwfOptions o = opts;
  if (o.observables.empty()) {
    const SymmetricBand num = number_operator(space);
    Eigen::VectorXd n2 = num.diagonal_values().array().square();
    o.observables = {{"p0", vacuum_down_projector(space)},
                     {"pdown", qubit_down_projector(space)},
                     {"n", num},
                     {"n2", SymmetricBand::diagonal(n2)},
                     {"jz", jz_operator(space)},
                     {"jz2", SymmetricBand::diagonal(Eigen::VectorXd::Constant(
                                 static_cast<Eigen::Index>(space.dimension()), 0.25))}};
  }
  return mcwf_evolve(psi0, TimeDependentHamiltonian::ramp(protocol, space), noise, protocol.duration,
                     n, seed, o);
}

TrajectoryEnsemble mcwf_evolve_mixture(const std::vector<QuantumState>& initial,
                                       const std::vector<double>& weights,
                                       const TimeDependentHamiltonian& h, const NoiseModel& noise,
                                       double t_final, std::uint64_t seed,
                                       const McwfOptions& opts) {
  if (initial.empty()) throw ParameterError("need at least one initial state");
  if (weights.size() != initial.size()) throw DimensionError("one weight per initial state is required");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("weights must be finite and ≥ 0");
  for (const auto& s : initial) {
    if (!s.is_normalized()) throw ParameterError("initial states must be normalized");
    if (s.space.dimension() != noise.space.dimension()) throw DimensionError("initial state and noise model differ in dimension");
  }
  check_problem(h, noise, t_final);
  const std::vector<double> times = resolve_times(opts.sample_times, t_final);
  TrajectoryEnsemble e = make_ensemble(noise, seed, times, opts, initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) e.trajectories[i].weight = weights[i];
  const auto rates = channel_rates(noise);

  run_ensemble(e, opts, [&](std::size_t i, TrajectoryRng& rng, TrajectoryRecord& rec) {
    Runner r(h, noise, t_final, times, opts, rates);
    r.run_from(to_state(initial[i].amplitudes), 0.0, 0, rng, rec);
  });
  return e;
}

double McwfResult::mre_prefactor() const { return mre * std::sqrt(effective_n); }

McwfResult mcwf_expectation(const TrajectoryEnsemble& ensemble, const std::string& name,
                            std::optional<std::size_t> sample, const std::string& square_name) {
  if (ensemble.trajectories.empty()) throw DomainError("empty ensemble");
  const std::size_t col = ensemble.observable_index(name);
  const std::size_t row = sample.value_or(ensemble.sample_times.size() - 1);
  if (row >= ensemble.sample_times.size()) throw DomainError("sample index out of range");
  const auto r = static_cast<Eigen::Index>(row);

  double sw = 0.0, sw2 = 0.0, mean = 0.0;
  for (const auto& t : ensemble.trajectories) {
    sw += t.weight;
    sw2 += t.weight * t.weight;
    mean += t.weight * t.samples(r, static_cast<Eigen::Index>(col));
  }
  if (!(sw > 0.0)) throw DomainError("ensemble weights sum to zero");
  mean /= sw;
  double var = 0.0;
  for (const auto& t : ensemble.trajectories) {
    const double d = t.samples(r, static_cast<Eigen::Index>(col)) - mean;
    var += t.weight * d * d;
  }
  var /= sw;

  McwfResult out;
  out.mean = mean;
  out.n = ensemble.trajectories.size();
  out.effective_n = sw * sw / sw2;
  out.spread = std::sqrt(var);
  const double denom = std::sqrt(out.effective_n) * std::abs(mean);
  out.mre = denom > 0.0 ? out.spread / denom : 0.0;
  if (!square_name.empty()) {
    const auto c2 = static_cast<Eigen::Index>(ensemble.observable_index(square_name));
    double sq = 0.0;
    for (const auto& t : ensemble.trajectories) sq += t.weight * t.samples(r, c2);
    sq /= sw;
    out.operator_mre = denom > 0.0 ? std::sqrt(std::max(sq - mean * mean, 0.0)) / denom : 0.0;
  }
  return out;
}

nlohmann::json to_json(const McwfResult& r) {
  return {{"mean", r.mean},
          {"spread", r.spread},
          {"mre", r.mre},
          {"mre_prefactor", r.mre_prefactor()},
          {"operator_mre", r.operator_mre},
          {"n", r.n},
          {"effective_n", r.effective_n}};
}

nlohmann::json summary_json(const TrajectoryEnsemble& e) {
  nlohmann::json j;
  j["seed"] = e.seed;
  j["trajectories"] = e.size();
  j["mean_jumps"] = e.mean_jumps();
  j["prefix_steps"] = e.prefix_steps;
  j["mean_tail_mass"] = e.mean_tail_mass();
  j["max_tail_mass"] = e.max_tail_mass();
  nlohmann::json per = nlohmann::json::object();
  const auto counts = e.jumps_per_channel();
  for (std::size_t c = 0; c < counts.size(); ++c) per[e.channel_names[c]] = counts[c];
  j["jumps_per_channel"] = per;
  j["incidents"] = e.incidents;
  std::size_t resampled = 0;
  for (const auto& t : e.trajectories) resampled += t.resamples > 0 ? 1 : 0;
  j["resampled_trajectories"] = resampled;
  return j;
}

// ---------------------------------------------------------------------------

LindbladResult lindblad_dense_evolve(const Eigen::MatrixXcd& rho0, const TimeDependentHamiltonian& h,
                                     const NoiseModel& noise, double t_final,
                                     const LindbladOptions& opts) {
  const std::size_t dim = noise.space.dimension();
  if (dim > opts.max_dimension) {
    std::ostringstream msg;
    msg << "dense Lindblad oracle limited to dimension " << opts.max_dimension << ", got " << dim;
    throw OracleScopeError(msg.str());
  }
  if (static_cast<std::size_t>(rho0.rows()) != dim || rho0.rows() != rho0.cols())
    throw DimensionError("ρ₀ does not match the noise model's space");
  check_problem(h, noise, t_final);
  if (std::abs(rho0.trace() - 1.0) > opts.trace_tol) throw ParameterError("ρ₀ must have unit trace");
  if ((rho0 - rho0.adjoint()).norm() > 1e-10) throw ParameterError("ρ₀ must be Hermitian");
  const auto d = static_cast<Eigen::Index>(dim);
  const std::vector<double> times = resolve_times(opts.sample_times, t_final);

  const Eigen::MatrixXcd h0 = h.fixed.to_dense().cast<cplx>();
  const Eigen::MatrixXcd h1 = h.scale ? Eigen::MatrixXcd(h.scaled.to_dense().cast<cplx>())
                                      : Eigen::MatrixXcd::Zero(d, d);
  Eigen::VectorXcd half_decay = Eigen::VectorXcd::Zero(d);
  if (noise.decay.size() == d) half_decay = (0.5 * noise.decay).cast<cplx>();
  std::vector<Eigen::MatrixXd> ls;
  for (const auto& j : noise.jumps) ls.push_back(j.dense(noise.space));

  Eigen::MatrixXcd heff(d, d), a(d, d), tmp(d, d);
  const cplx I(0.0, 1.0);
  auto rhs = [&](const StateVec& x, StateVec& dxdt, double t) {
    Eigen::Map<const Eigen::MatrixXcd> rho(x.data(), d, d);
    Eigen::Map<Eigen::MatrixXcd> drho(dxdt.data(), d, d);
    heff = h0;
    if (h.scale) heff += h.scale(t) * h1;
    heff.diagonal() -= I * half_decay;
    // Not a + a†: that form is only right for exactly Hermitian ρ, and the
    // anti-Hermitian roundoff it leaves undamped grows like exp(max l² t).
    a.noalias() = heff * rho;
    a.noalias() -= rho * heff.adjoint();
    drho = -I * a;
    for (const auto& l : ls) {
      tmp.noalias() = l.cast<cplx>() * rho;
      drho.noalias() += tmp * l.transpose().cast<cplx>();
    }
  };

  LindbladResult out;
  StateVec x(rho0.data(), rho0.data() + rho0.size());
  auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol,
                                         odeint::runge_kutta_fehlberg78<StateVec>());
  double t = 0.0;
  const double dt0 = std::max(t_final * 1e-3, 1e-12);
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (double target : times) {
    if (target > t) odeint::integrate_adaptive(stepper, rhs, x, t, target, std::min(dt0, target - t));
    t = target;
    Eigen::MatrixXcd rho = Eigen::Map<const Eigen::MatrixXcd>(x.data(), d, d);
    const double drift = std::abs(rho.trace() - 1.0);
    out.max_trace_drift = std::max(out.max_trace_drift, drift);
    if (drift > opts.trace_tol) {
      std::ostringstream msg;
      msg << "trace drifted by " << drift << " at t = " << t;
      throw NumericError(msg.str());
    }
    const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = std::min(out.min_eigenvalue, es.eigenvalues().minCoeff());
    out.times.push_back(t);
    out.rho.push_back(std::move(rho));
  }
  return out;
}

LindbladResult lindblad_dense_evolve(const Eigen::MatrixXcd& rho0, const RampProtocol& protocol,
                                     const NoiseModel& noise, const LindbladOptions& opts) {
  return lindblad_dense_evolve(rho0, TimeDependentHamiltonian::ramp(protocol, noise.space), noise,
                               protocol.duration, opts);
}

// ---------------------------------------------------------------------------

std::vector<double> blue_sideband_signal(const Eigen::VectorXd& populations, double eta_omega,
                                         const std::vector<double>& times) {
  if (!(eta_omega > 0.0)) throw ParameterError("ηΩ₂ must be positive");
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < populations.size(); ++n)
      s += populations[n] * std::cos(eta_omega * std::sqrt(n + 1.0) * times[k]);
    out[k] = -0.5 * s;
  }
  return out;
}

RabiSignal blue_sideband_mcwf(const std::vector<Eigen::VectorXcd>& motional,
                              const std::vector<double>& weights, double eta_omega,
                              const std::vector<double>& times, const DissipatorSpec& spec,
                              std::uint64_t seed, const McwfOptions& opts) {
  if (!(eta_omega > 0.0)) throw ParameterError("ηΩ₂ must be positive");
  if (motional.empty()) throw ParameterError("need at least one motional state");
  if (times.empty()) throw ParameterError("need at least one sample time");
  Eigen::Index len = 0;
  for (const auto& m : motional) len = std::max(len, m.size());
  // One extra Fock level so the sideband never reaches the truncation edge.
  const HilbertSpace space(static_cast<int>(len));
  std::vector<QuantumState> initial;
  initial.reserve(motional.size());
  for (const auto& m : motional) {
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
    for (Eigen::Index n = 0; n < m.size(); ++n) amps[HilbertSpace::index(static_cast<int>(n), 0)] = m[n];
    amps.normalize();
    initial.emplace_back(space, amps);
  }
  const NoiseModel noise = build_dissipators_lab(spec, space);
  McwfOptions o = opts;
  o.sample_times = times;
  o.observables = {{"jz", jz_operator(space)}};
  const TrajectoryEnsemble e = mcwf_evolve_mixture(
      initial, weights, TimeDependentHamiltonian::constant(blue_sideband_operator(eta_omega, space)),
      noise, times.back(), seed, o);
  RabiSignal sig;
  sig.t = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const McwfResult r = mcwf_expectation(e, "jz", k);
    sig.jz_mean.push_back(r.mean);
    sig.jz_mre.push_back(r.mre);
  }
  return sig;
}

void write_rabi_csv(std::ostream& os, const RabiSignal& signal) {
  os << "t_seconds,jz_mean,jz_mre\n" << std::setprecision(12);
  for (std::size_t k = 0; k < signal.t.size(); ++k) {
    os << signal.t[k] << ',' << signal.jz_mean[k] << ','
       << (k < signal.jz_mre.size() ? signal.jz_mre[k] : 0.0) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

struct LinearFit {
  Eigen::VectorXd p;
  Eigen::MatrixXd covariance;
  double rss = 0.0;
  double condition = 0.0;
  bool constrained = false;
};

Eigen::MatrixXd design(const Eigen::VectorXd& t, double eta_omega, int k, const Eigen::VectorXd& kappa) {
  Eigen::MatrixXd x(t.size(), k);
  for (int n = 0; n < k; ++n) {
    const double w = eta_omega * std::sqrt(n + 1.0);
    x.col(n) = -0.5 * ((w * t).array().cos() * (-kappa[n] * t.array()).exp());
  }
  return x;
}

/// Linear least squares with Σp ≤ 1 enforced through the equality-constrained
/// solution when the free one exceeds it.
LinearFit solve_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  LinearFit f;
  f.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd v = svd.matrixV();
  const Eigen::VectorXd inv2 = sv.array().square().inverse();
  const Eigen::MatrixXd gram_inv = v * inv2.asDiagonal() * v.transpose();
  f.p = svd.solve(y);
  if (f.p.sum() > 1.0) {
    const Eigen::VectorXd z = gram_inv * Eigen::VectorXd::Ones(f.p.size());
    f.p -= z * ((f.p.sum() - 1.0) / z.sum());
    f.constrained = true;
  }
  f.rss = (y - x * f.p).squaredNorm();
  const double dof = std::max<double>(static_cast<double>(y.size() - x.cols()), 1.0);
  f.covariance = (f.rss / dof) * gram_inv;
  return f;
}

/// Variable projection: κ_n = ω₀|s_n| are the only nonlinear parameters.
struct EnvelopeResidual {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Eigen::VectorXd* t;
  const Eigen::VectorXd* y;
  double eta_omega;
  int k;

  int inputs() const { return k; }
  int values() const { return static_cast<int>(t->size()); }

  Eigen::VectorXd kappa(const Eigen::VectorXd& s) const { return eta_omega * s.cwiseAbs(); }

  int operator()(const Eigen::VectorXd& s, Eigen::VectorXd& fvec) const {
    const Eigen::MatrixXd x = design(*t, eta_omega, k, kappa(s));
    const LinearFit f = solve_linear(x, *y);
    fvec = *y - x * f.p;
    return 0;
  }
};

}  // namespace

int default_component_count(const Eigen::VectorXd& populations, double coverage) {
  if (populations.size() == 0) throw DomainError("empty population vector");
  const double total = populations.sum();
  double acc = 0.0;
  for (Eigen::Index n = 0; n < populations.size(); ++n) {
    acc += populations[n];
    if (acc >= coverage * total) return static_cast<int>(n + 1);
  }
  return static_cast<int>(populations.size());
}

VacuumFit extract_vacuum_population(const std::vector<double>& times,
                                    const std::vector<double>& signal, double eta_omega,
                                    int n_components, const FitOptions& opts) {
  if (!(eta_omega > 0.0)) throw ParameterError("ηΩ₂ must be positive");
  if (n_components < 1) throw ParameterError("need at least one component");
  if (times.size() != signal.size()) throw DimensionError("times and signal differ in length");
  if (times.size() < static_cast<std::size_t>(n_components) * (opts.damped ? 2 : 1) + 1)
    throw FitDegeneracyError("fewer samples than fit parameters");
  const auto [tmin, tmax] = std::minmax_element(times.begin(), times.end());
  const double periods = (*tmax - *tmin) * eta_omega / kTwoPi;
  if (periods < opts.min_periods) {
    std::ostringstream msg;
    msg << "signal covers " << periods << " vacuum periods, need " << opts.min_periods;
    throw FitDegeneracyError(msg.str());
  }
  const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(signal.data(), static_cast<Eigen::Index>(signal.size()));

  Eigen::VectorXd kappa = Eigen::VectorXd::Zero(n_components);
  LinearFit f = solve_linear(design(t, eta_omega, n_components, kappa), y);
  if (!(f.condition <= opts.max_condition)) {
    std::ostringstream msg;
    msg << "design matrix condition number " << f.condition << " exceeds " << opts.max_condition;
    throw FitDegeneracyError(msg.str());
  }

  if (opts.damped) {
    EnvelopeResidual functor{&t, &y, eta_omega, n_components};
    Eigen::NumericalDiff<EnvelopeResidual> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<EnvelopeResidual>> lm(numdiff);
    Eigen::VectorXd s = Eigen::VectorXd::Constant(n_components, 1e-3);
    lm.minimize(s);
    const Eigen::VectorXd k2 = functor.kappa(s);
    const Eigen::MatrixXd x = design(t, eta_omega, n_components, k2);
    LinearFit fd = solve_linear(x, y);
    if (fd.rss <= f.rss) {
      if (!(fd.condition <= opts.max_condition)) {
        std::ostringstream msg;
        msg << "damped design matrix condition number " << fd.condition << " exceeds " << opts.max_condition;
        throw FitDegeneracyError(msg.str());
      }
      f = std::move(fd);
      kappa = k2;
    }
  }

  VacuumFit out;
  out.populations = f.p;
  out.damping = kappa;
  out.p0 = f.p[0];
  // Conditional on the envelopes; their own uncertainty is not propagated.
  out.p0_error = std::sqrt(std::max(f.covariance(0, 0), 0.0));
  out.residual_rms = std::sqrt(f.rss / static_cast<double>(y.size()));
  out.condition_number = f.condition;
  out.constrained = f.constrained;
  return out;
}

}  // namespace esqpt
