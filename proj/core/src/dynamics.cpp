#include "esqpt/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "esqpt/errors.hpp"
#include "esqpt/parallel.hpp"

namespace esqpt {

namespace odeint = boost::numeric::odeint;
using StateVec = std::vector<cplx>;

void RampProtocol::validate() const {
  ModelParams{system_size, final_coupling, regime, std::nullopt}.validate();
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ParameterError("ramp duration must be ≥ 0");
}

double RampProtocol::coupling_at(double tau) const {
  if (duration <= 0.0) return final_coupling;
  return final_coupling * std::clamp(tau / duration, 0.0, 1.0);
}

QuantumState propagate(const QuantumState& psi0, const RampProtocol& protocol,
                       const PropagationOptions& opts, const SampleObserver& observer,
                       PropagationStats* stats_out) {
  protocol.validate();
  if (!psi0.is_normalized()) throw ParameterError("initial state must be normalized");
  if (opts.samples < 2) throw ParameterError("need at least two samples");
  PropagationStats stats;
  QuantumState out = psi0;

  if (protocol.duration == 0.0) {
    if (observer) observer(0.0, psi0.amplitudes);
    stats.norm_drift = std::abs(psi0.amplitudes.norm() - 1.0);
    if (stats_out) *stats_out = stats;
    return out;
  }

  const ErmTerms terms = erm_terms(protocol.system_size, protocol.regime, psi0.space);
  const std::size_t dim = psi0.space.dimension();
  auto rhs = [&](const StateVec& x, StateVec& dxdt, double tau) {
    ++stats.rhs_evaluations;
    const std::span<const cplx> xs(x.data(), dim);
    const std::span<cplx> ys(dxdt.data(), dim);
    terms.free.apply(xs, ys);
    terms.coupling.apply(xs, ys, protocol.coupling_at(tau), 1.0);
    for (auto& v : dxdt) v = cplx(v.imag(), -v.real());  // −i·v
  };

  const double rtol = opts.rel_tol * opts.tolerance_scale;
  const double atol = opts.abs_tol * opts.tolerance_scale;
  auto stepper = odeint::make_controlled(atol, rtol, odeint::runge_kutta_fehlberg78<StateVec>());

  StateVec x(psi0.amplitudes.data(), psi0.amplitudes.data() + dim);
  double tau = 0.0;
  double dt = std::min(0.01, protocol.duration / (opts.samples - 1));
  stats.min_step = dt;
  Eigen::VectorXcd buf(dim);
  auto emit = [&](double t) {
    std::copy(x.begin(), x.end(), buf.data());
    stats.norm_drift = std::max(stats.norm_drift, std::abs(buf.norm() - 1.0));
    if (observer) observer(t, buf);
  };
  emit(0.0);

  for (int k = 1; k < opts.samples; ++k) {
    const double target =
        (k == opts.samples - 1) ? protocol.duration : protocol.duration * k / (opts.samples - 1);
    while (tau < target) {
      const bool clipped = tau + dt >= target;
      double trial = clipped ? target - tau : dt;
      const double before = tau;
      const auto res = stepper.try_step(rhs, x, tau, trial);
      if (res == odeint::success) {
        ++stats.steps;
        if (clipped) tau = target;  // avoid round-off drift past the sample
        if (!clipped || trial > dt) dt = trial;
        stats.min_step = std::min(stats.min_step, tau - before);
      } else {
        ++stats.rejected;
        dt = trial;
      }
      if (dt < opts.min_step) {
        std::ostringstream msg;
        msg << "step size " << dt << " fell below " << opts.min_step << " at tau = " << tau
            << " (lambda = " << protocol.coupling_at(tau) << ", dim = " << dim << ")";
        throw StiffnessError(msg.str());
      }
    }
    emit(target);
  }

  std::copy(x.begin(), x.end(), out.amplitudes.data());
  if (stats_out) *stats_out = stats;
  if (opts.check_tail) check_cutoff(out, opts.tail_tol);
  return out;
}

StateTrajectory propagate_schrodinger(const QuantumState& psi0, const RampProtocol& protocol,
                                      const PropagationOptions& opts) {
  StateTrajectory tr;
  tr.protocol = protocol;
  tr.space = psi0.space;
  propagate(
      psi0, protocol, opts,
      [&](double tau, const Eigen::VectorXcd& psi) {
        tr.tau.push_back(tau);
        tr.states.push_back(psi);
      },
      &tr.stats);
  return tr;
}

WitnessSample witness_at(double tau, const Eigen::VectorXcd& psi, const RampProtocol& protocol,
                         const ErmTerms& terms, const HilbertSpace& space) {
  WitnessSample w{};
  w.tau = tau;
  w.lambda = protocol.coupling_at(tau);
  w.h_mean = terms.free.expectation(psi) + w.lambda * terms.coupling.expectation(psi);
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const double pi = std::norm(psi[i]);
    w.n_mean += pi * HilbertSpace::fock_of(i);
    w.jz_mean += pi * (HilbertSpace::qubit_of(i) == 0 ? -0.5 : 0.5);
  }
  w.p0 = std::norm(psi[0]);
  return w;
}

WitnessSeries witness_series(const StateTrajectory& trajectory) {
  if (trajectory.states.empty()) throw DomainError("empty trajectory");
  const ErmTerms terms =
      erm_terms(trajectory.protocol.system_size, trajectory.protocol.regime, trajectory.space);
  WitnessSeries out;
  out.reserve(trajectory.states.size());
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    out.push_back(witness_at(trajectory.tau[k], trajectory.states[k], trajectory.protocol, terms,
                             trajectory.space));
  }
  return out;
}

void write_witness_csv(std::ostream& os, const WitnessSeries& series) {
  os << "tau,lambda,h_mean,n_mean,jz_mean,p0\n" << std::setprecision(12);
  for (const auto& w : series) {
    os << w.tau << ',' << w.lambda << ',' << w.h_mean << ',' << w.n_mean << ',' << w.jz_mean << ','
       << w.p0 << '\n';
  }
}

DownProjection down_project(const QuantumState& psi) {
  const int nmax = psi.space.fock_cutoff();
  DownProjection d;
  d.motional.resize(nmax + 1);
  for (int n = 0; n <= nmax; ++n) d.motional[n] = psi.amplitudes[HilbertSpace::index(n, 0)];
  d.pdown = d.motional.squaredNorm() / psi.norm_squared();
  if (d.pdown < 1e-12) throw ProjectionError("qubit-down weight vanishes; projection undefined");
  d.motional.normalize();
  return d;
}

RampSummary summarize(const QuantumState& psi, const RampProtocol& protocol) {
  const ErmTerms terms = erm_terms(protocol.system_size, protocol.regime, psi.space);
  const WitnessSample w = witness_at(protocol.duration, psi.amplitudes, protocol, terms, psi.space);
  RampSummary s;
  const double norm2 = psi.norm_squared();
  s.p0 = w.p0 / norm2;
  s.n_mean = w.n_mean / norm2;
  s.jz_mean = w.jz_mean / norm2;
  s.h_mean = w.h_mean / norm2;
  s.pdown = down_project(psi).pdown;
  s.p0_tilde = s.p0 / s.pdown;
  s.norm_drift = std::abs(std::sqrt(norm2) - 1.0);
  return s;
}

std::string to_string(ScanAxis axis) {
  switch (axis) {
    case ScanAxis::Duration: return "tau_f";
    case ScanAxis::Regime: return "delta";
    case ScanAxis::SystemSize: return "Delta";
  }
  return "?";
}

ScanAxis scan_axis_from_string(const std::string& name) {
  if (name == "tau_f" || name == "duration") return ScanAxis::Duration;
  if (name == "delta" || name == "regime") return ScanAxis::Regime;
  if (name == "Delta" || name == "system_size") return ScanAxis::SystemSize;
  throw ParameterError("unknown scan axis '" + name + "'");
}

std::vector<ScanPoint> ramp_scan(ScanAxis axis, const std::vector<double>& grid,
                                 const RampProtocol& base, int fock_cutoff,
                                 const PropagationOptions& opts, unsigned workers) {
  if (grid.empty()) throw DomainError("scan grid is empty");
  std::vector<ScanPoint> out(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    RampProtocol p = base;
    switch (axis) {
      case ScanAxis::Duration: p.duration = grid[i]; break;
      case ScanAxis::Regime: p.regime = grid[i]; break;
      case ScanAxis::SystemSize: p.system_size = grid[i]; break;
    }
    const int cutoff = fock_cutoff > 0 ? fock_cutoff : default_fock_cutoff(p.system_size, p.final_coupling);
    const HilbertSpace space(cutoff);
    PropagationStats stats;
    const QuantumState end = propagate(QuantumState::vacuum(space), p, opts, nullptr, &stats);
    RampSummary s = summarize(end, p);
    s.norm_drift = stats.norm_drift;
    out[i] = {grid[i], s, cutoff};
  });
  return out;
}

void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& points) {
  os << "axis_value,p0_tilde,p0,pdown,n_mean,jz_mean\n" << std::setprecision(12);
  for (const auto& pt : points) {
    os << pt.axis_value << ',' << pt.summary.p0_tilde << ',' << pt.summary.p0 << ','
       << pt.summary.pdown << ',' << pt.summary.n_mean << ',' << pt.summary.jz_mean << '\n';
  }
}

}  // namespace esqpt
