#include "esqpt/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "esqpt/errors.hpp"
#include "esqpt/parallel.hpp"

namespace esqpt {

namespace {

constexpr double kBoundaryTol = 1e-12;

bool near(double a, double b) { return std::abs(a - b) <= kBoundaryTol * std::max(1.0, std::abs(b)); }

}  // namespace

double classical_energy(const PhasePoint& pt, double coupling, double regime) {
  const double l2 = coupling * coupling;
  const double root = std::sqrt(2.0 * l2 * (pt.x * pt.x + regime * regime * pt.p * pt.p) + 1.0);
  return 0.5 * (pt.x * pt.x + pt.p * pt.p) + pt.m * root;
}

CriticalSet critical_set(double coupling, double regime) {
  if (!(coupling >= 0.0)) throw ParameterError("coupling must be non-negative");
  CriticalSet c;
  const double ld = coupling * std::abs(regime);
  c.lambda_0 = regime == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / std::abs(regime);
  if (coupling > 1.0) {
    c.x_c = coupling / std::sqrt(2.0) * std::sqrt(1.0 - std::pow(coupling, -4.0));
    c.e_min = -(coupling * coupling + 1.0 / (coupling * coupling)) / 4.0;
  }
  if (ld > 1.0) {
    c.p_c = ld / std::sqrt(2.0) * std::sqrt(1.0 - std::pow(ld, -4.0));
    c.e_sad = -(ld * ld + 1.0 / (ld * ld)) / 4.0;
  }
  return c;
}

std::string to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::N: return "N";
    case PhaseLabel::S1: return "S1";
    case PhaseLabel::S2: return "S2";
    case PhaseLabel::S2Prime: return "S2'";
  }
  return "?";
}

PhaseClassification classify_phase(double coupling, double regime) {
  PhaseClassification out;
  const double ld = coupling * std::abs(regime);
  if (near(coupling, 1.0)) {
    out.label = PhaseLabel::N;
    out.boundary = true;
  } else if (coupling < 1.0) {
    out.label = PhaseLabel::N;
  } else if (near(ld, 1.0)) {
    out.label = PhaseLabel::S1;
    out.boundary = true;
  } else if (ld < 1.0) {
    out.label = PhaseLabel::S1;
  } else {
    out.label = regime > 0.0 ? PhaseLabel::S2 : PhaseLabel::S2Prime;
  }
  return out;
}

double mean_level_spacing(const Spectrum& spec, double lo, double hi) {
  std::vector<double> in;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec.eigenvalues[i] >= lo && spec.eigenvalues[i] <= hi) in.push_back(spec.eigenvalues[i]);
  }
  if (in.size() < 2) return std::nan("");
  return (in.back() - in.front()) / static_cast<double>(in.size() - 1);
}

DosCurve smoothed_dos(const Spectrum& spec, double sigma, int points, double lo, double hi) {
  if (spec.size() == 0) throw DomainError("empty spectrum");
  if (!(sigma > 0.0)) throw DomainError("smoothing width must be positive");
  if (points < 2) throw DomainError("need at least two grid points");
  if (!(hi > lo)) {
    lo = spec.eigenvalues.minCoeff() - 5.0 * sigma;
    hi = spec.eigenvalues.maxCoeff() + 5.0 * sigma;
  }
  DosCurve c;
  c.sigma = sigma;
  c.energy.resize(points);
  c.density.assign(points, 0.0);
  const double de = (hi - lo) / (points - 1);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * kPi));
  const double cutoff = 9.0 * sigma;
  for (int k = 0; k < points; ++k) c.energy[k] = lo + k * de;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double ei = spec.eigenvalues[i];
    const int k0 = std::max(0, static_cast<int>(std::floor((ei - cutoff - lo) / de)));
    const int k1 = std::min(points - 1, static_cast<int>(std::ceil((ei + cutoff - lo) / de)));
    for (int k = k0; k <= k1; ++k) {
      const double z = (c.energy[k] - ei) / sigma;
      c.density[k] += norm * std::exp(-0.5 * z * z);
    }
  }
  return c;
}

std::vector<double> jc_spectrum_analytic(double system_size, double coupling, int sign, int n_max) {
  if (!(system_size > 0.0)) throw ParameterError("system size must be positive");
  if (!(coupling >= 0.0)) throw ParameterError("coupling must be non-negative");
  if (sign != 1 && sign != -1) throw ParameterError("sign must be +1 or -1");
  std::vector<double> e;
  e.reserve(2 * static_cast<std::size_t>(n_max + 1) + 1);
  e.push_back(-0.5 * sign);
  const double detune = (1.0 - sign * system_size) / system_size;
  for (int n = 0; n <= n_max; ++n) {
    const double r = std::sqrt(detune * detune + 4.0 * coupling * coupling * (n + 1) / system_size);
    const double mid = (2.0 * n + 1.0) / (2.0 * system_size);
    e.push_back(mid - 0.5 * r);
    e.push_back(mid + 0.5 * r);
  }
  std::sort(e.begin(), e.end());
  return e;
}

namespace {

// Ray geometry on the m = −1/2 branch: with u = r², h = u/2 − √(g·u + 1)/2.
struct Ray {
  double g;
  double h(double r) const { return 0.5 * r * r - 0.5 * std::sqrt(g * r * r + 1.0); }
  double r_min() const { return std::sqrt(std::max(0.0, (g * g / 4.0 - 1.0) / g)); }
  double h_min() const { return -g / 8.0 - 1.0 / (2.0 * g); }
  // r·|∂h/∂r|⁻¹ at radius r on the level h = e.
  double density(double r, double e) const {
    const double u = r * r;
    return 1.0 / std::abs(1.0 - g / (2.0 * (u - 2.0 * e)));
  }
};

std::pair<double, double> radial_roots(const Ray& ray, double e) {
  using boost::math::tools::eps_tolerance;
  using boost::math::tools::toms748_solve;
  const double rm = ray.r_min();
  const double hm = ray.h_min();
  if (!(e > hm) || !(e < -0.5)) throw NumericError("energy outside the two-root range of a ray");
  auto f = [&](double r) { return ray.h(r) - e; };
  eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
  std::uintmax_t iters = 200;
  const auto inner = toms748_solve(f, 0.0, rm, f(0.0), f(rm), tol, iters);
  double hi = rm + 2.0 * std::sqrt(2.0 * (e - hm));
  while (f(hi) <= 0.0) hi *= 2.0;
  iters = 200;
  const auto outer = toms748_solve(f, rm, hi, f(rm), f(hi), tol, iters);
  return {0.5 * (inner.first + inner.second), 0.5 * (outer.first + outer.second)};
}

}  // namespace

PhaseSpaceVolumes phase_space_volumes(double coupling, double regime, const VolumeOptions& opts) {
  const CriticalSet cs = critical_set(coupling, regime);
  if (!cs.e_sad) throw PhaseError("phase-space volumes need λ|δ| > 1");
  using boost::math::quadrature::gauss_kronrod;
  const double l2 = coupling * coupling;
  const double d2 = regime * regime;
  const double e_sad = *cs.e_sad;
  const double span = cs.e_vac - e_sad;

  // Angular integral of r/|∂h/∂r| for one root at energy e; the integrand
  // has the symmetry of cos²φ, so a quarter turn suffices.
  auto angular = [&](double e, bool want_inner) {
    auto integrand = [&](double phi) {
      const double c = std::cos(phi);
      const double s = std::sin(phi);
      const Ray ray{2.0 * l2 * (c * c + d2 * s * s)};
      const auto roots = radial_roots(ray, e);
      return ray.density(want_inner ? roots.first : roots.second, e);
    };
    return 4.0 * gauss_kronrod<double, 15>::integrate(integrand, 0.0, kPi / 2.0, opts.max_depth,
                                                      opts.tolerance);
  };

  // e = e_sad + span·s² removes the logarithmic edge at the saddle energy.
  auto integrate_energy = [&](bool want_inner) {
    auto integrand = [&](double s) {
      if (s <= 0.0 || s >= 1.0) return 0.0;
      return 2.0 * span * s * angular(e_sad + span * s * s, want_inner);
    };
    return gauss_kronrod<double, 21>::integrate(integrand, 0.0, 1.0, opts.max_depth, opts.tolerance);
  };

  PhaseSpaceVolumes v;
  v.inner = integrate_energy(true);
  v.outer = integrate_energy(false);
  if (!std::isfinite(v.inner) || !std::isfinite(v.outer)) throw NumericError("volume quadrature diverged");
  return v;
}

EmergentPrediction predict_emergent_counts(double coupling, double regime, double system_size) {
  if (!(system_size > 0.0)) throw ParameterError("system size must be positive");
  const PhaseSpaceVolumes v = phase_space_volumes(coupling, regime);
  return {v.inner * system_size / kTwoPi, v.outer * system_size / kTwoPi, v.inner / v.outer};
}

std::vector<PhaseMapRow> phase_map(const std::vector<double>& lambdas,
                                   const std::vector<double>& deltas, bool with_volumes,
                                   unsigned workers) {
  std::vector<PhaseMapRow> rows(lambdas.size() * deltas.size());
  parallel_for(rows.size(), workers, [&](std::size_t k) {
    const double l = lambdas[k / deltas.size()];
    const double d = deltas[k % deltas.size()];
    const CriticalSet cs = critical_set(l, d);
    PhaseMapRow row{l, d, classify_phase(l, d), cs.e_min, cs.e_sad, std::nullopt, std::nullopt};
    if (with_volumes && cs.e_sad && !row.phase.boundary) {
      const auto v = phase_space_volumes(l, d);
      row.v_minus = v.inner;
      row.v_plus = v.outer;
    }
    rows[k] = row;
  });
  return rows;
}

void write_phase_map_csv(std::ostream& os, const std::vector<PhaseMapRow>& rows) {
  os << "lambda,delta,phase,e_min,e_sad,v_minus,v_plus\n" << std::setprecision(12);
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.lambda << ',' << r.delta << ',' << to_string(r.phase.label) << ',' << r.e_min << ',';
    opt(r.e_sad);
    os << ',';
    opt(r.v_minus);
    os << ',';
    opt(r.v_plus);
    os << '\n';
  }
}

}  // namespace esqpt
