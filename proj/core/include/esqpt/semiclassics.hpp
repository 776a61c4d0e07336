#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "esqpt/spectrum.hpp"

namespace esqpt {

/// Rescaled phase-space point (x′, p′) on quasispin branch m = ±1/2.
struct PhasePoint {
  double x = 0.0;
  double p = 0.0;
  double m = -0.5;
};

/// h(x, p, m) = (x² + p²)/2 + m·√(2λ²(x² + δ²p²) + 1).
double classical_energy(const PhasePoint& pt, double coupling, double regime);

struct CriticalSet {
  double e_vac = -0.5;
  double e_min = -0.5;
  std::optional<double> e_sad;  // present iff λ|δ| > 1
  double x_c = 0.0;
  std::optional<double> p_c;
  double lambda_c = 1.0;
  double lambda_0 = 0.0;        // 1/|δ|, +inf at δ = 0
};

CriticalSet critical_set(double coupling, double regime);

enum class PhaseLabel { N, S1, S2, S2Prime };
std::string to_string(PhaseLabel label);

struct PhaseClassification {
  PhaseLabel label = PhaseLabel::N;
  bool boundary = false;  // exactly at λ = 1 or λ|δ| = 1; label is the lower phase
};

PhaseClassification classify_phase(double coupling, double regime);

struct DosCurve {
  std::vector<double> energy;
  std::vector<double> density;
  double sigma = 0.0;
};

/// Mean spacing of the levels inside [lo, hi]; NaN when fewer than two.
double mean_level_spacing(const Spectrum& spec, double lo, double hi);

/// Gaussian-smoothed level density on a uniform grid of `points` energies
/// spanning [lo, hi]. When lo ≥ hi the grid covers the spectrum ± 5σ.
DosCurve smoothed_dos(const Spectrum& spec, double sigma, int points = 2001,
                      double lo = 0.0, double hi = 0.0);

/// Closed-form (a)JC spectrum at δ = ±1 for Fock pairs n = 0..n_max, with
/// the uncoupled vacuum level −sign/2, sorted ascending.
std::vector<double> jc_spectrum_analytic(double system_size, double coupling, int sign,
                                         int n_max);

struct PhaseSpaceVolumes {
  double inner = 0.0;  // v⁻
  double outer = 0.0;  // v⁺
};

struct VolumeOptions {
  double tolerance = 1e-7;  // relative tolerance for each adaptive level
  int max_depth = 10;
};

/// Inner/outer phase-space volumes of the m = −1/2 branch between e_sad and
/// e_vac, integrated over energy and angle with bracketed radial roots.
PhaseSpaceVolumes phase_space_volumes(double coupling, double regime,
                                      const VolumeOptions& opts = {});

struct EmergentPrediction {
  double emergent = 0.0;    // N_e = v⁻Δ/2π
  double background = 0.0;  // N_b = v⁺Δ/2π
  double ratio = 0.0;       // v⁻/v⁺
};

EmergentPrediction predict_emergent_counts(double coupling, double regime, double system_size);

struct PhaseMapRow {
  double lambda;
  double delta;
  PhaseClassification phase;
  double e_min;
  std::optional<double> e_sad;
  std::optional<double> v_minus;
  std::optional<double> v_plus;
};

std::vector<PhaseMapRow> phase_map(const std::vector<double>& lambdas,
                                   const std::vector<double>& deltas, bool with_volumes = true,
                                   unsigned workers = 1);

/// Columns lambda,delta,phase,e_min,e_sad,v_minus,v_plus; absent values are empty.
void write_phase_map_csv(std::ostream& os, const std::vector<PhaseMapRow>& rows);

}  // namespace esqpt
