#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/open_system.hpp"

using namespace esqpt;

namespace {

DissipatorSpec lab_rates() {
  DissipatorSpec d;
  d.motional_dephasing = 10.0;
  d.qubit_dephasing = 100.0;
  d.heating_rate = 3.3;
  return d;
}

// Strongly damped toy problem on N_max = 6 where the dense oracle is cheap.
// With ε/ħ = 1 rad/s and Δ = 4 the rates below are twice the dimensionless ones.
struct ToyProblem {
  HilbertSpace space{6};
  RampProtocol protocol{4.0, 0.5, 2.0, 10.0};
  NoiseModel noise;

  ToyProblem() {
    DissipatorSpec d;
    d.motional_dephasing = 0.05;
    d.qubit_dephasing = 0.1;
    d.heating_rate = 0.1;
    d.damping_rate = 0.4;
    noise = build_dissipators(d, 1.0, 4.0, space);
  }
};

Eigen::MatrixXcd pure(const QuantumState& s) { return s.amplitudes * s.amplitudes.adjoint(); }

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a - b, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<double> grid(double t1, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = t1 * k / (n - 1);
  return t;
}

}  // namespace

TEST(Dissipators, EmptySpecGivesHermitianGenerator) {
  const NoiseModel nm = build_dissipators({}, kTwoPi * 980.0, 15.4, HilbertSpace(10));
  EXPECT_TRUE(nm.empty());
  EXPECT_EQ(nm.decay.size(), 22);
  EXPECT_EQ(nm.decay.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dissipators, LabModel) {
  const HilbertSpace space(10);
  const double rate_unit = kTwoPi * 980.0 * std::sqrt(15.4);
  const NoiseModel nm = build_dissipators(lab_rates(), kTwoPi * 980.0, 15.4, space);
  ASSERT_EQ(nm.jumps.size(), 4u);
  EXPECT_EQ(nm.jumps[0].name, "motional_dephasing");
  EXPECT_NEAR(nm.jumps[0].coefficient, std::sqrt(20.0 / rate_unit), 1e-15);
  EXPECT_NEAR(nm.jumps[1].coefficient, std::sqrt(3.3 / rate_unit), 1e-15);  // heating
  EXPECT_NEAR(nm.jumps[2].coefficient, std::sqrt(3.3 / rate_unit), 1e-15);  // damping, n_th ≫ 1
  EXPECT_NEAR(nm.jumps[3].coefficient, std::sqrt(200.0 / rate_unit), 1e-15);
  EXPECT_NEAR(nm.time_unit, 1.0 / rate_unit, 1e-18);
  // K = Σ l†l is diagonal and positive.
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(22, 22);
  for (const auto& j : nm.jumps) {
    const Eigen::MatrixXd l = j.dense(space);
    k += l.transpose() * l;
  }
  EXPECT_LT((k - Eigen::MatrixXd(nm.decay.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GE(nm.decay.minCoeff(), 0.0);
}

TEST(Dissipators, QubitDephasingAnnihilatesDown) {
  const HilbertSpace space(5);
  const NoiseModel nm = build_dissipators(lab_rates(), kTwoPi * 980.0, 15.4, space);
  const JumpOperator& lq = nm.jumps.back();
  for (int n = 0; n <= 5; ++n) {
    const Eigen::VectorXcd v = QuantumState::basis(space, n, 0).amplitudes;
    Eigen::VectorXcd out(v.size());
    lq.apply(v.data(), out.data(), space);
    EXPECT_EQ(out.norm(), 0.0);
  }
}

TEST(Dissipators, RateResolution) {
  DissipatorSpec d;
  d.bath_coupling = 2.0;
  d.thermal_occupation = 0.5;
  EXPECT_DOUBLE_EQ(d.resolved_heating(), 1.0);
  EXPECT_DOUBLE_EQ(d.resolved_damping(), 3.0);
  d.damping_rate = 7.0;
  EXPECT_DOUBLE_EQ(d.resolved_damping(), 7.0);
  DissipatorSpec neg;
  neg.qubit_dephasing = -1.0;
  EXPECT_THROW(build_dissipators(neg, 1.0, 1.0, HilbertSpace(3)), ParameterError);
  EXPECT_THROW(build_dissipators({}, 0.0, 1.0, HilbertSpace(3)), ParameterError);
}

TEST(Mcwf, ZeroNoiseReproducesSchrodinger) {
  const HilbertSpace space(120);
  const RampProtocol p{15.4, 0.5, 4.0, 10 * kPi};
  const NoiseModel nm = build_dissipators({}, kTwoPi * 980.0, 15.4, space);
  const TrajectoryEnsemble e = mcwf_evolve(QuantumState::vacuum(space), p, nm, 8, 1);
  EXPECT_EQ(e.mean_jumps(), 0.0);
  const RampSummary s = summarize(propagate(QuantumState::vacuum(space), p, {}, nullptr), p);
  const McwfResult r = mcwf_expectation(e, "p0");
  EXPECT_NEAR(r.mean, s.p0, 1e-8);
  EXPECT_NEAR(r.spread, 0.0, 1e-12);
  EXPECT_NEAR(mcwf_expectation(e, "n").mean, s.n_mean, 1e-7);
}

TEST(Mcwf, IdentityHasNoRelativeError) {
  const HilbertSpace space(4);
  McwfOptions o;
  o.observables = {{"id", SymmetricBand::diagonal(Eigen::VectorXd::Ones(10))}};
  const NoiseModel nm = build_dissipators_lab(lab_rates(), space);
  const TrajectoryEnsemble e = mcwf_evolve(QuantumState::vacuum(space),
                                           TimeDependentHamiltonian::constant(jz_operator(space)), nm,
                                           0.01, 1, 3, o);
  const McwfResult r = mcwf_expectation(e, "id");
  EXPECT_NEAR(r.mean, 1.0, 1e-14);
  EXPECT_EQ(r.mre, 0.0);
  EXPECT_EQ(r.n, 1u);
}

TEST(Mcwf, AgreesWithDenseLindblad) {
  const ToyProblem toy;
  const QuantumState psi0 = QuantumState::vacuum(toy.space);
  const LindbladResult dense = lindblad_dense_evolve(pure(psi0), toy.protocol, toy.noise);
  EXPECT_LE(dense.max_trace_drift, 1e-8);
  EXPECT_GT(dense.min_eigenvalue, -1e-8);
  const TrajectoryEnsemble e = mcwf_evolve(psi0, toy.protocol, toy.noise, 20000, 2024, {.workers = 2});
  EXPECT_GT(e.mean_jumps(), 1.0);
  const Eigen::MatrixXcd& rho = dense.rho.back();
  const std::vector<std::pair<std::string, SymmetricBand>> checks{
      {"p0", vacuum_down_projector(toy.space)},
      {"pdown", qubit_down_projector(toy.space)},
      {"n", number_operator(toy.space)},
      {"jz", jz_operator(toy.space)}};
  for (const auto& [name, op] : checks) {
    const double exact = (rho * op.to_dense().cast<cplx>()).trace().real();
    const McwfResult r = mcwf_expectation(e, name);
    EXPECT_LE(std::abs(r.mean - exact), 3.0 * r.standard_error()) << name << " exact " << exact;
  }
}

TEST(Mcwf, StandardErrorScalesAsInverseRootN) {
  const ToyProblem toy;
  std::vector<double> logn, logs;
  std::uint64_t seed = 77;
  for (std::size_t n : {1000u, 4000u, 16000u}) {
    const TrajectoryEnsemble e = mcwf_evolve(QuantumState::vacuum(toy.space), toy.protocol, toy.noise, n, seed++);
    logn.push_back(std::log(static_cast<double>(n)));
    logs.push_back(std::log(mcwf_expectation(e, "n").standard_error()));
  }
  const double slope = (logs[2] - logs[0]) / (logn[2] - logn[0]);
  EXPECT_NEAR(slope, -0.5, 0.1);
}

TEST(Mcwf, SeedDeterminismAcrossWorkers) {
  const ToyProblem toy;
  const QuantumState psi0 = QuantumState::vacuum(toy.space);
  const auto a = mcwf_evolve(psi0, toy.protocol, toy.noise, 300, 5, {.workers = 1});
  const auto b = mcwf_evolve(psi0, toy.protocol, toy.noise, 300, 5, {.workers = 3});
  const auto c = mcwf_evolve(psi0, toy.protocol, toy.noise, 300, 6, {.workers = 1});
  EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
  EXPECT_EQ(to_json(mcwf_expectation(a, "n")).dump(), to_json(mcwf_expectation(b, "n")).dump());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.trajectories[i].jump_times, b.trajectories[i].jump_times);
    EXPECT_EQ(a.trajectories[i].jump_channels, b.trajectories[i].jump_channels);
  }
  EXPECT_NE(mcwf_expectation(a, "n").mean, mcwf_expectation(c, "n").mean);
}

TEST(Mcwf, JumpTimesIncrease) {
  const ToyProblem toy;
  const auto e = mcwf_evolve(QuantumState::vacuum(toy.space), toy.protocol, toy.noise, 200, 9);
  for (const auto& t : e.trajectories) {
    for (std::size_t k = 1; k < t.jump_times.size(); ++k) EXPECT_GT(t.jump_times[k], t.jump_times[k - 1]);
    for (double tj : t.jump_times) {
      EXPECT_GT(tj, 0.0);
      EXPECT_LE(tj, toy.protocol.duration);
    }
  }
}

TEST(Mcwf, DampingJumpCountIsPoissonian) {
  // l = √κ·â on a coherent state: counts are Poisson with mean |α|²(1 − e^{−κT}).
  const HilbertSpace space(40);
  const double alpha = 2.0, kappa = 0.5, t_final = 3.0;
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
  double c = std::exp(-0.5 * alpha * alpha);
  for (int n = 0; n <= 40; ++n) {
    amps[HilbertSpace::index(n, 0)] = c;
    c *= alpha / std::sqrt(n + 1.0);
  }
  amps.normalize();
  DissipatorSpec d;
  d.damping_rate = kappa;
  const NoiseModel nm = build_dissipators_lab(d, space);
  const std::size_t n = 4000;
  const auto e = mcwf_evolve(QuantumState(space, amps),
                             TimeDependentHamiltonian::constant(number_operator(space)), nm, t_final, n, 31);
  const double expected = alpha * alpha * (1.0 - std::exp(-kappa * t_final));
  EXPECT_NEAR(e.mean_jumps(), expected, 3.0 * std::sqrt(expected / n));
}

TEST(DenseLindblad, ZeroNoiseMatchesSchrodinger) {
  const HilbertSpace space(16);
  const RampProtocol p{4.0, 0.5, 2.0, 6.0};
  const NoiseModel nm = build_dissipators({}, 1.0, 4.0, space);
  const QuantumState psi0 = QuantumState::vacuum(space);
  const LindbladResult r = lindblad_dense_evolve(pure(psi0), p, nm);
  PropagationOptions o;
  o.check_tail = false;
  const QuantumState psi = propagate(psi0, p, o, nullptr);
  EXPECT_LE(trace_distance(r.rho.back(), pure(psi)), 1e-8);
}

TEST(DenseLindblad, PureDampingDecay) {
  const HilbertSpace space(8);
  DissipatorSpec d;
  d.damping_rate = 0.6;  // dimensionless κ = 0.3 with ε/ħ = 1, Δ = 4
  const NoiseModel nm = build_dissipators(d, 1.0, 4.0, space);
  LindbladOptions o;
  o.sample_times = {0.0, 1.0, 2.5, 5.0};
  const LindbladResult r =
      lindblad_dense_evolve(pure(QuantumState::basis(space, 1, 0)), RampProtocol{4.0, 0.0, 0.0, 5.0}, nm, o);
  const Eigen::MatrixXcd n = number_operator(space).to_dense().cast<cplx>();
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    EXPECT_NEAR((r.rho[k] * n).trace().real(), std::exp(-0.3 * r.times[k]), 1e-9);
  }
}

TEST(DenseLindblad, StrongDephasingStaysPhysical) {
  const HilbertSpace space(16);
  DissipatorSpec d;
  d.motional_dephasing = 0.2;  // l² = 0.2 n², up to 51.2 at the edge
  const NoiseModel nm = build_dissipators(d, 1.0, 4.0, space);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dimension()));
  const auto lo = static_cast<Eigen::Index>(HilbertSpace::index(0, 0));
  const auto hi = static_cast<Eigen::Index>(HilbertSpace::index(16, 0));
  psi[lo] = psi[hi] = std::sqrt(0.5);
  LindbladOptions o;
  o.sample_times = {0.25, 0.5, 10.0};
  const LindbladResult r = lindblad_dense_evolve(psi * psi.adjoint(), RampProtocol{4.0, 0.0, 0.0, 10.0}, nm, o);
  EXPECT_NEAR(std::abs(r.rho[0](lo, hi)), 0.5 * std::exp(-25.6 * 0.25), 1e-9);
  EXPECT_NEAR(std::abs(r.rho[1](lo, hi)), 0.5 * std::exp(-25.6 * 0.5), 1e-9);
  EXPECT_NEAR(r.rho[2](hi, hi).real(), 0.5, 1e-9);
  EXPECT_LE(r.max_trace_drift, 1e-9);
  EXPECT_GE(r.min_eigenvalue, -1e-9);

  DissipatorSpec all = d;
  all.qubit_dephasing = 0.1;
  all.heating_rate = 0.1;
  all.damping_rate = 0.4;
  const NoiseModel nm_all = build_dissipators(all, 1.0, 4.0, space);
  const QuantumState vac = QuantumState::vacuum(space);
  const LindbladResult ramp = lindblad_dense_evolve(pure(vac), RampProtocol{4.0, 0.5, 2.0, 10.0}, nm_all);
  EXPECT_LE(ramp.max_trace_drift, 1e-9);
  EXPECT_GE(ramp.min_eigenvalue, -1e-9);
}

TEST(DenseLindblad, ScopeAndInputErrors) {
  const HilbertSpace big(20);
  const NoiseModel nm = build_dissipators({}, 1.0, 4.0, big);
  EXPECT_THROW(lindblad_dense_evolve(pure(QuantumState::vacuum(big)), RampProtocol{4.0, 0.0, 1.0, 1.0}, nm),
               OracleScopeError);
  const HilbertSpace small(3);
  const NoiseModel nm2 = build_dissipators({}, 1.0, 4.0, small);
  EXPECT_THROW(lindblad_dense_evolve(2.0 * pure(QuantumState::vacuum(small)), RampProtocol{4.0, 0.0, 1.0, 1.0}, nm2),
               ParameterError);
}

TEST(BlueSideband, ClosedForms) {
  const double w = kTwoPi * 2.4e3;
  const std::vector<double> t = grid(2e-3, 101);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(3);
  p0[0] = 1.0;
  const auto s0 = blue_sideband_signal(p0, w, t);
  Eigen::VectorXd p01(2);
  p01 << 0.5, 0.5;
  const auto s1 = blue_sideband_signal(p01, w, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(s0[k], -0.5 * std::cos(w * t[k]), 1e-15);
    EXPECT_NEAR(s1[k], -0.25 * (std::cos(w * t[k]) + std::cos(std::sqrt(2.0) * w * t[k])), 1e-15);
  }
  EXPECT_THROW(blue_sideband_signal(p0, 0.0, t), ParameterError);
}

TEST(BlueSideband, NoiselessTrajectoriesMatchClosedForm) {
  const double w = kTwoPi * 2.4e3;
  Eigen::VectorXcd m(4);
  m << 0.6, cplx(0.0, 0.5), 0.5, cplx(0.3, 0.2);
  m.normalize();
  const std::vector<double> t = grid(2e-3, 81);
  const RabiSignal sig = blue_sideband_mcwf({m}, {1.0}, w, t, {}, 4);
  const auto exact = blue_sideband_signal(m.cwiseAbs2(), w, t);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(sig.jz_mean[k], exact[k], 1e-7);
}

TEST(BlueSideband, NoisySignalStartsAtMinusHalf) {
  Eigen::VectorXcd m = Eigen::VectorXcd::Zero(6);
  m[0] = 0.8;
  m[2] = 0.6;
  const RabiSignal sig = blue_sideband_mcwf({m, m}, {0.3, 0.7}, kTwoPi * 2.4e3, grid(1e-3, 11),
                                            lab_rates(), 8);
  EXPECT_EQ(sig.jz_mean.front(), -0.5);
  std::ostringstream os;
  write_rabi_csv(os, sig);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t_seconds,jz_mean,jz_mre");
}

TEST(Extraction, RecoversNoiselessPopulations) {
  const double w = kTwoPi * 2.4e3;
  Eigen::VectorXd p(4);
  p << 0.5, 0.3, 0.15, 0.05;
  const std::vector<double> t = grid(10.0 * kTwoPi / w, 400);
  const auto sig = blue_sideband_signal(p, w, t);
  for (bool damped : {false, true}) {
    const VacuumFit f = extract_vacuum_population(t, sig, w, 4, {.damped = damped});
    EXPECT_NEAR(f.p0, 0.5, 1e-6) << "damped = " << damped;
    EXPECT_LT(f.p0_error, 1e-6);
  }
  EXPECT_EQ(default_component_count(p), 4);
  EXPECT_EQ(default_component_count(p, 0.79), 2);
}

TEST(Extraction, RecoversDampedComponents) {
  const double w = kTwoPi * 2.4e3;
  const std::vector<double> t = grid(12.0 * kTwoPi / w, 500);
  std::vector<double> sig(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    sig[k] = -0.5 * (0.6 * std::cos(w * t[k]) * std::exp(-200.0 * t[k]) +
                     0.4 * std::cos(std::sqrt(2.0) * w * t[k]) * std::exp(-600.0 * t[k]));
  }
  const VacuumFit f = extract_vacuum_population(t, sig, w, 2);
  EXPECT_NEAR(f.p0, 0.6, 1e-5);
  EXPECT_NEAR(f.damping[0], 200.0, 0.5);
  EXPECT_NEAR(f.damping[1], 600.0, 1.5);
}

TEST(Extraction, EnforcesPopulationBound) {
  const double w = 1.0;
  Eigen::VectorXd p(2);
  p << 0.8, 0.4;  // Σp = 1.2
  const std::vector<double> t = grid(10.0 * kTwoPi, 300);
  const VacuumFit f = extract_vacuum_population(t, blue_sideband_signal(p, w, t), w, 2, {.damped = false});
  EXPECT_TRUE(f.constrained);
  EXPECT_NEAR(f.populations.sum(), 1.0, 1e-12);
}

TEST(Extraction, OnePeriodIsDegenerate) {
  const double w = kTwoPi * 2.4e3;
  Eigen::VectorXd p(3);
  p << 0.6, 0.3, 0.1;
  const std::vector<double> t = grid(kTwoPi / w, 200);
  EXPECT_THROW(extract_vacuum_population(t, blue_sideband_signal(p, w, t), w, 3), FitDegeneracyError);
}
