#include <benchmark/benchmark.h>

#include "esqpt/dynamics.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/observables.hpp"
#include "esqpt/open_system.hpp"
#include "esqpt/semiclassics.hpp"
#include "esqpt/spectrum.hpp"

using namespace esqpt;

namespace {

const ModelParams kModel{15.4, 4.0, 0.5, std::nullopt};

void BM_HamiltonianApply(benchmark::State& state) {
  const HilbertSpace space(static_cast<int>(state.range(0)));
  const SymmetricBand h = build_hamiltonian(kModel, space);
  const Eigen::VectorXcd x = Eigen::VectorXcd::Random(static_cast<Eigen::Index>(space.dimension()));
  for (auto _ : state) benchmark::DoNotOptimize(h.apply(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(space.dimension()));
}
BENCHMARK(BM_HamiltonianApply)->Arg(220)->Arg(531)->Arg(4000);

void BM_SectorSpectrum(benchmark::State& state) {
  const HilbertSpace space(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagonalize_erm(kModel, space, Selection::all(), {.vectors = false}));
  }
}
BENCHMARK(BM_SectorSpectrum)->Arg(531)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_LowestEigenpairs(benchmark::State& state) {
  const HilbertSpace space(4000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagonalize_erm(kModel, space, Selection::lowest(static_cast<int>(state.range(0)))));
  }
}
BENCHMARK(BM_LowestEigenpairs)->Arg(50)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_PhaseSpaceVolumes(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(phase_space_volumes(4.0, 0.5));
}
BENCHMARK(BM_PhaseSpaceVolumes)->Unit(benchmark::kMillisecond);

void BM_RampPropagation(benchmark::State& state) {
  const HilbertSpace space(220);
  const RampProtocol p{15.4, 0.5, 4.0, static_cast<double>(state.range(0)) * kPi};
  PropagationOptions o;
  o.samples = 2;
  for (auto _ : state) benchmark::DoNotOptimize(propagate(QuantumState::vacuum(space), p, o, nullptr));
}
BENCHMARK(BM_RampPropagation)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_WignerGrid(benchmark::State& state) {
  const Spectrum spec = diagonalize_erm({20.0, 4.0, 0.5, std::nullopt}, HilbertSpace(300), Selection::lowest(1));
  const QuantumState gs(spec.space, spec.eigenvectors.col(0).cast<cplx>());
  const Eigen::MatrixXcd rho = reduced_motional(gs);
  const auto axis = default_wigner_axis(4.0, 0.5, 20.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wigner(rho, 20.0, axis, axis));
}
BENCHMARK(BM_WignerGrid)->Arg(101)->Unit(benchmark::kMillisecond);

void BM_McwfTrajectories(benchmark::State& state) {
  const HilbertSpace space(60);
  DissipatorSpec d;
  d.motional_dephasing = 10.0;
  d.qubit_dephasing = 100.0;
  d.heating_rate = 3.3;
  const NoiseModel noise = build_dissipators(d, kTwoPi * 980.0, 15.4, space);
  const RampProtocol p{15.4, 0.5, 4.0, 10 * kPi};
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mcwf_evolve(QuantumState::vacuum(space), p, noise, static_cast<std::size_t>(state.range(0)), seed++));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McwfTrajectories)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_DenseLindblad(benchmark::State& state) {
  const HilbertSpace space(static_cast<int>(state.range(0)));
  DissipatorSpec d;
  d.motional_dephasing = 0.05;
  d.qubit_dephasing = 0.1;
  d.heating_rate = 0.1;
  d.damping_rate = 0.4;
  const NoiseModel noise = build_dissipators(d, 1.0, 4.0, space);
  const QuantumState psi0 = QuantumState::vacuum(space);
  const Eigen::MatrixXcd rho0 = psi0.amplitudes * psi0.amplitudes.adjoint();
  for (auto _ : state) benchmark::DoNotOptimize(lindblad_dense_evolve(rho0, {4.0, 0.5, 2.0, 10.0}, noise));
}
BENCHMARK(BM_DenseLindblad)->Arg(6)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_VacuumExtraction(benchmark::State& state) {
  Eigen::VectorXd p(6);
  p << 0.7, 0.12, 0.08, 0.05, 0.03, 0.02;
  const double w = kTwoPi * 2.4e3;
  std::vector<double> t(401);
  for (int k = 0; k < 401; ++k) t[k] = 4e-3 * k / 400.0;
  const auto signal = blue_sideband_signal(p, w, t);
  for (auto _ : state) benchmark::DoNotOptimize(extract_vacuum_population(t, signal, w, 6));
}
BENCHMARK(BM_VacuumExtraction)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
