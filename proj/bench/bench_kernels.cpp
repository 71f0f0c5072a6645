// Serial reference against the OpenMP kernels for the shell code.

#include <benchmark/benchmark.h>

#include "cammvp/dynamics.hpp"
#include "cammvp/steady.hpp"

using namespace cammvp;

namespace {

const AnsatzState& state() {
  static const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
  return s;
}

ParticleEnsemble ensemble(std::size_t n) { return sample_from(state(), n, 1); }

ForceField field() {
  ForceField f;
  f.softening = 1e-3 * state().R_supp;
  return f;
}

KernelMode mode_of(const benchmark::State& st) { return st.range(1) ? KernelMode::Parallel : KernelMode::Serial; }

void BM_ShellMass(benchmark::State& st) {
  const ParticleEnsemble e = ensemble(static_cast<std::size_t>(st.range(0)));
  std::vector<double> m;
  for (auto _ : st) {
    if (mode_of(st) == KernelMode::Parallel)
      shell_mass_parallel(e.particles, m);
    else
      shell_mass_serial(e.particles, m);
    benchmark::DoNotOptimize(m.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_Accelerations(benchmark::State& st) {
  ParticleEnsemble e = ensemble(static_cast<std::size_t>(st.range(0)));
  const ForceField f = field();
  for (auto _ : st) {
    accelerations(e, f, mode_of(st), false);
    benchmark::DoNotOptimize(e.accel.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_Step(benchmark::State& st) {
  ParticleEnsemble e = ensemble(static_cast<std::size_t>(st.range(0)));
  const ForceField f = field();
  const double dt = state().dynamical_time() / 2000.0, eps = 1e-6 * state().R_supp;
  accelerations(e, f, mode_of(st), false);
  for (auto _ : st) step(e, dt, f, eps, mode_of(st), Integrator::FreeDrift);
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {10000L, 100000L, 1000000L})
    for (long par : {0L, 1L}) b->Args({n, par});
  b->ArgNames({"N", "parallel"});
}

}  // namespace

BENCHMARK(BM_ShellMass)->Apply(sizes);
BENCHMARK(BM_Accelerations)->Apply(sizes);
BENCHMARK(BM_Step)->Apply(sizes);

BENCHMARK_MAIN();
