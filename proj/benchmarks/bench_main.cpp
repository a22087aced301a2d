#include <benchmark/benchmark.h>

#include "vufold/dynamics.hpp"
#include "vufold/phantom.hpp"
#include "vufold/pipeline.hpp"

using namespace vufold;

namespace {

struct Fixture {
  Phantom phantom;
  PipelineConfig config;
  PreparedModel prepared;
};

// Default straight tube, prepared once.
const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.phantom = generate_phantom(PhantomSpec{});
    x.config.cardia = x.phantom.truth.cardia;
    x.config.pylorus = x.phantom.truth.pylorus;
    x.prepared = prepare_model(x.config, x.phantom.scalar);
    return x;
  }();
  return f;
}

void BM_InternalForces(benchmark::State& state) {
  const WallModel& m = fixture().prepared.model;
  std::vector<Vec3> r = m.rest, v(m.vertex_count(), Vec3(0.1, 0.2, 0.3)), f(m.vertex_count());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= 1.01;
  for (auto _ : state) {
    internal_forces(m, r, v, f);
    benchmark::DoNotOptimize(f.data());
  }
  state.counters["springs"] = static_cast<double>(m.springs.size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.springs.size()));
}
BENCHMARK(BM_InternalForces);

void BM_NewmarkStep(benchmark::State& state) {
  const WallModel& m = fixture().prepared.model;
  std::vector<double> kd(m.vertex_count(), 0.0), cd(m.vertex_count(), 0.0);
  for (const auto& s : m.springs) {
    kd[s.a] += s.stiffness;
    kd[s.b] += s.stiffness;
    cd[s.a] += s.damping;
    cd[s.b] += s.damping;
  }
  const ForceFunction forces = [&](std::span<const Vec3> r, std::span<const Vec3> v,
                                   std::span<Vec3> out) { internal_forces(m, r, v, out); };
  SimState s = initial_state(m);
  for (Vec3& p : s.position) p *= 1.01;
  for (auto _ : state) {
    newmark_step(m.mass, kd, cd, forces, NewmarkParams{}, s);
    benchmark::DoNotOptimize(s.position.data());
  }
}
BENCHMARK(BM_NewmarkStep);

void BM_Unfold(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto& p = f.prepared;
  for (auto _ : state) {
    auto r = run_unfold(p.model, p.geometry.destinations, p.geometry.plane, f.config.dynamics);
    benchmark::DoNotOptimize(r.state.iteration);
  }
}
BENCHMARK(BM_Unfold)->Unit(benchmark::kMillisecond);

void BM_ResampleIdentity(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto& p = f.prepared;
  const auto& rest = p.model.rest;
  const UnfoldedGrid grid =
      build_unfolded_grid(p.geometry.plane, rest, f.phantom.scalar.spacing(), 0.0);
  for (auto _ : state) {
    auto u = resample_unfolded(f.phantom.scalar, p.model, rest, rest, grid, p.geometry.plane);
    benchmark::DoNotOptimize(u.metrics.masked_voxels);
  }
  state.counters["voxels"] = static_cast<double>(grid.dims.nx) * grid.dims.ny * grid.dims.nz;
}
BENCHMARK(BM_ResampleIdentity)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
