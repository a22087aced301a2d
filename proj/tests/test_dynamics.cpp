#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vufold/dynamics.hpp"

using namespace vufold;

namespace {

// Two vertices joined by one spring.
WallModel spring_pair(double k, double rest_length, double damping = 0.0) {
  WallModel m;
  m.rest = {Vec3(0, 0, 0), Vec3(rest_length, 0, 0)};
  m.mass = {1.0, 1.0};
  m.springs.push_back({0, 1, rest_length, k, damping, SpringKind::kEdge});
  return m;
}

struct Oscillation {
  double amplitude_error;
  double phase_error;
};

// Unit mass on a unit spring to a fixed anchor, x(0) = 1, v(0) = 0.
Oscillation oscillate(int steps, double dt) {
  const std::vector<double> mass{1.0};
  const std::vector<double> none;
  SimState s;
  s.position = {Vec3(1, 0, 0)};
  s.velocity = {Vec3::Zero()};
  s.acceleration = {Vec3(-1, 0, 0)};
  const ForceFunction spring = [](std::span<const Vec3> r, std::span<const Vec3>, std::span<Vec3> f) {
    f[0] = -1.0 * r[0];
  };
  const NewmarkParams p{dt, 0.25, 0.5, 3};
  for (int i = 0; i < steps; ++i) newmark_step(mass, none, none, spring, p, s);
  const double t = steps * dt;
  const double x = s.position[0].x(), v = s.velocity[0].x();
  const double amplitude = std::hypot(x, v);
  // Phase of (x, v) = (cos t, -sin t), wrapped to (-pi, pi].
  const double phase = std::remainder(std::atan2(-v, x) - t, 2.0 * std::numbers::pi);
  return {std::abs(amplitude - 1.0), std::abs(phase)};
}

// Index of the first D at which the termination test fires, or -1.
int stop_index(const std::vector<double>& history, double kappa) {
  for (std::size_t a = 1; a < history.size(); ++a) {
    if (termination_reached(history[a - 1], history[a], kappa)) return static_cast<int>(a);
  }
  return -1;
}

}  // namespace

TEST_CASE("single spring obeys Hooke's law") {
  WallModel m = spring_pair(2.0, 1.0);
  const std::vector<Vec3> r{Vec3(0, 0, 0), Vec3(1.5, 0, 0)};
  const std::vector<Vec3> v(2, Vec3::Zero());
  std::vector<Vec3> f(2);
  internal_forces(m, r, v, f);
  CHECK(f[0].x() == doctest::Approx(1.0));  // pulled toward the other end
  CHECK(f[1].x() == doctest::Approx(-1.0));
  CHECK(f[0].y() == 0.0);

  internal_forces(m, m.rest, v, f);
  CHECK(f[0] == Vec3::Zero());
  CHECK(f[1] == Vec3::Zero());
}

TEST_CASE("damper opposes the relative velocity along the spring") {
  WallModel m = spring_pair(2.0, 1.0, 0.5);
  const std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(2, 7, 0)};
  std::vector<Vec3> f(2);
  internal_forces(m, m.rest, v, f);
  CHECK(f[1].x() == doctest::Approx(-1.0));
  CHECK(f[1].y() == 0.0);
}

TEST_CASE("coincident spring endpoints contribute nothing and are flagged") {
  WallModel m = spring_pair(2.0, 1.0);
  const std::vector<Vec3> r{Vec3(3, 3, 3), Vec3(3, 3, 3)};
  const std::vector<Vec3> v(2, Vec3::Zero());
  std::vector<Vec3> f(2, Vec3::Ones());
  ForceDiagnostics diag;
  internal_forces(m, r, v, f, &diag);
  CHECK(f[0] == Vec3::Zero());
  CHECK(diag.degenerate_springs == 1);
}

TEST_CASE("external forces") {
  WallModel m;
  m.rest = {Vec3(0, 0, 0), Vec3(0, 0, 4), Vec3(100, 0, 0)};
  m.mass = {1, 1, 1};
  m.sets.outer = {0, 1};
  m.sets.inner = {1, 2};
  DestinationSet dest;
  dest.entries.push_back({.vertex = 0, .target = Vec3(0, 0, 0)});
  dest.entries.push_back({.vertex = 2, .target = Vec3(0, 0, 0)});
  UnfoldPlane plane;  // z = 0
  DynamicsConfig cfg;
  std::vector<Vec3> f(3);

  external_forces(m, m.rest, dest, plane, cfg, 0, f);
  CHECK(f[0] == Vec3::Zero());  // at its destination, on the plane
  CHECK(f[1] == Vec3::Zero());  // alpha = 0: no flattening yet
  CHECK(f[2].norm() == doctest::Approx(cfg.pull_force_cap));
  CHECK(f[2].x() < 0.0);

  const int full = cfg.flatten_ramp_iterations;
  external_forces(m, m.rest, dest, plane, cfg, full, f);
  CHECK(f[0] == Vec3::Zero());
  CHECK(f[1].z() == doctest::Approx(-cfg.flatten_gain * 4.0));  // counted once
  CHECK(f[2].z() == 0.0);  // on the plane

  CHECK(flatten_gain_at(cfg, 0) == 0.0);
  CHECK(flatten_gain_at(cfg, full / 2) == doctest::Approx(cfg.flatten_gain * (full / 2) / full));
  CHECK(flatten_gain_at(cfg, 10 * full) == cfg.flatten_gain);
}

TEST_CASE("pull force is proportional below the cap") {
  WallModel m;
  m.rest = {Vec3(0, 0, 0)};
  m.mass = {1};
  DestinationSet dest;
  dest.entries.push_back({.vertex = 0, .target = Vec3(2, 0, 0)});
  DynamicsConfig cfg;
  std::vector<Vec3> f(1);
  external_forces(m, m.rest, dest, UnfoldPlane{}, cfg, 0, f);
  CHECK(f[0].x() == doctest::Approx(cfg.pull_gain * 2.0));
}

TEST_CASE("harmonic oscillator over one period") {
  const Oscillation o = oscillate(628, 0.01);
  CHECK(o.amplitude_error <= 1e-3);
  CHECK(o.phase_error <= 1e-3);
}

TEST_CASE("harmonic oscillator over ten periods") {
  const int steps = static_cast<int>(std::lround(20.0 * std::numbers::pi / 0.01));
  const Oscillation o = oscillate(steps, 0.01);
  CHECK(o.amplitude_error <= 1e-3);
  CHECK(o.phase_error <= 1e-3);
}

TEST_CASE("force-free motion is uniform") {
  const std::vector<double> mass{2.0, 3.0};
  const std::vector<double> none;
  const ForceFunction zero = [](auto, auto, std::span<Vec3> f) {
    for (Vec3& x : f) x.setZero();
  };
  SimState s;
  s.position = {Vec3(1, 2, 3), Vec3(0, 0, 0)};
  s.velocity = {Vec3(0.5, -1, 2), Vec3(3, 0, 0)};
  s.acceleration = {Vec3::Zero(), Vec3::Zero()};
  const auto r0 = s.position;
  const NewmarkParams p{0.01, 0.25, 0.5, 3};
  for (int a = 1; a <= 100; ++a) {
    newmark_step(mass, none, none, zero, p, s);
    CHECK(s.iteration == a);
    for (int i = 0; i < 2; ++i) {
      CHECK((s.position[i] - (r0[i] + a * 0.01 * s.velocity[i])).norm() <= 1e-12);
    }
  }
}

TEST_CASE("beta = gamma = 0 is the explicit predictor") {
  const std::vector<double> mass{1.0};
  const std::vector<double> none;
  const ForceFunction pull = [](std::span<const Vec3> r, auto, std::span<Vec3> f) {
    f[0] = -3.0 * r[0];
  };
  SimState s;
  s.position = {Vec3(1, 0, 0)};
  s.velocity = {Vec3(0, 2, 0)};
  s.acceleration = {Vec3(0, 0, 5)};
  const double dt = 0.1;
  const Vec3 r = s.position[0] + dt * s.velocity[0] + 0.5 * dt * dt * s.acceleration[0];
  const Vec3 v = s.velocity[0] + dt * s.acceleration[0];
  newmark_step(mass, none, none, pull, NewmarkParams{dt, 0.0, 0.0, 3}, s);
  CHECK((s.position[0] - r).norm() <= 1e-15);
  CHECK((s.velocity[0] - v).norm() <= 1e-15);
}

TEST_CASE("non-finite state raises divergence") {
  const std::vector<double> mass{1.0};
  const std::vector<double> none;
  const ForceFunction blow = [](auto, auto, std::span<Vec3> f) {
    f[0] = Vec3(std::numeric_limits<double>::infinity(), 0, 0);
  };
  SimState s;
  s.position = s.velocity = s.acceleration = {Vec3::Zero()};
  s.iteration = 4;
  try {
    newmark_step(mass, none, none, blow, NewmarkParams{}, s);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == 5);
    CHECK(e.vertex() == 0);
    CHECK(std::string(e.what()).find("divergence") != std::string::npos);
  }
}

TEST_CASE("termination test on a D history") {
  CHECK(stop_index({10.0, 9.4, 9.0}, 0.5) == 2);
  CHECK_FALSE(termination_reached(10.0, 9.4, 0.5));
  CHECK(termination_reached(9.4, 9.0, 0.5));
  CHECK(termination_reached(9.0, 9.5, 0.5));
  CHECK(stop_index({10.0, 8.0, 6.0}, 0.5) == -1);
}

TEST_CASE("defaults and validation") {
  DynamicsConfig cfg;
  CHECK(cfg.kappa == 0.5);
  CHECK(cfg.beta == 0.25);
  CHECK(cfg.gamma == 0.5);
  CHECK(cfg.dt == 0.005);
  CHECK(cfg.corrector_passes == 3);
  CHECK(cfg.max_iterations == 5000);
  CHECK_NOTHROW(cfg.validate());
  for (auto mutate : std::vector<std::function<void(DynamicsConfig&)>>{
           [](auto& c) { c.kappa = 0.0; }, [](auto& c) { c.dt = -1.0; },
           [](auto& c) { c.beta = 0.7; }, [](auto& c) { c.substeps = 0; },
           [](auto& c) { c.max_iterations = 0; }, [](auto& c) { c.divergence_factor = 1.0; }}) {
    DynamicsConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("internal forces conserve momentum on random models") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const WallModel m = test::random_model(rng);
    std::vector<Vec3> r = m.rest, v(m.vertex_count()), f(m.vertex_count());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] += Vec3(u(rng), u(rng), u(rng));
      v[i] = 10.0 * Vec3(u(rng), u(rng), u(rng));
    }
    internal_forces(m, r, v, f);
    Vec3 total = Vec3::Zero();
    for (const Vec3& x : f) total += x;
    CHECK(total.norm() <= 1e-9);
  }
}

TEST_CASE("dampers never add energy") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const WallModel m = test::random_model(rng);
    SimState s = initial_state(m);
    const double reach = 0.2 * m.cell_size.minCoeff();
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      s.position[i] += reach * Vec3(u(rng), u(rng), u(rng));
      s.velocity[i] = Vec3(u(rng), u(rng), u(rng));
    }
    std::vector<double> kd(m.vertex_count(), 0.0), cd(m.vertex_count(), 0.0);
    for (const auto& sp : m.springs) {
      kd[sp.a] += sp.stiffness;
      kd[sp.b] += sp.stiffness;
      cd[sp.a] += sp.damping;
      cd[sp.b] += sp.damping;
    }
    const ForceFunction f = [&](std::span<const Vec3> r, std::span<const Vec3> v, std::span<Vec3> out) {
      internal_forces(m, r, v, out);
    };
    double e = mechanical_energy(m, s);
    for (int step = 0; step < 200; ++step) {
      newmark_step(m.mass, kd, cd, f, NewmarkParams{}, s);
      const double next = mechanical_energy(m, s);
      REQUIRE(next <= e * (1.0 + 1e-6));
      e = next;
    }
  }
}

TEST_CASE("unfolding the straight tube converges") {
  const auto& r = test::straight_run().unfold;
  CHECK(r.reason == StopReason::kConverged);
  CHECK(r.state.iteration < DynamicsConfig{}.max_iterations);
  CHECK(r.state.d_history.back() < r.state.d_history.front());
  CHECK(r.state.d_history.size() == static_cast<std::size_t>(r.state.iteration) + 1);
  CHECK(r.log.size() == r.state.d_history.size());
  CHECK(r.state.steps == static_cast<long long>(r.state.iteration) * DynamicsConfig{}.substeps);
  const auto& h = r.state.d_history;
  CHECK(stop_index(h, DynamicsConfig{}.kappa) == static_cast<int>(h.size()) - 1);
}

TEST_CASE("unfolding is deterministic") {
  const auto& pm = test::straight_model();
  DynamicsConfig cfg;
  cfg.max_iterations = 3;
  const auto a = run_unfold(pm.model, pm.geometry.destinations, pm.geometry.plane, cfg);
  const auto b = run_unfold(pm.model, pm.geometry.destinations, pm.geometry.plane, cfg);
  CHECK(a.state.d_history == b.state.d_history);
  CHECK(a.state.position == b.state.position);
}

TEST_CASE("every run ends with one of the three stop reasons") {
  const auto& pm = test::straight_model();
  SUBCASE("max-iterations") {
    DynamicsConfig cfg;
    cfg.max_iterations = 2;
    cfg.kappa = 1e-9;
    const auto r = run_unfold(pm.model, pm.geometry.destinations, pm.geometry.plane, cfg);
    CHECK(r.reason == StopReason::kMaxIterations);
    CHECK(r.state.iteration == 2);
    CHECK(to_string(r.reason) == "max-iterations");
  }
  SUBCASE("diverged") {
    // Negative stiffness makes the lattice blow apart.
    WallModel m = pm.model;
    for (auto& sp : m.springs) sp.stiffness = -sp.stiffness;
    const auto r = run_unfold(m, pm.geometry.destinations, pm.geometry.plane, DynamicsConfig{});
    CHECK(r.reason == StopReason::kDiverged);
    CHECK(to_string(r.reason) == "diverged");
    CHECK_FALSE(r.message.empty());
  }
  SUBCASE("converged") {
    const auto r = run_unfold(pm.model, pm.geometry.destinations, pm.geometry.plane, DynamicsConfig{});
    CHECK(to_string(r.reason) == "converged");
  }
}

TEST_CASE("single-step wrapper appends D") {
  const auto& pm = test::straight_model();
  DynamicsConfig cfg;
  cfg.substeps = 2;
  SimState s = initial_state(pm.model);
  const SimState next = newmark_step(pm.model, s, pm.geometry.destinations, pm.geometry.plane, cfg);
  CHECK(next.iteration == 1);
  CHECK(next.steps == 2);
  CHECK(next.d_history.size() == 1);
}
