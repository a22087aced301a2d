#include "vufold/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace vufold {

void DynamicsConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(beta >= 0.0 && beta <= 0.5)) throw ConfigError("beta must lie in [0, 1/2]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (corrector_passes < 1) throw ConfigError("corrector_passes must be at least 1");
  if (substeps < 1) throw ConfigError("substeps must be at least 1");
  if (!(pull_gain >= 0.0) || !(pull_force_cap > 0.0)) {
    throw ConfigError("pull_gain must be non-negative and pull_force_cap positive");
  }
  if (!(flatten_gain >= 0.0)) throw ConfigError("flatten_gain must be non-negative");
  if (flatten_ramp_iterations < 1) throw ConfigError("flatten_ramp_iterations must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be positive");
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must exceed 1");
}

SimState initial_state(const WallModel& model) {
  SimState s;
  s.position = model.rest;
  s.velocity.assign(model.vertex_count(), Vec3::Zero());
  s.acceleration.assign(model.vertex_count(), Vec3::Zero());
  return s;
}

void internal_forces(const WallModel& model, std::span<const Vec3> position,
                     std::span<const Vec3> velocity, std::span<Vec3> out,
                     ForceDiagnostics* diag) {
  std::fill(out.begin(), out.end(), Vec3::Zero());
  for (const Spring& s : model.springs) {
    const Vec3 l = position[s.a] - position[s.b];
    const double len = l.norm();
    if (len < 1e-9) {
      if (diag) ++diag->degenerate_springs;
      continue;
    }
    const Vec3 dir = l / len;
    const double elastic = -s.stiffness * (len - s.rest_length);
    const double viscous = -s.damping * (velocity[s.a] - velocity[s.b]).dot(dir);
    const Vec3 f = (elastic + viscous) * dir;
    out[s.a] += f;
    out[s.b] -= f;
  }
}

double flatten_gain_at(const DynamicsConfig& cfg, int iteration) {
  const double ramp = std::min(static_cast<double>(iteration) / cfg.flatten_ramp_iterations, 1.0);
  return cfg.flatten_gain * std::max(ramp, 0.0);
}

void external_forces(const WallModel& model, std::span<const Vec3> position,
                     const DestinationSet& dest, const UnfoldPlane& plane,
                     const DynamicsConfig& cfg, int iteration, std::span<Vec3> out) {
  std::fill(out.begin(), out.end(), Vec3::Zero());
  for (const auto& e : dest.entries) {
    Vec3 f = cfg.pull_gain * (e.target - position[e.vertex]);
    const double mag = f.norm();
    if (mag > cfg.pull_force_cap) f *= cfg.pull_force_cap / mag;
    out[e.vertex] += f;
  }
  const double kf = flatten_gain_at(cfg, iteration);
  if (kf == 0.0) return;
  auto flatten = [&](int v, std::vector<std::uint8_t>& seen) {
    if (seen[v]) return;
    seen[v] = 1;
    out[v] -= kf * plane.signed_distance(position[v]) * plane.normal;
  };
  std::vector<std::uint8_t> seen(model.vertex_count(), 0);
  for (int v : model.sets.outer) flatten(v, seen);
  for (int v : model.sets.inner) flatten(v, seen);
}

void newmark_step(std::span<const double> mass, std::span<const double> stiffness_diag,
                  std::span<const double> damping_diag, const ForceFunction& force,
                  const NewmarkParams& p, SimState& state) {
  const std::size_t n = mass.size();
  const double dt = p.dt;
  const double dt2 = dt * dt;
  std::vector<Vec3> r_pred(n), v_pred(n), r_hat(n), v_hat(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    r_pred[i] = state.position[i] + dt * state.velocity[i] + dt2 * (0.5 - p.beta) * state.acceleration[i];
    v_pred[i] = state.velocity[i] + dt * (1.0 - p.gamma) * state.acceleration[i];
  }
  std::vector<Vec3> a_new = state.acceleration;
  std::vector<double> implicit(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = stiffness_diag.empty() ? 0.0 : stiffness_diag[i];
    const double c = damping_diag.empty() ? 0.0 : damping_diag[i];
    implicit[i] = p.beta * dt2 * k + p.gamma * dt * c;
  }
  for (int pass = 0; pass < p.corrector_passes; ++pass) {
    for (std::size_t i = 0; i < n; ++i) {
      r_hat[i] = r_pred[i] + dt2 * p.beta * a_new[i];
      v_hat[i] = v_pred[i] + dt * p.gamma * a_new[i];
    }
    force(r_hat, v_hat, f);
    for (std::size_t i = 0; i < n; ++i) {
      a_new[i] = (f[i] + implicit[i] * a_new[i]) / (mass[i] + implicit[i]);
    }
  }
  const int next = state.iteration + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 r = r_pred[i] + dt2 * p.beta * a_new[i];
    const Vec3 v = v_pred[i] + dt * p.gamma * a_new[i];
    if (!r.allFinite() || !v.allFinite()) {
      throw DivergenceError("divergence at iteration " + std::to_string(next) + ", vertex " +
                                std::to_string(i),
                            next, static_cast<int>(i));
    }
    state.position[i] = r;
    state.velocity[i] = v;
    state.acceleration[i] = a_new[i];
  }
  ++state.steps;
  if (p.advance_iteration) state.iteration = next;
}

UnfoldSimulation::UnfoldSimulation(const WallModel& model, const DestinationSet& dest,
                                   const UnfoldPlane& plane, const DynamicsConfig& cfg)
    : model_(model), dest_(dest), plane_(plane), cfg_(cfg) {
  cfg_.validate();
  const std::size_t n = model.vertex_count();
  spring_diag_.assign(n, 0.0);
  damping_diag_.assign(n, 0.0);
  for (const Spring& s : model.springs) {
    spring_diag_[s.a] += s.stiffness;
    spring_diag_[s.b] += s.stiffness;
    damping_diag_[s.a] += s.damping;
    damping_diag_[s.b] += s.damping;
  }
  surface_.assign(n, 0);
  for (int v : model.sets.outer) surface_[v] = 1;
  for (int v : model.sets.inner) surface_[v] = 1;
  pulled_.assign(n, 0);
  for (const auto& e : dest.entries) pulled_[e.vertex] = 1;
}

void UnfoldSimulation::total_force(std::span<const Vec3> position, std::span<const Vec3> velocity,
                                   int iteration, std::span<Vec3> out) const {
  internal_forces(model_, position, velocity, out);
  std::vector<Vec3> ext(out.size());
  external_forces(model_, position, dest_, plane_, cfg_, iteration, ext);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += ext[i];
  }
}

void UnfoldSimulation::step(SimState& state) const {
  const int iteration = state.iteration;
  const double kf = flatten_gain_at(cfg_, iteration);
  std::vector<double> k_diag(spring_diag_);
  for (std::size_t i = 0; i < k_diag.size(); ++i) {
    if (surface_[i]) k_diag[i] += kf;
    if (pulled_[i]) k_diag[i] += cfg_.pull_gain;
  }
  NewmarkParams p{cfg_.dt, cfg_.beta, cfg_.gamma, cfg_.corrector_passes};
  p.advance_iteration = false;
  for (int s = 0; s < cfg_.substeps; ++s) {
    newmark_step(
        model_.mass, k_diag, damping_diag_,
        [&](std::span<const Vec3> r, std::span<const Vec3> v, std::span<Vec3> f) {
          total_force(r, v, iteration, f);
        },
        p, state);
  }
  state.iteration = iteration + 1;
}

double UnfoldSimulation::metric(const SimState& state) const {
  return unfold_metric(state.position, dest_);
}

SimState newmark_step(const WallModel& model, const SimState& state, const DestinationSet& dest,
                      const UnfoldPlane& plane, const DynamicsConfig& cfg) {
  const UnfoldSimulation sim(model, dest, plane, cfg);
  SimState next = state;
  sim.step(next);
  if (!dest.entries.empty()) next.d_history.push_back(sim.metric(next));
  return next;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kConverged:
      return "converged";
    case StopReason::kMaxIterations:
      return "max-iterations";
    case StopReason::kDiverged:
      return "diverged";
  }
  return "unknown";
}

bool termination_reached(double previous, double current, double kappa) {
  return std::abs(previous - current) <= kappa;
}

UnfoldResult run_unfold(const WallModel& model, const DestinationSet& dest,
                        const UnfoldPlane& plane, const DynamicsConfig& cfg,
                        std::ostream* log_out) {
  cfg.validate();
  const UnfoldSimulation sim(model, dest, plane, cfg);
  UnfoldResult result;
  result.state = initial_state(model);
  SimState& state = result.state;

  auto record = [&](double d) {
    double max_force = 0.0;
    for (std::size_t i = 0; i < model.vertex_count(); ++i) {
      max_force = std::max(max_force, model.mass[i] * state.acceleration[i].norm());
    }
    state.d_history.push_back(d);
    result.log.push_back({state.iteration, d, max_force});
    if (log_out) {
      *log_out << state.iteration << ' ' << d << ' ' << max_force << '\n';
    }
  };

  const double d0 = sim.metric(state);
  record(d0);
  const double guard = cfg.divergence_factor * std::max(d0, 1e-9);
  while (state.iteration < cfg.max_iterations) {
    try {
      sim.step(state);
    } catch (const DivergenceError& e) {
      result.reason = StopReason::kDiverged;
      result.message = e.what();
      return result;
    }
    const double d = sim.metric(state);
    record(d);
    if (!std::isfinite(d) || d > guard) {
      result.reason = StopReason::kDiverged;
      result.message = "D exceeded " + std::to_string(cfg.divergence_factor) + " x D^(0)";
      return result;
    }
    const auto& h = state.d_history;
    if (termination_reached(h[h.size() - 2], h.back(), cfg.kappa)) {
      result.reason = StopReason::kConverged;
      return result;
    }
  }
  result.reason = StopReason::kMaxIterations;
  return result;
}

double mechanical_energy(const WallModel& model, const SimState& state) {
  double e = 0.0;
  for (std::size_t i = 0; i < model.vertex_count(); ++i) {
    e += 0.5 * model.mass[i] * state.velocity[i].squaredNorm();
  }
  for (const Spring& s : model.springs) {
    const double stretch = (state.position[s.a] - state.position[s.b]).norm() - s.rest_length;
    e += 0.5 * s.stiffness * stretch * stretch;
  }
  return e;
}

}  // namespace vufold
