#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vufold/unfold_geometry.hpp"
#include "vufold/wall_model.hpp"

namespace vufold {

// Units are mm, s and kg; forces are reported in N with 1 N taken as
// 1 kg*mm/s^2 so that a = F/m holds without scale factors.
struct DynamicsConfig {
  double dt = 0.005;               // s
  double beta = 0.25;
  double gamma = 0.5;
  int corrector_passes = 3;
  int substeps = 120;              // integrator steps per unfolding iteration
  double pull_gain = 0.05;         // k_u, N/mm
  double pull_force_cap = 0.5;     // F_max, N
  double flatten_gain = 0.03;      // k_f0, N/mm
  int flatten_ramp_iterations = 4;
  int max_iterations = 5000;       // A_max
  double kappa = 0.5;              // mm
  double divergence_factor = 10.0;

  void validate() const;
};

struct SimState {
  std::vector<Vec3> position;      // r^(alpha)
  std::vector<Vec3> velocity;
  std::vector<Vec3> acceleration;
  int iteration = 0;               // alpha
  long long steps = 0;             // integrator steps taken
  std::vector<double> d_history;   // D^(0..alpha)
};

SimState initial_state(const WallModel& model);

struct ForceDiagnostics {
  std::size_t degenerate_springs = 0;
};

// Spring and damper forces; out is overwritten. Springs shorter than 1e-9 mm
// contribute nothing and are counted in diag.
void internal_forces(const WallModel& model, std::span<const Vec3> position,
                     std::span<const Vec3> velocity, std::span<Vec3> out,
                     ForceDiagnostics* diag = nullptr);

// k_f(alpha) = k_f0 * min(alpha / ramp, 1).
double flatten_gain_at(const DynamicsConfig& cfg, int iteration);

// Capped pull toward the destinations on the cut edge plus the flattening
// pull toward the plane on every surface vertex; out is overwritten.
void external_forces(const WallModel& model, std::span<const Vec3> position,
                     const DestinationSet& dest, const UnfoldPlane& plane,
                     const DynamicsConfig& cfg, int iteration, std::span<Vec3> out);

struct NewmarkParams {
  double dt = 0.005;
  double beta = 0.25;
  double gamma = 0.5;
  int corrector_passes = 3;
  bool advance_iteration = true;   // bump SimState::iteration after the step
};

using ForceFunction =
    std::function<void(std::span<const Vec3> position, std::span<const Vec3> velocity,
                       std::span<Vec3> force)>;

// One Newmark-beta step with lumped masses. The corrector iterates
// a = F(r*, v*)/m where each pass weights the vertex's own stiffness and
// damping implicitly (stiffness_diag, damping_diag may be empty for a plain
// fixed-point pass). Throws DivergenceError on non-finite results.
void newmark_step(std::span<const double> mass, std::span<const double> stiffness_diag,
                  std::span<const double> damping_diag, const ForceFunction& force,
                  const NewmarkParams& params, SimState& state);

// Model-level driver bundling the force terms and their implicit diagonals.
class UnfoldSimulation {
 public:
  UnfoldSimulation(const WallModel& model, const DestinationSet& dest, const UnfoldPlane& plane,
                   const DynamicsConfig& cfg);

  void total_force(std::span<const Vec3> position, std::span<const Vec3> velocity, int iteration,
                   std::span<Vec3> out) const;
  void step(SimState& state) const;
  double metric(const SimState& state) const;

 private:
  const WallModel& model_;
  const DestinationSet& dest_;
  const UnfoldPlane& plane_;
  DynamicsConfig cfg_;
  std::vector<double> spring_diag_;
  std::vector<double> damping_diag_;
  std::vector<std::uint8_t> surface_;
  std::vector<std::uint8_t> pulled_;
};

SimState newmark_step(const WallModel& model, const SimState& state, const DestinationSet& dest,
                      const UnfoldPlane& plane, const DynamicsConfig& cfg);

enum class StopReason { kConverged, kMaxIterations, kDiverged };
std::string to_string(StopReason reason);

struct IterationRecord {
  int iteration = 0;
  double d = 0.0;
  double max_force = 0.0;
};

struct UnfoldResult {
  SimState state;
  StopReason reason = StopReason::kMaxIterations;
  std::vector<IterationRecord> log;
  std::string message;
};

// |D^(alpha-1) - D^(alpha)| <= kappa.
bool termination_reached(double previous, double current, double kappa);

// Iterates force evaluation, Newmark step and the D metric from the rest
// configuration until the termination test fires, A_max is reached, or the
// state diverges. When log_out is set, one line `alpha D maxForce` per
// iteration is written to it.
UnfoldResult run_unfold(const WallModel& model, const DestinationSet& dest,
                        const UnfoldPlane& plane, const DynamicsConfig& cfg,
                        std::ostream* log_out = nullptr);

// Kinetic plus spring potential energy.
double mechanical_energy(const WallModel& model, const SimState& state);

}  // namespace vufold
