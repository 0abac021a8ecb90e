#ifndef TRAJEMBED_TRAJECTORY_HPP
#define TRAJEMBED_TRAJECTORY_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "trajembed/event_log.hpp"
#include "trajembed/lindblad.hpp"
#include "trajembed/rng.hpp"
#include "trajembed/types.hpp"

namespace trajembed {

// Non-unitary no-jump propagator exp(-i H_eff t), cached through one
// eigendecomposition; falls back to a dense exponential per call when the
// eigenbasis is ill conditioned.
class Propagator {
 public:
  explicit Propagator(const Lindblad& lb);

  int dim() const { return dim_; }

  // Unnormalized evolved vector.
  Vector apply(const Vector& psi, double t) const;

  // Survival probability |exp(-i H_eff t) psi|^2 for unit psi.
  double survival(const Vector& psi, double t) const;

  // Normalized evolved vector; survival_out receives the norm square of the
  // unnormalized result (zero when it underflows).
  Vector apply_normalized(const Vector& psi, double t,
                          double* survival_out = nullptr) const;

  // Slowest decay rate scale of the generator, for bracketing heuristics.
  double rate_scale() const { return rate_scale_; }

 private:
  int dim_ = 0;
  bool spectral_ = false;
  Matrix v_, v_inv_;
  Vector eigs_;  // of -i H_eff
  Matrix h_eff_;
  double rate_scale_ = 1.0;
};

struct JumpTimeOptions {
  double time_tol = 1e-10;    // absolute tolerance on the inverted time
  double horizon_cap = 1e12;  // bracketing gives up beyond this time
};

// Inverts survival(psi, t) = r for r drawn uniform on (0, 1]. Throws
// HorizonExceededError when the survival plateaus above r (a dark subspace).
double sample_jump_time(const Propagator& prop, const Vector& psi, double r,
                        const JumpTimeOptions& opts = {});

// Channel selection at a jump: weights |J_x psi|^2. Returns the symbol index
// and the normalized post-jump state. Throws DeadStateError when every
// channel weight vanishes.
std::pair<int, Vector> select_jump(const Lindblad& lb, const Vector& psi,
                                   RngStream& rng);

// Recorded pure-state trajectory: the state just before and just after each
// jump, preceded by the initial state (empty symbol).
struct PathPoint {
  double t = 0.0;
  std::string symbol;
  Vector psi_pre;
  Vector psi_post;
};

struct StatePath {
  std::vector<PathPoint> points;
};

// Bloch vector (x, y, z) of a two-dimensional pure state.
std::array<double, 3> bloch_vector(const Vector& psi);

void write_state_path_csv(const StatePath& path, std::ostream& out);

// Stop after `n_events` jumps or at absolute time `t_total`, whichever is
// configured (exactly one must be).
struct StopRule {
  std::int64_t n_events = 0;
  double t_total = 0.0;
};

struct TrajectoryResult {
  EventLog log;          // wait-time records, t relative to the previous jump
  StatePath path;        // filled when opts.record_path
  Vector final_state;
  double final_time = 0.0;
  bool truncated = false;  // a dark subspace cut the trajectory short
};

struct TrajectoryOptions {
  bool record_path = false;
  JumpTimeOptions jump;
};

TrajectoryResult run_trajectory(const Lindblad& lb, const Propagator& prop,
                                const Vector& psi0, RngStream& rng,
                                const StopRule& stop,
                                const TrajectoryOptions& opts = {});

// Initial state for trajectory i of an ensemble: drawn from the model start
// ensemble when present, first basis vector otherwise.
Vector draw_start_state(const Lindblad& lb, RngStream& rng);

// Mean projector over `n_traj` trajectories evolved to time t, each seeded
// with RngStream::child(seed, i). Reduction order is fixed, so the result is
// identical for any thread count. `threads` <= 0 picks a default.
Matrix ensemble_density(const Lindblad& lb, double t, int n_traj,
                        std::uint64_t seed, int threads = 0);

// Deterministic master-equation evolution by fixed-step fourth-order
// Runge-Kutta; requires dt * |H_eff| < 0.05.
Matrix master_equation_evolve(const Lindblad& lb, const Matrix& rho0, double t,
                              double dt);

// Trace distance between density matrices.
double trace_distance(const Matrix& a, const Matrix& b);

}  // namespace trajembed

#endif
