#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbrl/nn.hpp"
#include "sbrl/rng.hpp"
#include "sbrl/tensor.hpp"

namespace sbrl {

using Vec = std::vector<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

// Geometric set descriptor for S, S0, Su: an axis-aligned box (unconstrained
// dimensions allowed) or a ball over a subset of dimensions. Membership uses
// closed boundaries.
struct Region {
  enum class Kind { box, ball };
  Kind kind = Kind::box;
  int dim = 0;

  std::vector<Interval> intervals;  // box

  std::vector<int> ball_dims;       // ball
  Vec ball_center;
  double ball_radius = 0.0;

  static Region box_of(std::vector<Interval> intervals);
  static Region ball_of(int ambient_dim, std::vector<int> dims, Vec center, double radius);
};

bool contains(const Region& region, const Vec& state);

// Widen a region by a nonnegative per-dimension margin: box intervals grow by
// +-delta_k, a ball radius grows by the Euclidean norm of delta restricted to
// its dimensions.
Region minkowski_enlarge(const Region& region, const Vec& delta);

// Uniform sample. Unbounded box dimensions are clipped to `clip` (the
// enclosing state region); balls use rejection sampling, with non-ball
// dimensions drawn from `clip`.
Vec sample_region(const Region& region, const Region& clip, Rng& rng);

// r(s, a) = offset - (sum_k sw_k s_k^2 + sum_k aw_k a_k^2)
struct QuadraticCost {
  Vec state_weights;
  Vec action_weights;
  double offset = 0.0;
  double operator()(const Vec& s, const Vec& a) const;
};

// One episode from the real plant: states s(0..T), actions a(0..T), rewards
// r(0..T), and the first time index inside the unsafe region, if any.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<double> rewards;
  std::optional<int> unsafe_hit;
  int length() const { return static_cast<int>(states.size()); }
};

// Simulated plant. `step` advances one tick; `noise` carries state_dim i.i.d.
// standard normals per tick of which each environment consumes its own
// subset, so a synthetic rollout can be driven by the same draws.
struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  double dt = 0.0;
  int horizon = 0;
  Region init_region;
  Region unsafe_region;
  Region state_region;
  double action_bound = 1.0;
  QuadraticCost reward;
  std::function<Vec(const Vec& s, const Vec& a, std::span<const double> noise)> step;
};

// Registered environments: "2d" and "cartpole". Throws ConfigError on an
// unknown name. dt/horizon <= 0 select the environment defaults.
EnvSpec make_env(const std::string& name, double dt = 0.0, int horizon = 0);

// Dynamics cores with explicit noise, exposed for tests.
Vec step_2d(const Vec& s, double a, double dt, double xi);
Vec step_cartpole(const Vec& s, double force, double dt, double xi_xdot, double xi_thetadot);

Vec sample_initial(const EnvSpec& env, Rng& rng);

Trajectory run_episode(const EnvSpec& env, const Policy& policy, Rng& rng);

// Fraction of episodes whose states never enter the unsafe region over the
// full horizon.
double empirical_safe_rate(const EnvSpec& env, const Policy& policy, int episodes, Rng& rng);

struct EvalResult {
  double safe_rate = 0.0;
  double mean_return = 0.0;  // mean discounted return across episodes
  int episodes = 0;
};

EvalResult evaluate_policy(const EnvSpec& env, const Policy& policy, int episodes,
                           double gamma, Rng& rng);

// Batched plant rollout: visit(t, states [B,n]) is called for t = 0..horizon.
void env_rollout_batch(const EnvSpec& env, const Policy& policy, const Tensor& init_states,
                       int horizon, Rng& rng,
                       const std::function<void(int, const Tensor&)>& visit);

struct SyntheticTrajectory;

// Componentwise gap Delta_k = max over pairs and t of |s_k(t) - shat_k(t)|.
// Pairs must share initial states (and noise stream, where applicable).
Vec max_state_gap(const std::vector<Trajectory>& real,
                  const std::vector<SyntheticTrajectory>& synthetic);

// Trajectory CSV row format: t, state..., action..., reward, unsafe flag.
std::string trajectory_csv(const EnvSpec& env, const Trajectory& traj);

}  // namespace sbrl
