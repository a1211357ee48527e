#include "sbrl/envs.hpp"

#include <cmath>
#include <cstdio>

#include "sbrl/errors.hpp"
#include "sbrl/sdegen.hpp"

namespace sbrl {

Region Region::box_of(std::vector<Interval> intervals) {
  Region r;
  r.kind = Kind::box;
  r.dim = static_cast<int>(intervals.size());
  for (const Interval& iv : intervals)
    if (!(iv.lo <= iv.hi)) throw ContractError("box interval is empty");
  r.intervals = std::move(intervals);
  return r;
}

Region Region::ball_of(int ambient_dim, std::vector<int> dims, Vec center, double radius) {
  if (radius < 0.0) throw ContractError("ball radius must be nonnegative");
  if (dims.size() != center.size()) throw ContractError("ball dims/center size mismatch");
  Region r;
  r.kind = Kind::ball;
  r.dim = ambient_dim;
  r.ball_dims = std::move(dims);
  r.ball_center = std::move(center);
  r.ball_radius = radius;
  return r;
}

bool contains(const Region& region, const Vec& state) {
  if (static_cast<int>(state.size()) != region.dim)
    throw ContractError("contains: state dimension mismatch");
  if (region.kind == Region::Kind::box) {
    for (int k = 0; k < region.dim; ++k) {
      const Interval& iv = region.intervals[static_cast<std::size_t>(k)];
      const double v = state[static_cast<std::size_t>(k)];
      if (v < iv.lo || v > iv.hi) return false;
    }
    return true;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < region.ball_dims.size(); ++i) {
    const double d = state[static_cast<std::size_t>(region.ball_dims[i])] - region.ball_center[i];
    d2 += d * d;
  }
  return d2 <= region.ball_radius * region.ball_radius;
}

Region minkowski_enlarge(const Region& region, const Vec& delta) {
  if (static_cast<int>(delta.size()) != region.dim)
    throw ContractError("minkowski_enlarge: delta dimension mismatch");
  for (double d : delta)
    if (d < 0.0) throw ContractError("minkowski_enlarge: negative margin");
  Region out = region;
  if (region.kind == Region::Kind::box) {
    for (int k = 0; k < region.dim; ++k) {
      Interval& iv = out.intervals[static_cast<std::size_t>(k)];
      const double d = delta[static_cast<std::size_t>(k)];
      if (std::isfinite(iv.lo)) iv.lo -= d;
      if (std::isfinite(iv.hi)) iv.hi += d;
    }
  } else {
    double d2 = 0.0;
    for (int dim : region.ball_dims) {
      const double d = delta[static_cast<std::size_t>(dim)];
      d2 += d * d;
    }
    out.ball_radius += std::sqrt(d2);
  }
  return out;
}

Vec sample_region(const Region& region, const Region& clip, Rng& rng) {
  if (clip.kind != Region::Kind::box || clip.dim != region.dim)
    throw ContractError("sample_region: clip must be a box of matching dimension");
  auto clipped = [&](int k, Interval iv) {
    const Interval& c = clip.intervals[static_cast<std::size_t>(k)];
    iv.lo = std::max(iv.lo, c.lo);
    iv.hi = std::min(iv.hi, c.hi);
    if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi)))
      throw ContractError("sample_region: unbounded dimension after clipping");
    if (iv.lo > iv.hi) throw ContractError("sample_region: empty after clipping");
    return iv;
  };
  Vec s(static_cast<std::size_t>(region.dim));
  if (region.kind == Region::Kind::box) {
    for (int k = 0; k < region.dim; ++k) {
      const Interval iv = clipped(k, region.intervals[static_cast<std::size_t>(k)]);
      s[static_cast<std::size_t>(k)] = iv.lo == iv.hi ? iv.lo : rng.uniform(iv.lo, iv.hi);
    }
    return s;
  }
  // Ball: rejection sampling inside the bounding box of the ball dimensions,
  // remaining dimensions uniform in the clip box.
  std::vector<bool> in_ball(static_cast<std::size_t>(region.dim), false);
  for (int dim : region.ball_dims) in_ball[static_cast<std::size_t>(dim)] = true;
  for (int k = 0; k < region.dim; ++k) {
    if (in_ball[static_cast<std::size_t>(k)]) continue;
    const Interval iv = clipped(k, Interval{});
    s[static_cast<std::size_t>(k)] = iv.lo == iv.hi ? iv.lo : rng.uniform(iv.lo, iv.hi);
  }
  for (int attempt = 0; attempt < 10000; ++attempt) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < region.ball_dims.size(); ++i) {
      const double v = rng.uniform(-region.ball_radius, region.ball_radius);
      s[static_cast<std::size_t>(region.ball_dims[i])] = region.ball_center[i] + v;
      d2 += v * v;
    }
    if (d2 <= region.ball_radius * region.ball_radius) return s;
  }
  throw ContractError("sample_region: ball rejection sampling failed");
}

double QuadraticCost::operator()(const Vec& s, const Vec& a) const {
  double cost = 0.0;
  for (std::size_t k = 0; k < state_weights.size(); ++k) cost += state_weights[k] * s[k] * s[k];
  for (std::size_t k = 0; k < action_weights.size(); ++k) cost += action_weights[k] * a[k] * a[k];
  return -cost + offset;
}

Vec step_2d(const Vec& s, double a, double dt, double xi) {
  // s1' = s1 + 0.8 s2 dt ; s2' = s2 + (a - 0.3 s1^3) dt + 0.2 sqrt(dt) xi
  return {s[0] + 0.8 * s[1] * dt,
          s[1] + (a - 0.3 * s[0] * s[0] * s[0]) * dt + 0.2 * std::sqrt(dt) * xi};
}

Vec step_cartpole(const Vec& s, double force, double dt, double xi_xdot, double xi_thetadot) {
  constexpr double kGravity = 9.8;
  constexpr double kMassCart = 1.0;
  constexpr double kMassPole = 0.1;
  constexpr double kTotalMass = kMassCart + kMassPole;
  constexpr double kHalfLength = 0.5;
  constexpr double kPoleMassLength = kMassPole * kHalfLength;
  constexpr double kNoiseStd = 0.01;

  const double x = s[0], theta = s[1], x_dot = s[2], theta_dot = s[3];
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  // Semi-implicit Euler: velocities first, then positions from the new
  // velocities; Gaussian noise enters on the velocity states only.
  const double noise = kNoiseStd * std::sqrt(dt);
  const double x_dot2 = x_dot + dt * x_acc + noise * xi_xdot;
  const double theta_dot2 = theta_dot + dt * theta_acc + noise * xi_thetadot;
  return {x + dt * x_dot2, theta + dt * theta_dot2, x_dot2, theta_dot2};
}

EnvSpec make_env(const std::string& name, double dt, int horizon) {
  EnvSpec env;
  env.name = name;
  if (name == "2d") {
    env.state_dim = 2;
    env.action_dim = 1;
    env.dt = dt > 0.0 ? dt : 0.05;
    env.horizon = horizon > 0 ? horizon : 100;
    env.init_region = Region::ball_of(2, {0, 1}, {-2.0, 0.0}, 0.1);
    env.unsafe_region = Region::box_of({{-1.0, 0.0}, {1.2, 1.7}});
    env.state_region = Region::box_of({{-4.0, 4.0}, {-4.0, 4.0}});
    env.action_bound = 5.0;
    env.reward = QuadraticCost{{1.0, 1.0}, {0.1}};
    const double step_dt = env.dt;
    env.step = [step_dt](const Vec& s, const Vec& a, std::span<const double> z) {
      return step_2d(s, a[0], step_dt, z[1]);
    };
  } else if (name == "cartpole") {
    env.state_dim = 4;
    env.action_dim = 1;
    env.dt = dt > 0.0 ? dt : 0.02;
    env.horizon = horizon > 0 ? horizon : 150;
    env.init_region = Region::box_of(
        {{-0.167, 0.033}, {-0.6, -0.5}, {-0.35, -0.35}, {0.53, 0.53}});
    env.unsafe_region =
        Region::box_of({{-kInf, -0.75}, {-kInf, kInf}, {-kInf, kInf}, {-kInf, kInf}});
    env.state_region =
        Region::box_of({{-1.5, 1.0}, {-1.2, 1.2}, {-3.0, 3.0}, {-3.0, 3.0}});
    env.action_bound = 10.0;
    env.reward = QuadraticCost{{1.0, 10.0, 0.1, 0.1}, {0.001}};
    const double step_dt = env.dt;
    env.step = [step_dt](const Vec& s, const Vec& a, std::span<const double> z) {
      return step_cartpole(s, a[0], step_dt, z[2], z[3]);
    };
  } else {
    throw ConfigError("unknown environment '" + name + "'");
  }
  return env;
}

Vec sample_initial(const EnvSpec& env, Rng& rng) {
  return sample_region(env.init_region, env.state_region, rng);
}

Trajectory run_episode(const EnvSpec& env, const Policy& policy, Rng& rng) {
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(env.horizon) + 1);
  Vec s = sample_initial(env, rng);
  Vec z(static_cast<std::size_t>(env.state_dim));
  for (int t = 0; t <= env.horizon; ++t) {
    const Vec a = policy_action(policy, s);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    traj.rewards.push_back(env.reward(s, a));
    if (!traj.unsafe_hit && contains(env.unsafe_region, s)) traj.unsafe_hit = t;
    if (t == env.horizon) break;
    for (double& v : z) v = rng.normal();
    s = env.step(s, a, z);
  }
  return traj;
}

EvalResult evaluate_policy(const EnvSpec& env, const Policy& policy, int episodes,
                           double gamma, Rng& rng) {
  if (episodes < 1) throw ContractError("evaluate_policy: episodes must be >= 1");
  Tensor init = Tensor::zeros({episodes, env.state_dim});
  for (int i = 0; i < episodes; ++i) {
    const Vec s0 = sample_initial(env, rng);
    for (int k = 0; k < env.state_dim; ++k) init.at(i, k) = s0[static_cast<std::size_t>(k)];
  }
  std::vector<bool> hit(static_cast<std::size_t>(episodes), false);
  std::vector<double> returns(static_cast<std::size_t>(episodes), 0.0);
  double discount = 1.0;
  Vec s(static_cast<std::size_t>(env.state_dim));
  Vec a(static_cast<std::size_t>(env.action_dim));
  env_rollout_batch(env, policy, init, env.horizon, rng, [&](int t, const Tensor& states) {
    const Tensor actions = policy_eval(policy, states);
    if (t > 0) discount *= gamma;
    for (int i = 0; i < episodes; ++i) {
      for (int k = 0; k < env.state_dim; ++k) s[static_cast<std::size_t>(k)] = states.at(i, k);
      for (int k = 0; k < env.action_dim; ++k) a[static_cast<std::size_t>(k)] = actions.at(i, k);
      returns[static_cast<std::size_t>(i)] += discount * env.reward(s, a);
      if (!hit[static_cast<std::size_t>(i)] && contains(env.unsafe_region, s))
        hit[static_cast<std::size_t>(i)] = true;
    }
  });
  EvalResult result;
  result.episodes = episodes;
  int unsafe = 0;
  for (bool h : hit) unsafe += h ? 1 : 0;
  result.safe_rate = 1.0 - static_cast<double>(unsafe) / episodes;
  for (double r : returns) result.mean_return += r / episodes;
  return result;
}

double empirical_safe_rate(const EnvSpec& env, const Policy& policy, int episodes, Rng& rng) {
  return evaluate_policy(env, policy, episodes, 1.0, rng).safe_rate;
}

void env_rollout_batch(const EnvSpec& env, const Policy& policy, const Tensor& init_states,
                       int horizon, Rng& rng,
                       const std::function<void(int, const Tensor&)>& visit) {
  const int batch = init_states.rows(), n = env.state_dim;
  if (init_states.cols() != n) throw ShapeError("env_rollout_batch: state width mismatch");
  Tensor states = init_states;
  visit(0, states);
  Vec s(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n));
  for (int t = 0; t < horizon; ++t) {
    const Tensor actions = policy_eval(policy, states);
    Tensor next = Tensor::zeros({batch, n});
    for (int i = 0; i < batch; ++i) {
      for (int k = 0; k < n; ++k) s[static_cast<std::size_t>(k)] = states.at(i, k);
      Vec a(static_cast<std::size_t>(env.action_dim));
      for (int k = 0; k < env.action_dim; ++k) a[static_cast<std::size_t>(k)] = actions.at(i, k);
      for (double& v : z) v = rng.normal();
      const Vec sn = env.step(s, a, z);
      for (int k = 0; k < n; ++k) next.at(i, k) = sn[static_cast<std::size_t>(k)];
    }
    states = std::move(next);
    visit(t + 1, states);
  }
}

Vec max_state_gap(const std::vector<Trajectory>& real,
                  const std::vector<SyntheticTrajectory>& synthetic) {
  if (real.empty() || real.size() != synthetic.size())
    throw ContractError("max_state_gap: trajectory lists must be nonempty and paired");
  const std::size_t n = real.front().states.front().size();
  Vec gap(n, 0.0);
  for (std::size_t p = 0; p < real.size(); ++p) {
    const auto& rs = real[p].states;
    const auto& ss = synthetic[p].states;
    if (rs.size() != ss.size()) throw ContractError("max_state_gap: length mismatch");
    for (std::size_t t = 0; t < rs.size(); ++t)
      for (std::size_t k = 0; k < n; ++k)
        gap[k] = std::max(gap[k], std::fabs(rs[t][k] - ss[t][k]));
  }
  return gap;
}

std::string trajectory_csv(const EnvSpec& env, const Trajectory& traj) {
  std::string out = "t";
  for (int k = 0; k < env.state_dim; ++k) out += ",s" + std::to_string(k);
  for (int k = 0; k < env.action_dim; ++k) out += ",a" + std::to_string(k);
  out += ",reward,unsafe\n";
  char buf[64];
  for (int t = 0; t < traj.length(); ++t) {
    out += std::to_string(t);
    const std::size_t ti = static_cast<std::size_t>(t);
    for (double v : traj.states[ti]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    for (double v : traj.actions[ti]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g", traj.rewards[ti]);
    out += buf;
    out += contains(env.unsafe_region, traj.states[ti]) ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace sbrl
