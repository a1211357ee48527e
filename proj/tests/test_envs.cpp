#include <doctest.h>

#include <cmath>

#include "sbrl/envs.hpp"
#include "sbrl/errors.hpp"
#include "sbrl/sdegen.hpp"

using namespace sbrl;

TEST_CASE("contains: 2D unsafe box cases") {
  const Region box = Region::box_of({{-1.0, 0.0}, {1.2, 1.7}});
  CHECK(contains(box, {-0.5, 1.5}));
  CHECK_FALSE(contains(box, {-0.5, 1.0}));
  CHECK(contains(box, {0.0, 1.2}));  // closed boundary
  CHECK_THROWS_AS(contains(box, {0.0, 0.0, 0.0}), ContractError);
}

TEST_CASE("contains: ball over a dimension subset") {
  const Region ball = Region::ball_of(3, {0, 1}, {1.0, 1.0}, 0.5);
  CHECK(contains(ball, {1.0, 1.0, 99.0}));
  CHECK(contains(ball, {1.5, 1.0, -3.0}));   // boundary
  CHECK_FALSE(contains(ball, {1.6, 1.0, 0.0}));
}

TEST_CASE("minkowski_enlarge: box interval arithmetic is exact") {
  const Region box = Region::box_of({{-1.0, 0.0}, {1.2, 1.7}});
  const Region out = minkowski_enlarge(box, {0.1, 0.05});
  CHECK(out.intervals[0].lo == -1.0 - 0.1);
  CHECK(out.intervals[0].hi == 0.0 + 0.1);
  CHECK(out.intervals[1].lo == 1.2 - 0.05);
  CHECK(out.intervals[1].hi == 1.7 + 0.05);
}

TEST_CASE("minkowski_enlarge: zero margin is the identity") {
  const Region box = Region::box_of({{-1.0, 0.0}, {1.2, 1.7}});
  const Region out = minkowski_enlarge(box, {0.0, 0.0});
  CHECK(out.intervals[0].lo == -1.0);
  CHECK(out.intervals[0].hi == 0.0);
  CHECK(out.intervals[1].lo == 1.2);
  CHECK(out.intervals[1].hi == 1.7);
}

TEST_CASE("minkowski_enlarge: ball radius grows by the Euclidean norm") {
  const Region ball = Region::ball_of(2, {0, 1}, {0.0, 0.0}, 1.0);
  const Region out = minkowski_enlarge(ball, {0.3, 0.4});
  CHECK(out.ball_radius == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("minkowski_enlarge rejects negative margins") {
  const Region box = Region::box_of({{0.0, 1.0}});
  CHECK_THROWS_AS(minkowski_enlarge(box, {-0.1}), ContractError);
}

TEST_CASE("minkowski/contains consistency on random boxes") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + static_cast<int>(rng.next_u64() % 3);
    std::vector<Interval> intervals;
    Vec delta;
    for (int k = 0; k < dim; ++k) {
      const double lo = rng.uniform(-2, 2);
      intervals.push_back({lo, lo + rng.uniform(0, 2)});
      delta.push_back(rng.uniform(0, 1));
    }
    const Region box = Region::box_of(intervals);
    const Region big = minkowski_enlarge(box, delta);
    // Any point within delta (componentwise) of a member must be a member of
    // the enlargement.
    Vec inside(static_cast<std::size_t>(dim)), shifted(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      const Interval& iv = intervals[static_cast<std::size_t>(k)];
      inside[static_cast<std::size_t>(k)] = rng.uniform(iv.lo, iv.hi);
      shifted[static_cast<std::size_t>(k)] =
          inside[static_cast<std::size_t>(k)] +
          rng.uniform(-delta[static_cast<std::size_t>(k)], delta[static_cast<std::size_t>(k)]);
    }
    REQUIRE(contains(box, inside));
    CHECK(contains(big, shifted));
  }
}

TEST_CASE("2D dynamics: equilibrium and one Euler step") {
  const Vec origin = step_2d({0.0, 0.0}, 0.0, 0.05, 0.0);
  CHECK(origin[0] == 0.0);
  CHECK(origin[1] == 0.0);

  const Vec next = step_2d({1.0, 1.0}, 0.0, 0.1, 0.0);
  CHECK(next[0] == doctest::Approx(1.08));
  CHECK(next[1] == doctest::Approx(0.97));
}

TEST_CASE("2D dynamics: s2 increment variance matches 0.04*dt") {
  const double dt = 0.05;
  Rng rng(12345);
  const int draws = 100000;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Vec next = step_2d({0.0, 0.0}, 0.0, dt, rng.normal());
    const double inc = next[1];
    const double d = inc - mean;
    mean += d / (i + 1);
    m2 += d * (inc - mean);
  }
  const double var = m2 / (draws - 1);
  CHECK(var == doctest::Approx(0.04 * dt).epsilon(0.05));
}

TEST_CASE("cartpole: upright rest is a fixed point") {
  const Vec s = step_cartpole({0.0, 0.0, 0.0, 0.0}, 0.0, 0.02, 0.0, 0.0);
  for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("cartpole: small-angle response matches the linearization") {
  // Linearized about upright: theta_dd = (g*theta - F/M) / (l*(4/3 - mp/M)),
  // x_dd = F/M - mp*l*theta_dd/M, integrated by the same semi-implicit
  // scheme.
  const double g = 9.8, M = 1.1, mp = 0.1, l = 0.5, dt = 0.02;
  const double denom = l * (4.0 / 3.0 - mp / M);
  Vec lin = {0.001, 0.01, -0.002, 0.005};
  Vec full = lin;
  const double force = 0.05;
  for (int t = 0; t < 5; ++t) {
    const double temp = force / M;
    const double theta_acc = (g * lin[1] - temp) / denom;
    const double x_acc = temp - mp * l * theta_acc / M;
    lin[2] += dt * x_acc;
    lin[3] += dt * theta_acc;
    lin[0] += dt * lin[2];
    lin[1] += dt * lin[3];
    full = step_cartpole(full, force, dt, 0.0, 0.0);
  }
  for (int k = 0; k < 4; ++k)
    CHECK(full[static_cast<std::size_t>(k)] ==
          doctest::Approx(lin[static_cast<std::size_t>(k)]).epsilon(0.01));
}

TEST_CASE("cartpole initial samples stay inside the published initial set") {
  const EnvSpec env = make_env("cartpole");
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const Vec s = sample_initial(env, rng);
    CHECK(s[0] >= -0.167);
    CHECK(s[0] <= 0.033);
    CHECK(s[1] >= -0.6);
    CHECK(s[1] <= -0.5);
    CHECK(s[2] == -0.35);
    CHECK(s[3] == 0.53);
  }
}

TEST_CASE("2D initial samples stay inside the ball of radius 0.1 about (-2,0)") {
  const EnvSpec env = make_env("2d");
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vec s = sample_initial(env, rng);
    const double d2 = (s[0] + 2.0) * (s[0] + 2.0) + s[1] * s[1];
    CHECK(d2 <= 0.01 + 1e-15);
  }
}

TEST_CASE("run_episode: fixed seed reproduces the trajectory") {
  const EnvSpec env = make_env("2d");
  const Policy policy = make_policy(2, 1, {8}, env.action_bound, 3);
  Rng rng1(9), rng2(9);
  const Trajectory a = run_episode(env, policy, rng1);
  const Trajectory b = run_episode(env, policy, rng2);
  REQUIRE(a.length() == b.length());
  REQUIRE(a.length() == env.horizon + 1);
  for (int t = 0; t < a.length(); ++t)
    for (int k = 0; k < 2; ++k)
      CHECK(a.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] ==
            b.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]);
}

TEST_CASE("run_episode records the first unsafe hit") {
  // A plant whose state walks straight into the unsafe box.
  EnvSpec env = make_env("2d");
  env.step = [](const Vec& s, const Vec&, std::span<const double>) {
    return Vec{s[0] + 0.25, s[1] + 0.35};
  };
  env.init_region = Region::box_of({{-1.5, -1.5}, {0.0, 0.0}});
  const Policy policy = make_policy(2, 1, {4}, env.action_bound, 3);
  Rng rng(1);
  const Trajectory traj = run_episode(env, policy, rng);
  REQUIRE(traj.unsafe_hit.has_value());
  CHECK(contains(env.unsafe_region, traj.states[static_cast<std::size_t>(*traj.unsafe_hit)]));
}

TEST_CASE("empirical_safe_rate: vacuous and certain cases") {
  EnvSpec env = make_env("2d");
  const Policy policy = make_policy(2, 1, {4}, env.action_bound, 3);
  Rng rng(2);
  // Empty unsafe set (an impossible box far away).
  env.unsafe_region = Region::box_of({{100.0, 100.0}, {100.0, 100.0}});
  CHECK(empirical_safe_rate(env, policy, 50, rng) == 1.0);
  // Unsafe from the very first state.
  env.unsafe_region = env.state_region;
  CHECK(empirical_safe_rate(env, policy, 50, rng) == 0.0);
}

TEST_CASE("max_state_gap cases") {
  Trajectory r;
  SyntheticTrajectory s;
  for (int t = 0; t < 5; ++t) {
    r.states.push_back({1.0 * t, -2.0 * t});
    s.states.push_back({1.0 * t, -2.0 * t});
  }
  // Identical trajectories: zero gap.
  Vec gap = max_state_gap({r}, {s});
  CHECK(gap[0] == 0.0);
  CHECK(gap[1] == 0.0);

  // Single differing step at t=3 by (0.2, -0.1).
  s.states[3][0] += 0.2;
  s.states[3][1] -= -0.1 * -1.0;  // shift by -0.1
  gap = max_state_gap({r}, {s});
  CHECK(gap[0] == doctest::Approx(0.2));
  CHECK(gap[1] == doctest::Approx(0.1));

  // Componentwise max across two pairs equals the max of per-pair gaps.
  Trajectory r2 = r;
  SyntheticTrajectory s2 = s;
  s2.states[1][0] += 0.5;
  const Vec both = max_state_gap({r, r2}, {s, s2});
  CHECK(both[0] == doctest::Approx(0.5));
  CHECK(both[1] == doctest::Approx(0.1));
}

TEST_CASE("environment steps are pure given the noise draw") {
  const EnvSpec env = make_env("cartpole");
  const Vec s = {0.01, -0.55, -0.35, 0.53};
  const Vec a = {2.5};
  const Vec z = {0.0, 0.0, 0.7, -1.1};
  const Vec s1 = env.step(s, a, z);
  const Vec s2 = env.step(s, a, z);
  for (std::size_t k = 0; k < 4; ++k) CHECK(s1[k] == s2[k]);
}

TEST_CASE("quadratic reward matches its definition") {
  const EnvSpec env = make_env("2d");
  CHECK(env.reward({1.0, -2.0}, {0.5}) == doctest::Approx(-(1.0 + 4.0 + 0.1 * 0.25)));
  const EnvSpec cp = make_env("cartpole");
  CHECK(cp.reward({0.1, 0.2, 0.3, 0.4}, {1.0}) ==
        doctest::Approx(-(0.01 + 10 * 0.04 + 0.1 * 0.09 + 0.1 * 0.16 + 0.001)));
}

TEST_CASE("binomial confidence: doubling episodes halves the interval width") {
  // SE = sqrt(p(1-p)/n): structural check on the estimator's convergence.
  const double p = 0.9;
  const auto se = [p](int n) { return std::sqrt(p * (1 - p) / n); };
  CHECK(se(1000) / se(4000) == doctest::Approx(2.0));
}
