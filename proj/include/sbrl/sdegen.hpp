#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sbrl/envs.hpp"
#include "sbrl/nn.hpp"
#include "sbrl/rng.hpp"
#include "sbrl/tape.hpp"

namespace sbrl {

// Learned discrete-time SDE surrogate of the plant:
//   shat(t+1) = G(shat, pi(shat)) + Sigma(shat) .* w,   w ~ N(0, I_n).
// The drift network predicts the increment on top of a skip connection
// (G = s + net(s, a)); the diffusion network outputs diagonal standard
// deviations through softplus plus a small positive floor, so the Gaussian
// likelihood stays well defined. Set sigma_floor = 0 and drive the net's
// output strongly negative for an exactly deterministic model.
struct GenerativeModel {
  MlpSpec drift_spec;      // input n+m -> output n
  MlpSpec diffusion_spec;  // input n -> output n
  ParamSet drift;
  ParamSet diffusion;
  int state_dim = 0;
  int action_dim = 0;
  double sigma_floor = 1e-3;
};

GenerativeModel make_generative_model(int state_dim, int action_dim,
                                      const std::vector<int>& drift_hidden,
                                      const std::vector<int>& diffusion_hidden,
                                      std::uint64_t seed, double sigma_floor = 1e-3);

// Synthetic rollout; every transition is reproducible from the stored noise:
// states[t+1] == G(states[t], actions[t]) + Sigma(states[t]) .* noise[t].
struct SyntheticTrajectory {
  std::vector<Vec> states;   // T+1 entries
  std::vector<Vec> actions;  // T+1 entries
  std::vector<Vec> noise;    // T entries
  bool truncated = false;    // some |state entry| exceeded kBlowupLimit
  int length() const { return static_cast<int>(states.size()); }
};

constexpr double kBlowupLimit = 1e6;

// Batched mean/std of the one-step transition; states [B,n].
Tensor drift_mean(const GenerativeModel& model, const Tensor& states, const Tensor& actions);
Tensor diffusion_std(const GenerativeModel& model, const Tensor& states);

// Single transition shat' = G(s, pi(s)) + Sigma(s) .* w.
Vec sde_step(const GenerativeModel& model, const Policy& policy, const Vec& s, const Vec& w);

// T applications of sde_step with i.i.d. standard-normal noise.
SyntheticTrajectory rollout(const GenerativeModel& model, const Policy& policy,
                            const Vec& s0, int horizon, Rng& rng);

// Synthetic rollout driven by an externally supplied noise stream, one
// state_dim block per step; pairs bit-for-bit with an env rollout fed the
// same draws.
SyntheticTrajectory rollout_with_noise(const GenerativeModel& model, const Policy& policy,
                                       const Vec& s0, const std::vector<Vec>& noise);

// Batched plain rollout for Monte Carlo passes: visit(t, states [B,n]) for
// t = 0..horizon.
void synth_rollout_batch(const GenerativeModel& model, const Policy& policy,
                         const Tensor& init_states, int horizon, Rng& rng,
                         const std::function<void(int, const Tensor&)>& visit);

// One-step teacher-forced negative log-likelihood of a real trajectory under
// the model (total over transitions): for each t the mean is G(s(t), a(t))
// and the std is Sigma(s(t)), with a(t) as recorded in the trajectory.
double gen_nll(const GenerativeModel& model, const Trajectory& real);

// --- tape paths -----------------------------------------------------------

struct ModelVars {
  MlpVars drift;
  MlpVars diffusion;
};

ModelVars bind_model(Tape& tape, const GenerativeModel& model, bool requires_grad = true);

// Differentiable batched transition. Noise is a constant (reparameterized
// sampling): gradients flow to policy and model parameters only.
Var sde_step_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                  const Policy& policy, const MlpVars& pv, Var states, const Tensor& noise);

// Differentiable teacher-forced NLL; states/actions/targets hold the T
// transitions of one trajectory as rows.
Var gen_nll_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                 const Tensor& states, const Tensor& actions, const Tensor& targets);

struct GenAdam {
  AdamState drift;
  AdamState diffusion;
};

GenAdam make_gen_adam(const GenerativeModel& model, double lr);

// M Adam steps on the per-transition mean NLL; each minibatch is all
// transitions of one uniformly drawn trajectory. Throws NumericError on a
// non-finite loss.
GenerativeModel train_generative(GenerativeModel model, const std::vector<Trajectory>& dataset,
                                 int steps, GenAdam& adam, Rng& rng);

// Mean per-step componentwise gap between paired real and synthetic
// trajectories; the free-running model fidelity metric.
double mean_step_gap(const std::vector<Trajectory>& real,
                     const std::vector<SyntheticTrajectory>& synthetic);

}  // namespace sbrl
