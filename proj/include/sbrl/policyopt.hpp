#pragma once

#include <utility>
#include <vector>

#include "sbrl/sdegen.hpp"

namespace sbrl {

// Mean discounted return over synthetic rollouts. Trajectories that blow up
// (any |state entry| > kBlowupLimit) are excluded from the mean and counted.
struct ReturnEstimate {
  double value = 0.0;
  std::vector<double> per_trajectory;
  int horizon = 0;
  double gamma = 1.0;
  int excluded = 0;
};

// Plain pathwise estimate: (1/N) sum_i sum_t gamma^t r(s_i(t), pi(s_i(t))).
ReturnEstimate synthetic_return(const GenerativeModel& model, const Policy& policy,
                                const Tensor& init_states, int horizon, double gamma,
                                const QuadraticCost& reward, Rng& rng);

struct ReturnOnTape {
  Var value;  // scalar mean return, differentiable in the policy parameters
  ReturnEstimate estimate;
};

// Differentiable batched rollout through the generative model with
// reparameterized noise. Blown-up trajectories are frozen at their last
// finite state and excluded from the mean.
ReturnOnTape synthetic_return_tape(Tape& tape, const GenerativeModel& model,
                                   const ModelVars& mv, const Policy& policy,
                                   const MlpVars& pv, const Tensor& init_states, int horizon,
                                   double gamma, const QuadraticCost& reward, Rng& rng);

// One Adam step on lambda * barrier_gradient - return_gradient: descend the
// barrier loss, ascend the return. lambda == 0 reproduces the pure
// performance step bit-exactly.
std::pair<ParamSet, AdamState> combined_policy_update(const ParamSet& policy_params,
                                                      const ParamSet& barrier_grad,
                                                      const ParamSet& return_grad,
                                                      const AdamState& state, double lambda);

}  // namespace sbrl
