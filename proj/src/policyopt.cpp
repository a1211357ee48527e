#include "sbrl/policyopt.hpp"

#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

// On-tape quadratic reward for a batch of (states, actions): [B,1] rows of
// -(s^2 . sw + a^2 . aw), realized as matmuls with constant weight columns.
Var reward_tape(Tape& tape, const QuadraticCost& reward, Var states, Var actions) {
  const int n = static_cast<int>(reward.state_weights.size());
  const int m = static_cast<int>(reward.action_weights.size());
  Tensor sw = Tensor::zeros({n, 1});
  for (int k = 0; k < n; ++k) sw[k] = reward.state_weights[static_cast<std::size_t>(k)];
  Tensor aw = Tensor::zeros({m, 1});
  for (int k = 0; k < m; ++k) aw[k] = reward.action_weights[static_cast<std::size_t>(k)];
  Var cost = tape.add(tape.matmul(tape.square(states), tape.constant(sw)),
                      tape.matmul(tape.square(actions), tape.constant(aw)));
  Var r = tape.scale(cost, -1.0);
  return reward.offset == 0.0 ? r : tape.add_scalar(r, reward.offset);
}

bool any_blown(const Tensor& states, int row) {
  for (int k = 0; k < states.cols(); ++k)
    if (std::fabs(states.at(row, k)) > kBlowupLimit) return true;
  return false;
}

}  // namespace

ReturnOnTape synthetic_return_tape(Tape& tape, const GenerativeModel& model,
                                   const ModelVars& mv, const Policy& policy,
                                   const MlpVars& pv, const Tensor& init_states, int horizon,
                                   double gamma, const QuadraticCost& reward, Rng& rng) {
  if (init_states.rows() < 1) throw ContractError("synthetic_return: empty initial batch");
  if (gamma < 0.0 || gamma > 1.0) throw ContractError("synthetic_return: gamma outside [0,1]");
  const int batch = init_states.rows(), n = model.state_dim;

  std::vector<bool> alive(static_cast<std::size_t>(batch), true);
  Var states = tape.constant(init_states);
  Var returns{};  // [B,1] accumulated discounted reward
  double discount = 1.0;
  for (int t = 0; t <= horizon; ++t) {
    Var actions = policy_apply(tape, pv, policy, states);
    Var r = reward_tape(tape, reward, states, actions);
    // Rewards of dead rows are masked to zero; the mask is a constant, so no
    // gradient leaks through frozen trajectories.
    Tensor mask = Tensor::zeros({batch, 1});
    for (int i = 0; i < batch; ++i) mask[i] = alive[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    Var masked = tape.mul(r, tape.constant(mask));
    Var contrib = tape.scale(masked, discount);
    returns = t == 0 ? contrib : tape.add(returns, contrib);
    discount *= gamma;
    if (t == horizon) break;

    Tensor noise = Tensor::zeros({batch, n});
    for (double& v : noise.data()) v = rng.normal();
    Var next = sde_step_tape(tape, model, mv, policy, pv, states, noise);
    // Freeze rows that blew up this step: next = mask .* next + (1-mask) .* states.
    const Tensor& next_val = tape.value(next);
    bool any_frozen = false;
    for (int i = 0; i < batch; ++i) {
      if (alive[static_cast<std::size_t>(i)] && any_blown(next_val, i)) {
        alive[static_cast<std::size_t>(i)] = false;
      }
      if (!alive[static_cast<std::size_t>(i)]) any_frozen = true;
    }
    if (any_frozen) {
      Tensor keep = Tensor::zeros({batch, n});
      Tensor drop = Tensor::zeros({batch, n});
      for (int i = 0; i < batch; ++i)
        for (int k = 0; k < n; ++k) {
          keep.at(i, k) = alive[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
          drop.at(i, k) = alive[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
        }
      next = tape.add(tape.mul(next, tape.constant(keep)),
                      tape.mul(states, tape.constant(drop)));
    }
    states = next;
  }

  ReturnOnTape out;
  out.estimate.horizon = horizon;
  out.estimate.gamma = gamma;
  const Tensor& per_row = tape.value(returns);
  int survivors = 0;
  for (int i = 0; i < batch; ++i) {
    out.estimate.per_trajectory.push_back(per_row[i]);
    if (alive[static_cast<std::size_t>(i)]) ++survivors;
  }
  out.estimate.excluded = batch - survivors;
  if (survivors == 0) throw NumericError("synthetic_return: every rollout blew up");

  // Mean over surviving rows via a constant weight row vector.
  Tensor weights = Tensor::zeros({1, batch});
  for (int i = 0; i < batch; ++i)
    weights[i] = alive[static_cast<std::size_t>(i)] ? 1.0 / survivors : 0.0;
  Var mean_return = tape.matmul(tape.constant(weights), returns);
  out.value = tape.sum(mean_return);  // [1,1] -> scalar shape [1]
  out.estimate.value = tape.value(out.value)[0];
  return out;
}

ReturnEstimate synthetic_return(const GenerativeModel& model, const Policy& policy,
                                const Tensor& init_states, int horizon, double gamma,
                                const QuadraticCost& reward, Rng& rng) {
  Tape tape;
  ModelVars mv = bind_model(tape, model, false);
  MlpVars pv = bind_params(tape, policy.params, false);
  return synthetic_return_tape(tape, model, mv, policy, pv, init_states, horizon, gamma,
                               reward, rng)
      .estimate;
}

std::pair<ParamSet, AdamState> combined_policy_update(const ParamSet& policy_params,
                                                      const ParamSet& barrier_grad,
                                                      const ParamSet& return_grad,
                                                      const AdamState& state, double lambda) {
  if (!policy_params.same_layout(return_grad))
    throw ContractError("combined_policy_update: return gradient layout mismatch");
  if (lambda != 0.0 && !policy_params.same_layout(barrier_grad))
    throw ContractError("combined_policy_update: barrier gradient layout mismatch");
  ParamSet direction = return_grad;
  for (auto& [name, g] : direction.entries)
    for (int i = 0; i < g.size(); ++i) g[i] = -g[i];
  if (lambda != 0.0) {
    for (std::size_t e = 0; e < direction.entries.size(); ++e) {
      Tensor& g = direction.entries[e].second;
      const Tensor& b = barrier_grad.entries[e].second;
      if (!b.all_finite())
        throw NumericError("combined_policy_update: non-finite barrier gradient for '" +
                           barrier_grad.entries[e].first + "'");
      for (int i = 0; i < g.size(); ++i) g[i] += lambda * b[i];
    }
  }
  return adam_step(policy_params, direction, state);
}

}  // namespace sbrl
