#include "sbrl/sdegen.hpp"

#include <cmath>
#include <numbers>

#include "sbrl/errors.hpp"
#include "sbrl/kernels.hpp"

namespace sbrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

Tensor states_tensor(const std::vector<Vec>& rows, int from, int count, int n) {
  Tensor t = Tensor::zeros({count, n});
  for (int i = 0; i < count; ++i)
    for (int k = 0; k < n; ++k) t.at(i, k) = rows[static_cast<std::size_t>(from + i)][static_cast<std::size_t>(k)];
  return t;
}

bool row_blown(const Tensor& states, int row) {
  for (int k = 0; k < states.cols(); ++k)
    if (std::fabs(states.at(row, k)) > kBlowupLimit) return true;
  return false;
}

}  // namespace

GenerativeModel make_generative_model(int state_dim, int action_dim,
                                      const std::vector<int>& drift_hidden,
                                      const std::vector<int>& diffusion_hidden,
                                      std::uint64_t seed, double sigma_floor) {
  GenerativeModel m;
  m.state_dim = state_dim;
  m.action_dim = action_dim;
  m.sigma_floor = sigma_floor;
  m.drift_spec.widths.push_back(state_dim + action_dim);
  for (int w : drift_hidden) m.drift_spec.widths.push_back(w);
  m.drift_spec.widths.push_back(state_dim);
  m.drift_spec.output = OutputActivation::identity;
  m.diffusion_spec.widths.push_back(state_dim);
  for (int w : diffusion_hidden) m.diffusion_spec.widths.push_back(w);
  m.diffusion_spec.widths.push_back(state_dim);
  m.diffusion_spec.output = OutputActivation::softplus;
  Rng rng(seed);
  m.drift = init_params(m.drift_spec, rng.next_u64());
  m.diffusion = init_params(m.diffusion_spec, rng.next_u64());
  return m;
}

Tensor drift_mean(const GenerativeModel& model, const Tensor& states, const Tensor& actions) {
  if (states.rows() != actions.rows())
    throw ShapeError("drift_mean: state/action batch mismatch");
  const int batch = states.rows(), n = model.state_dim, m = model.action_dim;
  Tensor input = Tensor::zeros({batch, n + m});
  for (int i = 0; i < batch; ++i) {
    for (int k = 0; k < n; ++k) input.at(i, k) = states.at(i, k);
    for (int k = 0; k < m; ++k) input.at(i, n + k) = actions.at(i, k);
  }
  Tensor out = mlp_eval(model.drift, model.drift_spec, input);
  for (int i = 0; i < batch; ++i)
    for (int k = 0; k < n; ++k) out.at(i, k) += states.at(i, k);
  return out;
}

Tensor diffusion_std(const GenerativeModel& model, const Tensor& states) {
  Tensor out = mlp_eval(model.diffusion, model.diffusion_spec, states);
  for (double& v : out.data()) v += model.sigma_floor;
  return out;
}

Vec sde_step(const GenerativeModel& model, const Policy& policy, const Vec& s, const Vec& w) {
  for (double v : s)
    if (!std::isfinite(v)) throw NumericError("sde_step: non-finite state");
  const Tensor st = Tensor::row(s);
  const Tensor mu = drift_mean(model, st, policy_eval(policy, st));
  const Tensor sigma = diffusion_std(model, st);
  Vec next(static_cast<std::size_t>(model.state_dim));
  for (int k = 0; k < model.state_dim; ++k) {
    next[static_cast<std::size_t>(k)] = mu[k] + sigma[k] * w[static_cast<std::size_t>(k)];
    if (!std::isfinite(next[static_cast<std::size_t>(k)]))
      throw NumericError("sde_step: non-finite next state");
  }
  return next;
}

SyntheticTrajectory rollout(const GenerativeModel& model, const Policy& policy,
                            const Vec& s0, int horizon, Rng& rng) {
  if (horizon < 1) throw ContractError("rollout: horizon must be >= 1");
  std::vector<Vec> noise(static_cast<std::size_t>(horizon));
  for (Vec& w : noise) {
    w.resize(static_cast<std::size_t>(model.state_dim));
    for (double& v : w) v = rng.normal();
  }
  return rollout_with_noise(model, policy, s0, noise);
}

SyntheticTrajectory rollout_with_noise(const GenerativeModel& model, const Policy& policy,
                                       const Vec& s0, const std::vector<Vec>& noise) {
  SyntheticTrajectory traj;
  traj.states.push_back(s0);
  for (const Vec& w : noise) {
    const Vec& s = traj.states.back();
    traj.actions.push_back(policy_action(policy, s));
    Vec next = sde_step(model, policy, s, w);
    for (double v : next)
      if (std::fabs(v) > kBlowupLimit) traj.truncated = true;
    traj.noise.push_back(w);
    traj.states.push_back(std::move(next));
  }
  traj.actions.push_back(policy_action(policy, traj.states.back()));
  return traj;
}

void synth_rollout_batch(const GenerativeModel& model, const Policy& policy,
                         const Tensor& init_states, int horizon, Rng& rng,
                         const std::function<void(int, const Tensor&)>& visit) {
  const int batch = init_states.rows(), n = model.state_dim;
  if (init_states.cols() != n) throw ShapeError("synth_rollout_batch: state width mismatch");
  Tensor states = init_states;
  visit(0, states);
  for (int t = 0; t < horizon; ++t) {
    const Tensor actions = policy_eval(policy, states);
    Tensor mu = drift_mean(model, states, actions);
    const Tensor sigma = diffusion_std(model, states);
    for (int i = 0; i < batch; ++i) {
      // Frozen rows stop integrating once they blow up; callers treat them
      // as excluded.
      if (row_blown(states, i)) {
        for (int k = 0; k < n; ++k) mu.at(i, k) = states.at(i, k);
        for (int k = 0; k < n; ++k) rng.normal();
        continue;
      }
      for (int k = 0; k < n; ++k) mu.at(i, k) += sigma.at(i, k) * rng.normal();
    }
    states = std::move(mu);
    visit(t + 1, states);
  }
}

double gen_nll(const GenerativeModel& model, const Trajectory& real) {
  const int transitions = real.length() - 1;
  if (transitions < 1) throw ContractError("gen_nll: trajectory needs at least 2 states");
  const int n = model.state_dim;
  const Tensor states = states_tensor(real.states, 0, transitions, n);
  const Tensor actions = states_tensor(real.actions, 0, transitions, model.action_dim);
  const Tensor targets = states_tensor(real.states, 1, transitions, n);
  const Tensor mu = drift_mean(model, states, actions);
  const Tensor sigma = diffusion_std(model, states);
  double nll = 0.0;
  for (int i = 0; i < transitions; ++i) {
    for (int k = 0; k < n; ++k) {
      const double sd = sigma.at(i, k);
      const double z = (targets.at(i, k) - mu.at(i, k)) / sd;
      nll += 0.5 * (kLog2Pi + 2.0 * std::log(sd) + z * z);
    }
  }
  if (!std::isfinite(nll)) throw NumericError("gen_nll: non-finite likelihood");
  return nll;
}

ModelVars bind_model(Tape& tape, const GenerativeModel& model, bool requires_grad) {
  return {bind_params(tape, model.drift, requires_grad),
          bind_params(tape, model.diffusion, requires_grad)};
}

namespace {

// mu = states + drift_net(states ++ actions), sigma = floor + softplus(...).
Var drift_mean_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                    Var states, Var actions) {
  Var input = tape.concat_cols(states, actions);
  Var net = mlp_apply(tape, mv.drift, model.drift_spec, input);
  return tape.add(states, net);
}

Var diffusion_std_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                       Var states) {
  Var net = mlp_apply(tape, mv.diffusion, model.diffusion_spec, states);
  return tape.add_scalar(net, model.sigma_floor);
}

}  // namespace

Var sde_step_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                  const Policy& policy, const MlpVars& pv, Var states, const Tensor& noise) {
  Var actions = policy_apply(tape, pv, policy, states);
  Var mu = drift_mean_tape(tape, model, mv, states, actions);
  Var sigma = diffusion_std_tape(tape, model, mv, states);
  return tape.add(mu, tape.mul(sigma, tape.constant(noise)));
}

Var gen_nll_tape(Tape& tape, const GenerativeModel& model, const ModelVars& mv,
                 const Tensor& states, const Tensor& actions, const Tensor& targets) {
  Var s = tape.constant(states);
  Var a = tape.constant(actions);
  Var mu = drift_mean_tape(tape, model, mv, s, a);
  Var sigma = diffusion_std_tape(tape, model, mv, s);
  Var log_sigma = tape.log(sigma);
  Var residual = tape.sub(tape.constant(targets), mu);
  // (r / sigma)^2 written as r^2 * exp(-2 log sigma) to stay in the op set.
  Var quad = tape.mul(tape.square(residual), tape.exp(tape.scale(log_sigma, -2.0)));
  Var per_entry = tape.add_scalar(tape.add(quad, tape.scale(log_sigma, 2.0)), kLog2Pi);
  return tape.scale(tape.sum(per_entry), 0.5);
}

GenAdam make_gen_adam(const GenerativeModel& model, double lr) {
  AdamConfig cfg;
  cfg.lr = lr;
  return {make_adam_state(model.drift, cfg), make_adam_state(model.diffusion, cfg)};
}

GenerativeModel train_generative(GenerativeModel model, const std::vector<Trajectory>& dataset,
                                 int steps, GenAdam& adam, Rng& rng) {
  if (dataset.empty()) throw ContractError("train_generative: empty dataset");
  const int n = model.state_dim;
  for (int step = 0; step < steps; ++step) {
    const auto& traj = dataset[static_cast<std::size_t>(rng.next_u64() % dataset.size())];
    const int transitions = traj.length() - 1;
    if (transitions < 1) throw ContractError("train_generative: trajectory too short");
    Tape tape;
    ModelVars mv = bind_model(tape, model);
    Var nll = gen_nll_tape(tape, model, mv,
                           states_tensor(traj.states, 0, transitions, n),
                           states_tensor(traj.actions, 0, transitions, model.action_dim),
                           states_tensor(traj.states, 1, transitions, n));
    Var loss = tape.scale(nll, 1.0 / transitions);
    if (!std::isfinite(tape.value(loss)[0]))
      throw NumericError("train_generative: loss diverged");
    tape.backward(loss);
    auto [drift, drift_state] =
        adam_step(model.drift, collect_grads(tape, mv.drift, model.drift), adam.drift);
    auto [diffusion, diffusion_state] = adam_step(
        model.diffusion, collect_grads(tape, mv.diffusion, model.diffusion), adam.diffusion);
    model.drift = std::move(drift);
    model.diffusion = std::move(diffusion);
    adam.drift = std::move(drift_state);
    adam.diffusion = std::move(diffusion_state);
  }
  return model;
}

double mean_step_gap(const std::vector<Trajectory>& real,
                     const std::vector<SyntheticTrajectory>& synthetic) {
  if (real.empty() || real.size() != synthetic.size())
    throw ContractError("mean_step_gap: trajectory lists must be nonempty and paired");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < real.size(); ++p) {
    const auto& rs = real[p].states;
    const auto& ss = synthetic[p].states;
    if (rs.size() != ss.size()) throw ContractError("mean_step_gap: length mismatch");
    for (std::size_t t = 0; t < rs.size(); ++t) {
      double gap = 0.0;
      for (std::size_t k = 0; k < rs[t].size(); ++k) gap += std::fabs(rs[t][k] - ss[t][k]);
      total += gap / static_cast<double>(rs[t].size());
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace sbrl
