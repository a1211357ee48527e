#include "sbrl/barrier.hpp"

#include <algorithm>
#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

BarrierNet make_barrier(int state_dim, const std::vector<int>& hidden, std::uint64_t seed) {
  BarrierNet b;
  b.spec.widths.push_back(state_dim);
  for (int w : hidden) b.spec.widths.push_back(w);
  b.spec.widths.push_back(1);
  b.spec.output = OutputActivation::sigmoid;
  b.params = init_params(b.spec, seed);
  return b;
}

Tensor barrier_values(const BarrierNet& barrier, const Tensor& states) {
  return mlp_eval(barrier.params, barrier.spec, states);
}

double barrier_value(const BarrierNet& barrier, const Vec& state) {
  return barrier_values(barrier, Tensor::row(state))[0];
}

Var barrier_apply(Tape& tape, const MlpVars& vars, const BarrierNet& barrier, Var states) {
  return mlp_apply(tape, vars, barrier.spec, states);
}

double eta_from_barrier(const BarrierNet& barrier, const std::vector<Vec>& init_samples,
                        EtaMode mode) {
  if (init_samples.empty()) throw ContractError("eta_from_barrier: empty sample set");
  Tensor batch = Tensor::zeros({static_cast<int>(init_samples.size()),
                                barrier.spec.input_width()});
  for (std::size_t i = 0; i < init_samples.size(); ++i)
    for (std::size_t k = 0; k < init_samples[i].size(); ++k)
      batch.at(static_cast<int>(i), static_cast<int>(k)) = init_samples[i][k];
  const Tensor values = barrier_values(barrier, batch);
  if (mode == EtaMode::max) {
    double eta = 0.0;
    for (double v : values.data()) eta = std::max(eta, v);
    return eta;
  }
  double total = 0.0;
  for (double v : values.data()) total += v;
  return total / values.size();
}

BarrierLossParts barrier_loss_tape(Tape& tape, const BarrierNet& barrier, const MlpVars& bv,
                                   const GenerativeModel& model, const ModelVars& mv,
                                   const Policy& policy, const MlpVars& pv,
                                   const Tensor& init_states, const Tensor& unsafe_states,
                                   const Tensor& traj_states, int lie_samples, Rng& noise_rng) {
  if (init_states.rows() < 1 || unsafe_states.rows() < 1 || traj_states.rows() < 1)
    throw ContractError("barrier_loss: empty sample set");
  if (lie_samples < 1) throw ContractError("barrier_loss: lie_samples must be >= 1");

  BarrierLossParts parts;
  parts.init_term = tape.mean(barrier_apply(tape, bv, barrier, tape.constant(init_states)));
  parts.unsafe_term = tape.add_scalar(
      tape.scale(tape.mean(barrier_apply(tape, bv, barrier, tape.constant(unsafe_states))), -1.0),
      1.0);

  // Lie term: fresh reparameterized one-step samples from each trajectory
  // state; the states themselves are constants, so the policy gradient flows
  // only through the transition.
  Var states = tape.constant(traj_states);
  const int rows = traj_states.rows(), n = traj_states.cols();
  Var acc{};
  for (int j = 0; j < lie_samples; ++j) {
    Tensor noise = Tensor::zeros({rows, n});
    for (double& v : noise.data()) v = noise_rng.normal();
    Var next = sde_step_tape(tape, model, mv, policy, pv, states, noise);
    Var b_next = barrier_apply(tape, bv, barrier, next);
    acc = j == 0 ? b_next : tape.add(acc, b_next);
  }
  Var expected_next = tape.scale(acc, 1.0 / lie_samples);
  Var b_now = barrier_apply(tape, bv, barrier, states);
  parts.lie_term = tape.mean(tape.sub(expected_next, b_now));

  parts.total = tape.add(tape.add(parts.init_term, parts.unsafe_term), parts.lie_term);
  return parts;
}

BarrierLossValue barrier_loss(const BarrierNet& barrier, const GenerativeModel& model,
                              const Policy& policy, const Tensor& init_states,
                              const Tensor& unsafe_states, const Tensor& traj_states,
                              int lie_samples, Rng& noise_rng) {
  Tape tape;
  MlpVars bv = bind_params(tape, barrier.params, false);
  ModelVars mv = bind_model(tape, model, false);
  MlpVars pv = bind_params(tape, policy.params, false);
  const BarrierLossParts parts =
      barrier_loss_tape(tape, barrier, bv, model, mv, policy, pv, init_states, unsafe_states,
                        traj_states, lie_samples, noise_rng);
  return {tape.value(parts.init_term)[0], tape.value(parts.unsafe_term)[0],
          tape.value(parts.lie_term)[0], tape.value(parts.total)[0]};
}

SafetyCertificate certify(const BarrierNet& barrier, const GenerativeModel& model,
                          const Policy& policy, const EnvSpec& env,
                          const CertifyOptions& options, Rng& rng) {
  SafetyCertificate cert;
  const int n = env.state_dim;
  const int horizon = options.horizon > 0 ? options.horizon : env.horizon;
  const double c = options.ville_threshold;

  // Condition samples over S0 and Su (clipped to the state region).
  Tensor init = Tensor::zeros({options.init_samples, n});
  for (int i = 0; i < options.init_samples; ++i) {
    const Vec s = sample_region(env.init_region, env.state_region, rng);
    for (int k = 0; k < n; ++k) init.at(i, k) = s[static_cast<std::size_t>(k)];
  }
  Tensor unsafe = Tensor::zeros({options.unsafe_samples, n});
  for (int i = 0; i < options.unsafe_samples; ++i) {
    const Vec s = sample_region(env.unsafe_region, env.state_region, rng);
    for (int k = 0; k < n; ++k) unsafe.at(i, k) = s[static_cast<std::size_t>(k)];
  }
  {
    const Tensor b_init = barrier_values(barrier, init);
    double total = 0.0, top = 0.0;
    for (double v : b_init.data()) {
      total += v;
      top = std::max(top, v);
    }
    cert.stats.init_mean = total / b_init.size();
    cert.stats.init_max = top;
  }
  {
    const Tensor b_unsafe = barrier_values(barrier, unsafe);
    double total = 0.0, bottom = 1.0;
    for (double v : b_unsafe.data()) {
      total += v;
      bottom = std::min(bottom, v);
    }
    cert.stats.unsafe_mean = total / b_unsafe.size();
    cert.stats.unsafe_min = bottom;
  }

  // Monte Carlo rollouts: sup-exceedance frequency, per-rollout initial
  // barrier values (eta), and a pool of visited states for the Lie check.
  Tensor starts = Tensor::zeros({options.mc_rollouts, n});
  for (int i = 0; i < options.mc_rollouts; ++i) {
    const Vec s = sample_region(env.init_region, env.state_region, rng);
    for (int k = 0; k < n; ++k) starts.at(i, k) = s[static_cast<std::size_t>(k)];
  }
  std::vector<bool> exceeded(static_cast<std::size_t>(options.mc_rollouts), false);
  double eta_init_max = 0.0, eta_init_mean = 0.0, eta_traj_max = 0.0;
  const int stride = std::max(1, options.mc_rollouts * (horizon + 1) / std::max(1, options.lie_states));
  std::vector<Vec> lie_pool;
  lie_pool.reserve(static_cast<std::size_t>(options.lie_states) + 16);
  long flat_index = 0;
  synth_rollout_batch(model, policy, starts, horizon, rng, [&](int t, const Tensor& states) {
    const Tensor values = barrier_values(barrier, states);
    for (int i = 0; i < options.mc_rollouts; ++i) {
      const double v = values[i];
      if (v >= c) exceeded[static_cast<std::size_t>(i)] = true;
      eta_traj_max = std::max(eta_traj_max, v);
      if (t == 0) {
        eta_init_max = std::max(eta_init_max, v);
        eta_init_mean += v / options.mc_rollouts;
      }
      if (flat_index % stride == 0 &&
          lie_pool.size() < static_cast<std::size_t>(options.lie_states)) {
        Vec s(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) s[static_cast<std::size_t>(k)] = states.at(i, k);
        lie_pool.push_back(std::move(s));
      }
      ++flat_index;
    }
  });

  int exceed_count = 0;
  for (bool e : exceeded) exceed_count += e ? 1 : 0;
  const double freq = static_cast<double>(exceed_count) / options.mc_rollouts;
  cert.mc.sup_exceed_freq = freq;
  cert.mc.standard_error = std::sqrt(freq * (1.0 - freq) / options.mc_rollouts);
  cert.mc.samples = options.mc_rollouts;
  cert.mc.threshold = c;

  // Lie sample mean over pooled trajectory states with fresh next-state
  // draws.
  {
    const int rows = static_cast<int>(lie_pool.size());
    Tensor states = Tensor::zeros({rows, n});
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < n; ++k) states.at(i, k) = lie_pool[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    const Tensor b_now = barrier_values(barrier, states);
    const Tensor actions = policy_eval(policy, states);
    const Tensor mu = drift_mean(model, states, actions);
    const Tensor sigma = diffusion_std(model, states);
    std::vector<double> mean_next(static_cast<std::size_t>(rows), 0.0);
    for (int j = 0; j < options.lie_samples; ++j) {
      Tensor next = mu;
      for (int i = 0; i < rows; ++i)
        for (int k = 0; k < n; ++k) next.at(i, k) += sigma.at(i, k) * rng.normal();
      const Tensor b_next = barrier_values(barrier, next);
      for (int i = 0; i < rows; ++i) mean_next[static_cast<std::size_t>(i)] += b_next[i] / options.lie_samples;
    }
    double total = 0.0, top = -1.0;
    for (int i = 0; i < rows; ++i) {
      const double lie = mean_next[static_cast<std::size_t>(i)] - b_now[i];
      total += lie;
      top = std::max(top, lie);
    }
    cert.stats.lie_mean = total / rows;
    cert.stats.lie_max = top;
  }

  // Eta per the selected convention, conservatively rescaled by 1/c so the
  // bound stays sound for the soft unsafe level.
  cert.stats.eta_raw_max =
      options.eta == CertifyOptions::Eta::initial_max
          ? std::max(eta_init_max, cert.stats.init_max)
          : std::max(eta_traj_max, cert.stats.init_max);
  cert.stats.eta_raw_mean = eta_init_mean;
  cert.eta = std::min(1.0, cert.stats.eta_raw_max / c);
  cert.bound = 1.0 - cert.eta;

  cert.mc.consistent = freq <= cert.eta + 3.0 * cert.mc.standard_error;

  cert.valid = true;
  if (cert.stats.unsafe_min < options.unsafe_level) {
    cert.valid = false;
    cert.invalid_reason = "unsafe-level condition";
  } else if (cert.stats.lie_mean > options.lie_tolerance) {
    cert.valid = false;
    cert.invalid_reason = "lie-decrease condition";
  } else if (!cert.mc.consistent) {
    cert.valid = false;
    cert.invalid_reason = "ville-crosscheck";
  }
  return cert;
}

}  // namespace sbrl
