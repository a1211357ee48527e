#include "sbrl/orchestrator.hpp"

#include <cmath>

#include "sbrl/errors.hpp"

namespace sbrl {

TrainConfig default_config(const std::string& env_name) {
  TrainConfig c;
  c.env_name = env_name;
  const EnvSpec env = make_env(env_name);
  c.horizon = env.horizon;
  c.dt = env.dt;
  if (env_name == "cartpole") c.outer_iters = 150;
  return c;
}

void validate_config(const TrainConfig& config) {
  make_env(config.env_name);  // throws on unknown name
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(config.horizon, "environment.horizon");
  if (config.dt <= 0.0) throw ConfigError("environment.dt must be positive");
  positive(config.outer_iters, "training.outer_iters");
  positive(config.inner_gen_steps, "training.inner_gen_steps");
  positive(config.lie_samples, "training.lie_samples");
  positive(config.batch_real, "training.batch_real");
  positive(config.batch_synthetic, "training.batch_synthetic");
  positive(config.cert_pairs, "certification.pairs");
  if (config.cert_retrain_steps < 0) throw ConfigError("certification.retrain_steps must be >= 0");
  positive(config.cert_init_samples, "certification.init_samples");
  positive(config.cert_unsafe_samples, "certification.unsafe_samples");
  if (config.lambda < 0.0) throw ConfigError("training.lambda must be >= 0");
  if (config.gamma < 0.0 || config.gamma > 1.0) throw ConfigError("training.gamma must be in [0,1]");
  for (const auto* widths : {&config.widths.policy, &config.widths.drift,
                             &config.widths.diffusion, &config.widths.barrier})
    for (int w : *widths)
      if (w <= 0) throw ConfigError("network widths must be positive");
  if (config.lr_policy <= 0.0 || config.lr_model <= 0.0 || config.lr_barrier <= 0.0)
    throw ConfigError("learning rates must be positive");
}

EnvSpec env_from_config(const TrainConfig& config) {
  return make_env(config.env_name, config.dt, config.horizon);
}

RngBundle RngBundle::from_seed(std::uint64_t seed) {
  Rng master(seed);
  RngBundle rng;
  rng.env = master.substream("env");
  rng.model = master.substream("model");
  rng.barrier = master.substream("barrier");
  rng.eval = master.substream("eval");
  return rng;
}

std::pair<Trajectory, SyntheticTrajectory> paired_rollout(const EnvSpec& env,
                                                          const GenerativeModel& model,
                                                          const Policy& policy, const Vec& s0,
                                                          int horizon, Rng& rng) {
  std::vector<Vec> noise(static_cast<std::size_t>(horizon),
                         Vec(static_cast<std::size_t>(env.state_dim)));
  for (Vec& z : noise)
    for (double& v : z) v = rng.normal();

  Trajectory real;
  Vec s = s0;
  for (int t = 0; t <= horizon; ++t) {
    const Vec a = policy_action(policy, s);
    real.states.push_back(s);
    real.actions.push_back(a);
    real.rewards.push_back(env.reward(s, a));
    if (!real.unsafe_hit && contains(env.unsafe_region, s)) real.unsafe_hit = t;
    if (t == horizon) break;
    s = env.step(s, a, noise[static_cast<std::size_t>(t)]);
  }
  return {std::move(real), rollout_with_noise(model, policy, s0, noise)};
}

namespace {

struct Trainer {
  TrainConfig config;
  EnvSpec env;
  Policy policy;
  GenerativeModel model;
  BarrierNet barrier;
  AdamState adam_policy;
  GenAdam gen_adam;
  AdamState adam_barrier;
  RngBundle rng;
  std::vector<Trajectory> replay;
  std::uint64_t iteration = 0;
  Region train_unsafe_region;  // true unsafe region plus the training margin

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.config = config;
    ck.policy = policy.params;
    ck.drift = model.drift;
    ck.diffusion = model.diffusion;
    ck.barrier = barrier.params;
    ck.adam_policy = adam_policy;
    ck.adam_drift = gen_adam.drift;
    ck.adam_diffusion = gen_adam.diffusion;
    ck.adam_barrier = adam_barrier;
    ck.iteration = iteration;
    ck.rng = rng;
    ck.replay = replay;
    return ck;
  }

  static Trainer fresh(const TrainConfig& config) {
    Trainer t;
    t.config = config;
    t.env = env_from_config(config);
    t.train_unsafe_region = minkowski_enlarge(
        t.env.unsafe_region, Vec(static_cast<std::size_t>(t.env.state_dim),
                                 kTrainUnsafeMargin));
    Rng master(config.seed);
    t.policy = make_policy(t.env.state_dim, t.env.action_dim, config.widths.policy,
                           t.env.action_bound, master.substream("init.policy").next_u64());
    t.model = make_generative_model(t.env.state_dim, t.env.action_dim, config.widths.drift,
                                    config.widths.diffusion,
                                    master.substream("init.model").next_u64());
    t.barrier = make_barrier(t.env.state_dim, config.widths.barrier,
                             master.substream("init.barrier").next_u64());
    AdamConfig pol_cfg;
    pol_cfg.lr = config.lr_policy;
    t.adam_policy = make_adam_state(t.policy.params, pol_cfg);
    t.gen_adam = make_gen_adam(t.model, config.lr_model);
    AdamConfig bar_cfg;
    bar_cfg.lr = config.lr_barrier;
    t.adam_barrier = make_adam_state(t.barrier.params, bar_cfg);
    t.rng = RngBundle::from_seed(config.seed);
    return t;
  }

  static Trainer from_checkpoint(const TrainConfig& config, const Checkpoint& ck) {
    TrainConfig expected = ck.config;
    expected.outer_iters = config.outer_iters;
    if (!(expected == config))
      throw ConfigError("resume: config differs from checkpoint in fields other than outer_iters");
    Trainer t = fresh(config);
    t.policy.params = ck.policy;
    t.model.drift = ck.drift;
    t.model.diffusion = ck.diffusion;
    t.barrier.params = ck.barrier;
    t.adam_policy = ck.adam_policy;
    t.gen_adam.drift = ck.adam_drift;
    t.gen_adam.diffusion = ck.adam_diffusion;
    t.adam_barrier = ck.adam_barrier;
    t.iteration = ck.iteration;
    t.rng = ck.rng;
    t.replay = ck.replay;
    return t;
  }

  Tensor sample_init_batch(int count, Rng& stream) {
    Tensor batch = Tensor::zeros({count, env.state_dim});
    for (int i = 0; i < count; ++i) {
      const Vec s = sample_region(env.init_region, env.state_region, stream);
      for (int k = 0; k < env.state_dim; ++k) batch.at(i, k) = s[static_cast<std::size_t>(k)];
    }
    return batch;
  }

  IterationMetrics step() {
    IterationMetrics metrics;

    // Fresh real episodes feed the replay set for the MLE fit. The window is
    // bounded to the most recent iterations: Eq.-4 style training is
    // on-policy, and stale early-policy data slows the fit around the
    // current trajectory distribution.
    std::vector<Trajectory> fresh;
    fresh.reserve(static_cast<std::size_t>(config.batch_real));
    for (int b = 0; b < config.batch_real; ++b) {
      fresh.push_back(run_episode(env, policy, rng.env));
      replay.push_back(fresh.back());
    }
    const std::size_t window =
        static_cast<std::size_t>(kReplayWindow) * static_cast<std::size_t>(config.batch_real);
    if (replay.size() > window)
      replay.erase(replay.begin(), replay.end() - static_cast<std::ptrdiff_t>(window));

    // Generative phase (Eq.-4 style teacher-forced MLE), policy frozen.
    model = train_generative(model, replay, config.inner_gen_steps, gen_adam, rng.model);
    {
      double total = 0.0;
      int transitions = 0;
      for (const Trajectory& traj : fresh) {
        total += gen_nll(model, traj);
        transitions += traj.length() - 1;
      }
      metrics.gen_nll = total / transitions;
    }

    // Synthetic rollout states for the barrier loss: every state of a fresh
    // synthetic batch (blown-up rows dropped).
    const int sample_rows = config.batch_synthetic * (env.horizon + 1);
    std::vector<double> traj_rows;
    traj_rows.reserve(static_cast<std::size_t>(sample_rows) * env.state_dim);
    {
      const Tensor starts = sample_init_batch(config.batch_synthetic, rng.model);
      synth_rollout_batch(model, policy, starts, env.horizon, rng.model,
                          [&](int, const Tensor& states) {
                            for (int i = 0; i < states.rows(); ++i) {
                              bool blown = false;
                              for (int k = 0; k < states.cols(); ++k)
                                if (std::fabs(states.at(i, k)) > kBlowupLimit) blown = true;
                              if (blown) continue;
                              for (int k = 0; k < states.cols(); ++k)
                                traj_rows.push_back(states.at(i, k));
                            }
                          });
    }
    const int traj_count = static_cast<int>(traj_rows.size()) / env.state_dim;
    if (traj_count == 0) throw NumericError("training: every synthetic rollout blew up");
    const Tensor traj_states =
        Tensor::unchecked({traj_count, env.state_dim}, std::move(traj_rows));

    const Tensor init_states = sample_init_batch(traj_count, rng.barrier);
    Tensor unsafe_states = Tensor::zeros({traj_count, env.state_dim});
    for (int i = 0; i < traj_count; ++i) {
      const Vec s = sample_region(train_unsafe_region, env.state_region, rng.barrier);
      for (int k = 0; k < env.state_dim; ++k) unsafe_states.at(i, k) = s[static_cast<std::size_t>(k)];
    }

    // Joint barrier/policy step: beta descends L_B; theta descends
    // lambda * dL_B/dtheta - dJ/dtheta.
    ParamSet barrier_grad, policy_barrier_grad;
    {
      Tape tape;
      MlpVars bv = bind_params(tape, barrier.params, true);
      ModelVars mv = bind_model(tape, model, false);
      MlpVars pv = bind_params(tape, policy.params, true);
      const BarrierLossParts parts =
          barrier_loss_tape(tape, barrier, bv, model, mv, policy, pv, init_states,
                            unsafe_states, traj_states, config.lie_samples, rng.barrier);
      metrics.barrier_init = tape.value(parts.init_term)[0];
      metrics.barrier_unsafe = tape.value(parts.unsafe_term)[0];
      metrics.barrier_lie = tape.value(parts.lie_term)[0];
      metrics.barrier_total = tape.value(parts.total)[0];
      if (!std::isfinite(metrics.barrier_total))
        throw NumericError("training: barrier loss diverged");
      tape.backward(parts.total);
      barrier_grad = collect_grads(tape, bv, barrier.params);
      policy_barrier_grad = collect_grads(tape, pv, policy.params);
    }

    ParamSet policy_return_grad;
    {
      Tape tape;
      ModelVars mv = bind_model(tape, model, false);
      MlpVars pv = bind_params(tape, policy.params, true);
      const Tensor starts = sample_init_batch(config.batch_synthetic, rng.model);
      const ReturnOnTape ret =
          synthetic_return_tape(tape, model, mv, policy, pv, starts, env.horizon,
                                config.gamma, env.reward, rng.model);
      metrics.j_hat = ret.estimate.value;
      metrics.excluded = ret.estimate.excluded;
      if (!std::isfinite(metrics.j_hat)) throw NumericError("training: return diverged");
      tape.backward(ret.value);
      policy_return_grad = collect_grads(tape, pv, policy.params);
    }

    std::tie(barrier.params, adam_barrier) =
        adam_step(barrier.params, barrier_grad, adam_barrier);
    // The policy holds still until the model and barrier have learned the
    // initial trajectory distribution and the unsafe geometry: an untrained
    // barrier exerts noise rather than safety pressure, and a policy that
    // entrenches a corridor before pressure arrives is hard to dislodge.
    if (iteration >= static_cast<std::uint64_t>(kPolicyWarmupIters)) {
      const double ramp = std::min(
          1.0, static_cast<double>(iteration - kPolicyWarmupIters + 1) / kLambdaRampIters);
      std::tie(policy.params, adam_policy) =
          combined_policy_update(policy.params, policy_barrier_grad, policy_return_grad,
                                 adam_policy, config.lambda * ramp);
    }

    // Paired free-running fidelity metric.
    {
      constexpr int kGapPairs = 4;
      std::vector<Trajectory> real;
      std::vector<SyntheticTrajectory> synth;
      for (int p = 0; p < kGapPairs; ++p) {
        const Vec s0 = sample_region(env.init_region, env.state_region, rng.eval);
        auto [r, s] = paired_rollout(env, model, policy, s0, env.horizon, rng.eval);
        real.push_back(std::move(r));
        synth.push_back(std::move(s));
      }
      metrics.model_gap = mean_step_gap(real, synth);
    }

    ++iteration;
    return metrics;
  }
};

}  // namespace

std::pair<Checkpoint, RunReport> run_training(const TrainConfig& config,
                                              const CheckpointSink& sink,
                                              const Checkpoint* resume) {
  validate_config(config);
  Trainer trainer =
      resume ? Trainer::from_checkpoint(config, *resume) : Trainer::fresh(config);
  RunReport report;

  while (trainer.iteration < static_cast<std::uint64_t>(config.outer_iters)) {
    Checkpoint last_good = trainer.to_checkpoint();
    IterationMetrics metrics;
    try {
      metrics = trainer.step();
    } catch (const NumericError& err) {
      throw TrainingAborted(std::string("training aborted: ") + err.what(),
                            std::move(last_good), std::move(report));
    }
    report.metrics.push_back(metrics);
    if (sink && trainer.iteration % kCheckpointCadence == 0 &&
        trainer.iteration < static_cast<std::uint64_t>(config.outer_iters))
      sink(trainer.to_checkpoint(), false);
  }

  Checkpoint final_checkpoint = trainer.to_checkpoint();
  if (sink) sink(final_checkpoint, true);

  if (!report.metrics.empty()) {
    const IterationMetrics& last = report.metrics.back();
    report.barrier_converged = last.barrier_unsafe <= 0.05 && last.barrier_lie <= 0.0;
  }

  // Final certification and evaluation for the report.
  CertifyOptions options;
  options.init_samples = config.cert_init_samples;
  options.unsafe_samples = config.cert_unsafe_samples;
  options.lie_samples = config.lie_samples;
  report.certificate =
      certify(trainer.barrier, trainer.model, trainer.policy, trainer.env, options,
              trainer.rng.eval);
  const EvalResult eval =
      evaluate_policy(trainer.env, trainer.policy, 500, config.gamma, trainer.rng.eval);
  report.safe_rate = eval.safe_rate;
  report.mean_return = eval.mean_return;

  return {std::move(final_checkpoint), std::move(report)};
}

SafetyCertificate practical_bound(const Checkpoint& checkpoint, int n_pairs,
                                  int retrain_steps, Rng rng) {
  const TrainConfig& config = checkpoint.config;
  const EnvSpec env = env_from_config(config);

  Policy policy = make_policy(env.state_dim, env.action_dim, config.widths.policy,
                              env.action_bound, 0);
  policy.params = checkpoint.policy;
  GenerativeModel model = make_generative_model(
      env.state_dim, env.action_dim, config.widths.drift, config.widths.diffusion, 0);
  model.drift = checkpoint.drift;
  model.diffusion = checkpoint.diffusion;

  // 1. Componentwise model/environment gap from paired rollouts.
  std::vector<Trajectory> real;
  std::vector<SyntheticTrajectory> synth;
  for (int p = 0; p < n_pairs; ++p) {
    const Vec s0 = sample_region(env.init_region, env.state_region, rng);
    auto [r, s] = paired_rollout(env, model, policy, s0, env.horizon, rng);
    real.push_back(std::move(r));
    synth.push_back(std::move(s));
  }
  const Vec delta = max_state_gap(real, synth);

  // 2. Enlarged unsafe region.
  EnvSpec enlarged_env = env;
  enlarged_env.unsafe_region = minkowski_enlarge(env.unsafe_region, delta);

  // 3. Fresh barrier retrained against the enlarged region, policy and model
  // frozen.
  BarrierNet fresh_barrier =
      make_barrier(env.state_dim, config.widths.barrier, rng.next_u64());
  AdamConfig bar_cfg;
  bar_cfg.lr = config.lr_barrier;
  AdamState adam = make_adam_state(fresh_barrier.params, bar_cfg);
  for (int step = 0; step < retrain_steps; ++step) {
    std::vector<double> rows;
    Tensor starts = Tensor::zeros({config.batch_synthetic, env.state_dim});
    for (int i = 0; i < config.batch_synthetic; ++i) {
      const Vec s = sample_region(env.init_region, env.state_region, rng);
      for (int k = 0; k < env.state_dim; ++k) starts.at(i, k) = s[static_cast<std::size_t>(k)];
    }
    synth_rollout_batch(model, policy, starts, env.horizon, rng,
                        [&](int, const Tensor& states) {
                          for (int i = 0; i < states.rows(); ++i) {
                            bool blown = false;
                            for (int k = 0; k < states.cols(); ++k)
                              if (std::fabs(states.at(i, k)) > kBlowupLimit) blown = true;
                            if (blown) continue;
                            for (int k = 0; k < states.cols(); ++k)
                              rows.push_back(states.at(i, k));
                          }
                        });
    const int count = static_cast<int>(rows.size()) / env.state_dim;
    if (count == 0) throw NumericError("practical_bound: synthetic rollouts blew up");
    const Tensor traj_states = Tensor::unchecked({count, env.state_dim}, std::move(rows));
    Tensor init_states = Tensor::zeros({count, env.state_dim});
    Tensor unsafe_states = Tensor::zeros({count, env.state_dim});
    for (int i = 0; i < count; ++i) {
      Vec s = sample_region(env.init_region, env.state_region, rng);
      for (int k = 0; k < env.state_dim; ++k) init_states.at(i, k) = s[static_cast<std::size_t>(k)];
      s = sample_region(enlarged_env.unsafe_region, env.state_region, rng);
      for (int k = 0; k < env.state_dim; ++k) unsafe_states.at(i, k) = s[static_cast<std::size_t>(k)];
    }
    Tape tape;
    MlpVars bv = bind_params(tape, fresh_barrier.params, true);
    ModelVars mv = bind_model(tape, model, false);
    MlpVars pv = bind_params(tape, policy.params, false);
    const BarrierLossParts parts =
        barrier_loss_tape(tape, fresh_barrier, bv, model, mv, policy, pv, init_states,
                          unsafe_states, traj_states, config.lie_samples, rng);
    if (!std::isfinite(tape.value(parts.total)[0]))
      throw NumericError("practical_bound: barrier retraining diverged");
    tape.backward(parts.total);
    std::tie(fresh_barrier.params, adam) =
        adam_step(fresh_barrier.params, collect_grads(tape, bv, fresh_barrier.params), adam);
  }

  // 4. Certify against the enlarged region, then take eta as the max barrier
  // value over n_pairs fresh synthetic rollouts (the trajectory-max
  // convention at the same sample count as the gap measurement).
  CertifyOptions options;
  options.init_samples = config.cert_init_samples;
  options.unsafe_samples = config.cert_unsafe_samples;
  options.lie_samples = config.lie_samples;
  SafetyCertificate cert =
      certify(fresh_barrier, model, policy, enlarged_env, options, rng);
  cert.delta = delta;

  double traj_max = cert.stats.eta_raw_max;
  for (int p = 0; p < n_pairs; ++p) {
    const Vec s0 = sample_region(env.init_region, env.state_region, rng);
    const SyntheticTrajectory traj = rollout(model, policy, s0, env.horizon, rng);
    for (const Vec& s : traj.states)
      traj_max = std::max(traj_max, barrier_value(fresh_barrier, s));
  }
  cert.stats.eta_raw_max = traj_max;
  cert.eta = std::min(1.0, traj_max / options.ville_threshold);
  cert.bound = 1.0 - cert.eta;
  cert.mc.consistent =
      cert.mc.sup_exceed_freq <= cert.eta + 3.0 * cert.mc.standard_error;
  cert.valid = true;
  cert.invalid_reason.clear();
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
