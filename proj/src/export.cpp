#include "sbrl/export.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "sbrl/barrier.hpp"
#include "sbrl/errors.hpp"
#include "sbrl/report.hpp"

namespace sbrl {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw ContractError("cannot write " + path.string());
  file << text;
}

std::vector<double> barrier_series(const BarrierNet& barrier, const std::vector<Vec>& states) {
  std::vector<double> values;
  values.reserve(states.size());
  for (const Vec& s : states) values.push_back(barrier_value(barrier, s));
  return values;
}

}  // namespace

void export_run(const std::filesystem::path& run_dir, const ExportOptions& options) {
  if (!std::filesystem::is_directory(run_dir))
    throw ConfigError("run directory does not exist: " + run_dir.string());
  const Checkpoint checkpoint = load_checkpoint(run_dir / "checkpoint_final.ckpt");

  std::vector<IterationMetrics> metrics;
  {
    std::ifstream file(run_dir / "metrics.csv");
    if (!file) throw ConfigError("missing metrics.csv in " + run_dir.string());
    std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    metrics = parse_metrics_csv(text);
  }

  const TrainConfig& config = checkpoint.config;
  const EnvSpec env = env_from_config(config);
  Policy policy = make_policy(env.state_dim, env.action_dim, config.widths.policy,
                              env.action_bound, 0);
  policy.params = checkpoint.policy;
  GenerativeModel model = make_generative_model(
      env.state_dim, env.action_dim, config.widths.drift, config.widths.diffusion, 0);
  model.drift = checkpoint.drift;
  model.diffusion = checkpoint.diffusion;
  BarrierNet barrier = make_barrier(env.state_dim, config.widths.barrier, 0);
  barrier.params = checkpoint.barrier;

  // Fresh paired overlays with the trained artifacts.
  Rng rng = Rng(options.seed).substream("export");
  std::vector<Trajectory> real;
  std::vector<SyntheticTrajectory> synth;
  for (int p = 0; p < options.pairs; ++p) {
    const Vec s0 = sample_region(env.init_region, env.state_region, rng);
    auto [r, s] = paired_rollout(env, model, policy, s0, env.horizon, rng);
    real.push_back(std::move(r));
    synth.push_back(std::move(s));
  }

  const std::filesystem::path out_dir = run_dir / "export";
  std::filesystem::create_directories(out_dir);

  if (options.format == ExportOptions::Format::csv) {
    write_metric_series(out_dir, metrics);
    for (int p = 0; p < options.pairs; ++p) {
      write_file(out_dir / ("traj_real_" + std::to_string(p) + ".csv"),
                 trajectory_csv(env, real[static_cast<std::size_t>(p)]));
      Trajectory synth_as_traj;
      synth_as_traj.states = synth[static_cast<std::size_t>(p)].states;
      synth_as_traj.actions = synth[static_cast<std::size_t>(p)].actions;
      for (std::size_t t = 0; t < synth_as_traj.states.size(); ++t)
        synth_as_traj.rewards.push_back(
            env.reward(synth_as_traj.states[t], synth_as_traj.actions[t]));
      write_file(out_dir / ("traj_synth_" + std::to_string(p) + ".csv"),
                 trajectory_csv(env, synth_as_traj));
      std::string breal = "t,barrier\n";
      const auto real_series = barrier_series(barrier, real[static_cast<std::size_t>(p)].states);
      for (std::size_t t = 0; t < real_series.size(); ++t)
        breal += std::to_string(t) + "," + fmt(real_series[t]) + "\n";
      write_file(out_dir / ("barrier_real_" + std::to_string(p) + ".csv"), breal);
      std::string bsynth = "t,barrier\n";
      const auto synth_series =
          barrier_series(barrier, synth[static_cast<std::size_t>(p)].states);
      for (std::size_t t = 0; t < synth_series.size(); ++t)
        bsynth += std::to_string(t) + "," + fmt(synth_series[t]) + "\n";
      write_file(out_dir / ("barrier_synth_" + std::to_string(p) + ".csv"), bsynth);
    }
    return;
  }

  // Single JSON document.
  nlohmann::json doc;
  doc["environment"] = config.env_name;
  doc["seed"] = options.seed;
  nlohmann::json curves;
  {
    nlohmann::json gen_nll, b1, b2, b3, btot, j_hat, gap;
    for (const IterationMetrics& m : metrics) {
      gen_nll.push_back(m.gen_nll);
      b1.push_back(m.barrier_init);
      b2.push_back(m.barrier_unsafe);
      b3.push_back(m.barrier_lie);
      btot.push_back(m.barrier_total);
      j_hat.push_back(m.j_hat);
      gap.push_back(m.model_gap);
    }
    curves["gen_nll"] = std::move(gen_nll);
    curves["barrier_init"] = std::move(b1);
    curves["barrier_unsafe"] = std::move(b2);
    curves["barrier_lie"] = std::move(b3);
    curves["barrier_total"] = std::move(btot);
    curves["j_hat"] = std::move(j_hat);
    curves["model_gap"] = std::move(gap);
  }
  doc["curves"] = std::move(curves);
  nlohmann::json overlays = nlohmann::json::array();
  for (int p = 0; p < options.pairs; ++p) {
    nlohmann::json pair;
    pair["real_states"] = real[static_cast<std::size_t>(p)].states;
    pair["synthetic_states"] = synth[static_cast<std::size_t>(p)].states;
    pair["barrier_real"] = barrier_series(barrier, real[static_cast<std::size_t>(p)].states);
    pair["barrier_synthetic"] =
        barrier_series(barrier, synth[static_cast<std::size_t>(p)].states);
    overlays.push_back(std::move(pair));
  }
  doc["overlays"] = std::move(overlays);
  write_file(out_dir / "export.json", doc.dump(2) + "\n");
}

}  // namespace sbrl
