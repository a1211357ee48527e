// Command-line driver: train, evaluate, certify, export.
//
// Exit codes: 0 success, 2 input error, 3 numeric abort, 4 certification
// failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbrl/config.hpp"
#include "sbrl/errors.hpp"
#include "sbrl/export.hpp"
#include "sbrl/orchestrator.hpp"
#include "sbrl/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCertification = 4;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw sbrl::ContractError("cannot write " + path.string());
  file << text;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, const std::string& resume_path) {
  sbrl::TrainConfig config = sbrl::load_config(config_path);
  if (seed) config.seed = *seed;

  std::optional<sbrl::Checkpoint> resume;
  if (!resume_path.empty()) {
    resume = sbrl::load_checkpoint(resume_path);
    if (seed) throw sbrl::ConfigError("--seed cannot be combined with --resume");
  }

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const auto sink = [&dir](const sbrl::Checkpoint& ck, bool is_final) {
    sbrl::save_checkpoint(dir / ("checkpoint_" + std::to_string(ck.iteration) + ".ckpt"), ck);
    if (is_final) sbrl::save_checkpoint(dir / "checkpoint_final.ckpt", ck);
  };

  try {
    auto [checkpoint, report] =
        sbrl::run_training(config, sink, resume ? &*resume : nullptr);
    write_text(dir / "metrics.csv", sbrl::metrics_csv(report.metrics));
    sbrl::write_metric_series(dir / "metrics", report.metrics);
    write_text(dir / "report.json", sbrl::report_json(config, report).dump(2) + "\n");
    std::cout << "trained " << report.metrics.size() << " iterations; safe_rate="
              << report.safe_rate << " bound=" << report.certificate.bound
              << (report.certificate.valid ? " (valid)" : " (INVALID)") << "\n";
    return kExitOk;
  } catch (const sbrl::TrainingAborted& abort) {
    sbrl::save_checkpoint(dir / "checkpoint_abort.ckpt", abort.checkpoint);
    write_text(dir / "metrics.csv", sbrl::metrics_csv(abort.report.metrics));
    std::cerr << abort.what() << "; last good checkpoint written to "
              << (dir / "checkpoint_abort.ckpt") << "\n";
    return kExitNumeric;
  }
}

int cmd_evaluate(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
                 const std::string& out_path) {
  const sbrl::Checkpoint checkpoint = sbrl::load_checkpoint(checkpoint_path);
  const sbrl::EnvSpec env = sbrl::env_from_config(checkpoint.config);
  sbrl::Policy policy =
      sbrl::make_policy(env.state_dim, env.action_dim, checkpoint.config.widths.policy,
                        env.action_bound, 0);
  policy.params = checkpoint.policy;
  sbrl::Rng rng = sbrl::Rng(seed).substream("eval");
  const sbrl::EvalResult result =
      sbrl::evaluate_policy(env, policy, episodes, checkpoint.config.gamma, rng);
  const nlohmann::json doc{{"safe_rate", result.safe_rate},
                           {"mean_return", result.mean_return},
                           {"episodes", result.episodes},
                           {"seed", seed}};
  std::cout << doc.dump(2) << "\n";
  if (!out_path.empty()) write_text(out_path, doc.dump(2) + "\n");
  return kExitOk;
}

int cmd_certify(const std::string& checkpoint_path, std::optional<int> pairs,
                std::optional<int> retrain_steps, std::uint64_t seed,
                const std::string& out_path) {
  const sbrl::Checkpoint checkpoint = sbrl::load_checkpoint(checkpoint_path);
  const int n_pairs = pairs.value_or(checkpoint.config.cert_pairs);
  const int steps = retrain_steps.value_or(checkpoint.config.cert_retrain_steps);
  const sbrl::SafetyCertificate cert = sbrl::practical_bound(
      checkpoint, n_pairs, steps, sbrl::Rng(seed).substream("certify"));
  if (!out_path.empty())
    write_text(out_path, sbrl::certificate_json(cert).dump(2) + "\n");
  std::cout << "1-eta = " << cert.bound << "\n";
  if (!cert.valid) {
    std::cerr << "certificate INVALID: " << cert.invalid_reason << "\n";
    return kExitCertification;
  }
  return kExitOk;
}

int cmd_export(const std::string& run_dir, const std::string& format, std::uint64_t seed) {
  sbrl::ExportOptions options;
  options.seed = seed;
  if (format == "csv") {
    options.format = sbrl::ExportOptions::Format::csv;
  } else if (format == "json") {
    options.format = sbrl::ExportOptions::Format::json;
  } else {
    throw sbrl::ConfigError("unknown export format '" + format + "'");
  }
  sbrl::export_run(run_dir, options);
  std::cout << "exported " << run_dir << "/export\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe RL with generative-model-based soft barrier functions"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run", resume_path;
  std::optional<std::uint64_t> train_seed;
  CLI::App* train = app.add_subcommand("train", "Run the joint training loop");
  train->add_option("--config", config_path, "Run configuration file")->required();
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--seed", train_seed, "Override the config master seed");
  train->add_option("--resume", resume_path, "Checkpoint to resume from");

  std::string eval_checkpoint, eval_out;
  int episodes = 500;
  std::uint64_t eval_seed = 0;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Empirical safe rate and return");
  evaluate->add_option("--checkpoint", eval_checkpoint, "Trained checkpoint")->required();
  evaluate->add_option("--episodes", episodes, "Number of evaluation episodes");
  evaluate->add_option("--seed", eval_seed, "Evaluation seed");
  evaluate->add_option("--out", eval_out, "Also write the JSON result here");

  std::string cert_checkpoint, cert_out;
  std::optional<int> cert_pairs, cert_retrain;
  std::uint64_t cert_seed = 0;
  CLI::App* certify = app.add_subcommand("certify", "Practical safety lower bound");
  certify->add_option("--checkpoint", cert_checkpoint, "Trained checkpoint")->required();
  certify->add_option("--pairs", cert_pairs, "Paired rollouts for the state gap");
  certify->add_option("--retrain-steps", cert_retrain, "Barrier retraining steps");
  certify->add_option("--seed", cert_seed, "Certification seed");
  certify->add_option("--out", cert_out, "Write the certificate JSON here");

  std::string export_dir, export_format = "csv";
  std::uint64_t export_seed = 0;
  CLI::App* exporter = app.add_subcommand("export", "Plot data from a finished run");
  exporter->add_option("--run", export_dir, "Run directory")->required();
  exporter->add_option("--format", export_format, "csv or json");
  exporter->add_option("--seed", export_seed, "Overlay rollout seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, out_dir, train_seed, resume_path);
    if (evaluate->parsed()) return cmd_evaluate(eval_checkpoint, episodes, eval_seed, eval_out);
    if (certify->parsed())
      return cmd_certify(cert_checkpoint, cert_pairs, cert_retrain, cert_seed, cert_out);
    if (exporter->parsed()) return cmd_export(export_dir, export_format, export_seed);
  } catch (const sbrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sbrl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sbrl::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sbrl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitInput;
}
