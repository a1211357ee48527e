#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sbrl/barrier.hpp"
#include "sbrl/envs.hpp"
#include "sbrl/policyopt.hpp"
#include "sbrl/sdegen.hpp"

namespace sbrl {

struct NetworkWidths {
  std::vector<int> policy{64, 64};
  std::vector<int> drift{64, 64};
  std::vector<int> diffusion{64, 64};
  std::vector<int> barrier{64, 64};
  bool operator==(const NetworkWidths&) const = default;
};

// Everything that defines one training run; addressable key-by-key from the
// CLI config file.
struct TrainConfig {
  std::string env_name;
  int horizon = 0;   // 0: environment default
  double dt = 0.0;   // 0: environment default
  NetworkWidths widths;
  int outer_iters = 300;
  int inner_gen_steps = 50;
  int lie_samples = 10;
  double lambda = 10.0;
  double gamma = 0.98;
  double lr_policy = 1e-3;
  double lr_model = 1e-3;
  double lr_barrier = 5e-3;
  int batch_real = 16;
  int batch_synthetic = 16;
  std::uint64_t seed = 1;
  int cert_pairs = 20;
  int cert_retrain_steps = 600;
  int cert_init_samples = 1000;
  int cert_unsafe_samples = 1000;
  bool operator==(const TrainConfig&) const = default;
};

// Environment-specific defaults (horizon, dt, iteration counts).
TrainConfig default_config(const std::string& env_name);
void validate_config(const TrainConfig& config);
EnvSpec env_from_config(const TrainConfig& config);

struct IterationMetrics {
  double gen_nll = 0.0;       // mean per-transition NLL on the fresh batch
  double barrier_init = 0.0;  // loss term 1
  double barrier_unsafe = 0.0;  // loss term 2
  double barrier_lie = 0.0;     // loss term 3
  double barrier_total = 0.0;
  double j_hat = 0.0;         // synthetic mean discounted return
  double model_gap = 0.0;     // paired real/synthetic mean per-step gap
  int excluded = 0;           // blown-up rollouts excluded from j_hat
};

struct RunReport {
  std::vector<IterationMetrics> metrics;
  SafetyCertificate certificate;
  double safe_rate = 0.0;
  double mean_return = 0.0;
  bool barrier_converged = false;
};

// Named substreams of the master seed; each advances independently and all
// four serialize into checkpoints.
struct RngBundle {
  Rng env{0};
  Rng model{0};
  Rng barrier{0};
  Rng eval{0};
  static RngBundle from_seed(std::uint64_t seed);
};

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kCheckpointCadence = 25;
// Replay retention, in outer iterations' worth of fresh episode batches.
constexpr int kReplayWindow = 50;
// Policy updates start after the generative model and barrier have had this
// many iterations to learn the initial policy's trajectory distribution and
// the unsafe geometry; the barrier multiplier then ramps to config.lambda
// over kLambdaRampIters. Both are independent of outer_iters so checkpoint
// resume stays exact when only the iteration budget changes.
constexpr int kPolicyWarmupIters = 0;
constexpr int kLambdaRampIters = 10;
// In-loop barrier training samples the unsafe region enlarged by this
// margin (per finite dimension), anticipating the gap-enlargement the
// practical bound applies afterwards; certification always uses the true
// regions.
constexpr double kTrainUnsafeMargin = 0.25;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrainConfig config;
  ParamSet policy;
  ParamSet drift;
  ParamSet diffusion;
  ParamSet barrier;
  AdamState adam_policy;
  AdamState adam_drift;
  AdamState adam_diffusion;
  AdamState adam_barrier;
  std::uint64_t iteration = 0;
  RngBundle rng;
  // Growing replay set of real episodes; serialized so a resumed run sees
  // exactly the data an uninterrupted run would.
  std::vector<Trajectory> replay;
};

// Thrown when a loss goes non-finite: carries the last good state so the
// caller can persist it before exiting nonzero.
struct TrainingAborted : std::runtime_error {
  TrainingAborted(const std::string& what, Checkpoint last_good, RunReport partial)
      : std::runtime_error(what),
        checkpoint(std::move(last_good)),
        report(std::move(partial)) {}
  Checkpoint checkpoint;
  RunReport report;
};

using CheckpointSink = std::function<void(const Checkpoint&, bool is_final)>;

// The outer training loop: per iteration, collect real episodes into the
// replay set, take inner_gen_steps Adam steps on the generative NLL, then one
// joint barrier/policy step from synthetic rollouts. Deterministic per
// (config, resume point). `resume` must match the config in everything but
// outer_iters.
std::pair<Checkpoint, RunReport> run_training(const TrainConfig& config,
                                              const CheckpointSink& sink = {},
                                              const Checkpoint* resume = nullptr);

// The practical safety bound pipeline: measure the paired real/synthetic
// state gap with the final policy, enlarge the unsafe region by it, retrain a
// fresh barrier against the enlarged region, and certify with eta taken as
// the max barrier value over sampled synthetic trajectories.
SafetyCertificate practical_bound(const Checkpoint& checkpoint, int n_pairs,
                                  int retrain_steps, Rng rng);

// Paired rollout helper: both sides start from s0 and consume the same noise
// stream, so the gap measures model error rather than independent diffusion.
std::pair<Trajectory, SyntheticTrajectory> paired_rollout(const EnvSpec& env,
                                                          const GenerativeModel& model,
                                                          const Policy& policy, const Vec& s0,
                                                          int horizon, Rng& rng);

// Versioned binary container ("SBRL" magic). Save/load round trips are
// bit-exact; unknown versions and truncated files are rejected with the
// failing byte offset.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sbrl
