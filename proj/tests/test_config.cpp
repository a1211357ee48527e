#include <doctest.h>

#include "sbrl/config.hpp"
#include "sbrl/errors.hpp"
#include "sbrl/report.hpp"

using namespace sbrl;

TEST_CASE("minimal config takes environment defaults") {
  const TrainConfig c = parse_config("[environment]\nname = 2d\n");
  CHECK(c.env_name == "2d");
  CHECK(c.horizon == 100);
  CHECK(c.dt == 0.05);
  CHECK(c.outer_iters == 300);
  CHECK(c.seed == 1);
}

TEST_CASE("full config file overrides every section") {
  const std::string text = R"(
# run configuration
[environment]
name = cartpole
horizon = 80
dt = 0.01

[networks]
policy.widths = 32,32
drift.widths = 48
diffusion.widths = 24,24
barrier.widths = 16

[training]
outer_iters = 12
inner_gen_steps = 7
lie_samples = 4
lambda = 0.5
gamma = 0.9
lr_policy = 0.002
lr_model = 0.003
lr_barrier = 0.004
batch_real = 5
batch_synthetic = 6
seed = 99

[certification]
pairs = 3
retrain_steps = 11
init_samples = 222
unsafe_samples = 333
)";
  const TrainConfig c = parse_config(text);
  CHECK(c.env_name == "cartpole");
  CHECK(c.horizon == 80);
  CHECK(c.dt == 0.01);
  CHECK(c.widths.policy == std::vector<int>{32, 32});
  CHECK(c.widths.drift == std::vector<int>{48});
  CHECK(c.widths.diffusion == std::vector<int>{24, 24});
  CHECK(c.widths.barrier == std::vector<int>{16});
  CHECK(c.outer_iters == 12);
  CHECK(c.inner_gen_steps == 7);
  CHECK(c.lie_samples == 4);
  CHECK(c.lambda == 0.5);
  CHECK(c.gamma == 0.9);
  CHECK(c.lr_policy == 0.002);
  CHECK(c.lr_model == 0.003);
  CHECK(c.lr_barrier == 0.004);
  CHECK(c.batch_real == 5);
  CHECK(c.batch_synthetic == 6);
  CHECK(c.seed == 99);
  CHECK(c.cert_pairs == 3);
  CHECK(c.cert_retrain_steps == 11);
  CHECK(c.cert_init_samples == 222);
  CHECK(c.cert_unsafe_samples == 333);
}

TEST_CASE("unknown keys and sections are rejected by name") {
  CHECK_THROWS_WITH_AS(parse_config("[environment]\nname = 2d\nfoo = 1\n"),
                       doctest::Contains("environment.foo"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[environment]\nname = 2d\n[plotting]\nx = 1\n"),
                       doctest::Contains("plotting"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[training]\nouter_iters = 5\n"),
                       doctest::Contains("environment.name"), ConfigError);
}

TEST_CASE("malformed values are rejected with the key named") {
  CHECK_THROWS_WITH_AS(parse_config("[environment]\nname = 2d\nhorizon = soon\n"),
                       doctest::Contains("environment.horizon"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[environment]\nname = 2d\n[training]\ngamma = high\n"),
                       doctest::Contains("training.gamma"), ConfigError);
  CHECK_THROWS_AS(parse_config("[environment]\nname = 2d\n[training]\ngamma = 1.5\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[environment]\nname = mars_lander\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[environment]\nname = 2d\nname = 2d\n"), ConfigError);
}

TEST_CASE("accepted files always yield a valid TrainConfig") {
  // parse -> validate is total: whatever parses must pass validate_config.
  const TrainConfig c =
      parse_config("[environment]\nname = 2d\n[training]\nouter_iters = 1\n");
  validate_config(c);  // must not throw
  CHECK(c.outer_iters == 1);
}

TEST_CASE("metrics CSV round trips") {
  std::vector<IterationMetrics> metrics(3);
  metrics[0].gen_nll = 1.25;
  metrics[1].j_hat = -42.5;
  metrics[2].model_gap = 0.125;
  metrics[2].excluded = 2;
  const std::string csv = metrics_csv(metrics);
  const auto parsed = parse_metrics_csv(csv);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].gen_nll == 1.25);
  CHECK(parsed[1].j_hat == -42.5);
  CHECK(parsed[2].model_gap == 0.125);
  CHECK(parsed[2].excluded == 2);
}
