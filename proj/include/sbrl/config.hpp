#pragma once

#include <filesystem>
#include <string>

#include "sbrl/orchestrator.hpp"

namespace sbrl {

// Parses the INI-style run configuration:
//
//   [environment]   name, horizon, dt
//   [networks]      policy.widths, drift.widths, diffusion.widths, barrier.widths
//   [training]      outer_iters, inner_gen_steps, lie_samples, lambda, gamma,
//                   lr_policy, lr_model, lr_barrier, batch_real,
//                   batch_synthetic, seed
//   [certification] pairs, retrain_steps, init_samples, unsafe_samples
//
// environment.name is required; every other key falls back to the
// environment's defaults. Unknown sections or keys are rejected with a
// key-level message, and any accepted file yields a validated TrainConfig.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace sbrl
