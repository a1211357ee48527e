#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sbrl/tape.hpp"
#include "sbrl/tensor.hpp"

namespace sbrl {

enum class OutputActivation { identity, sigmoid, softplus };

// Fully-connected network layout: widths[0] inputs through widths.back()
// outputs, tanh on every hidden layer.
struct MlpSpec {
  std::vector<int> widths;
  OutputActivation output = OutputActivation::identity;

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
};

// Flat collection of named dense arrays ("W0", "b0", "W1", ...). Entry order
// is fixed at construction and shared by gradients and optimizer state.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> entries;

  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;
  int total_size() const;
  bool same_layout(const ParamSet& other) const;
};

// Xavier-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
// Deterministic per seed.
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

void validate_params(const ParamSet& params, const MlpSpec& spec);

// Plain forward pass, input [B, in] -> [B, out]. Exactly mirrors the tape
// path op-for-op so both produce bit-identical values.
Tensor mlp_eval(const ParamSet& params, const MlpSpec& spec, const Tensor& input);

// Parameters bound onto a tape as differentiable leaves.
struct MlpVars {
  std::vector<std::pair<std::string, Var>> entries;
  Var find(std::string_view name) const;
};

MlpVars bind_params(Tape& tape, const ParamSet& params, bool requires_grad = true);

// Differentiable forward pass through bound parameters.
Var mlp_apply(Tape& tape, const MlpVars& vars, const MlpSpec& spec, Var input);

// Gradients of the bound parameters after tape.backward(), in the layout of
// `like` (zeros for parameters the output did not reach).
ParamSet collect_grads(const Tape& tape, const MlpVars& vars, const ParamSet& like);

// Deterministic control policy: an MLP with identity output squashed through
// action_bound * tanh(.) so early-training actions stay bounded.
struct Policy {
  MlpSpec spec;
  double action_bound = 1.0;
  ParamSet params;
};

Policy make_policy(int state_dim, int action_dim, const std::vector<int>& hidden,
                   double action_bound, std::uint64_t seed);

// [B, n] states -> [B, m] actions.
Tensor policy_eval(const Policy& policy, const Tensor& states);
std::vector<double> policy_action(const Policy& policy, const std::vector<double>& state);

Var policy_apply(Tape& tape, const MlpVars& vars, const Policy& policy, Var states);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators mirroring a ParamSet, plus step counter.
struct AdamState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  ParamSet m;
  ParamSet v;
};

AdamState make_adam_state(const ParamSet& like, const AdamConfig& cfg);

// One bias-corrected Adam update. Pure: identical inputs give identical
// outputs. Throws NumericError naming the parameter on non-finite gradients.
std::pair<ParamSet, AdamState> adam_step(const ParamSet& params,
                                         const ParamSet& grads,
                                         const AdamState& state);

}  // namespace sbrl
