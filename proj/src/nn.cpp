#include "sbrl/nn.hpp"

#include <cmath>

#include "sbrl/errors.hpp"
#include "sbrl/kernels.hpp"
#include "sbrl/rng.hpp"

namespace sbrl {

Tensor* ParamSet::find(std::string_view name) {
  for (auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamSet::find(std::string_view name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

int ParamSet::total_size() const {
  int n = 0;
  for (const auto& [name, t] : entries) n += t.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].first != other.entries[i].first ||
        !entries[i].second.same_shape(other.entries[i].second))
      return false;
  return true;
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.widths.size() < 2) throw ContractError("mlp spec needs at least two widths");
  for (int w : spec.widths)
    if (w <= 0) throw ContractError("mlp widths must be positive");
  Rng rng(seed);
  ParamSet params;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.widths[static_cast<std::size_t>(l)];
    const int fan_out = spec.widths[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    params.entries.emplace_back("W" + std::to_string(l),
                                Tensor::matrix(fan_in, fan_out, std::move(w)));
    params.entries.emplace_back("b" + std::to_string(l),
                                Tensor::zeros({fan_out}));
  }
  return params;
}

void validate_params(const ParamSet& params, const MlpSpec& spec) {
  for (int l = 0; l < spec.layer_count(); ++l) {
    const Tensor* w = params.find("W" + std::to_string(l));
    const Tensor* b = params.find("b" + std::to_string(l));
    if (!w || !b || w->rows() != spec.widths[static_cast<std::size_t>(l)] ||
        w->cols() != spec.widths[static_cast<std::size_t>(l) + 1] ||
        b->size() != spec.widths[static_cast<std::size_t>(l) + 1])
      throw ContractError("param set does not match mlp spec");
  }
}

Tensor mlp_eval(const ParamSet& params, const MlpSpec& spec, const Tensor& input) {
  if (input.rank() != 2 || input.cols() != spec.input_width())
    throw ShapeError("mlp_eval: input width " + input.shape_str() + " does not match spec");
  const int batch = input.rows();
  std::vector<double> cur(input.data().begin(), input.data().end());
  int cur_cols = input.cols();
  for (int l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = *params.find("W" + std::to_string(l));
    const Tensor& b = *params.find("b" + std::to_string(l));
    const int out_cols = w.cols();
    std::vector<double> next(static_cast<std::size_t>(batch) * out_cols);
    detail::matmul(cur.data(), batch, cur_cols, w.data().data(), out_cols, next.data());
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < out_cols; ++j) next[static_cast<std::size_t>(i) * out_cols + j] += b[j];
    const bool last = (l == spec.layer_count() - 1);
    if (!last) {
      for (double& v : next) v = std::tanh(v);
    } else {
      switch (spec.output) {
        case OutputActivation::identity: break;
        case OutputActivation::sigmoid:
          for (double& v : next) v = detail::sigmoid(v);
          break;
        case OutputActivation::softplus:
          for (double& v : next) v = detail::softplus(v);
          break;
      }
    }
    cur = std::move(next);
    cur_cols = out_cols;
  }
  return Tensor::unchecked({batch, cur_cols}, std::move(cur));
}

Var MlpVars::find(std::string_view name) const {
  for (const auto& [n, v] : entries)
    if (n == name) return v;
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

MlpVars bind_params(Tape& tape, const ParamSet& params, bool requires_grad) {
  MlpVars vars;
  vars.entries.reserve(params.entries.size());
  for (const auto& [name, tensor] : params.entries)
    vars.entries.emplace_back(name, tape.leaf(tensor, requires_grad));
  return vars;
}

Var mlp_apply(Tape& tape, const MlpVars& vars, const MlpSpec& spec, Var input) {
  if (tape.value(input).cols() != spec.input_width())
    throw ShapeError("mlp_apply: input width does not match spec");
  Var cur = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    cur = tape.matmul(cur, vars.find("W" + std::to_string(l)));
    cur = tape.add_bias(cur, vars.find("b" + std::to_string(l)));
    const bool last = (l == spec.layer_count() - 1);
    if (!last) {
      cur = tape.tanh(cur);
    } else {
      switch (spec.output) {
        case OutputActivation::identity: break;
        case OutputActivation::sigmoid: cur = tape.sigmoid(cur); break;
        case OutputActivation::softplus: cur = tape.softplus(cur); break;
      }
    }
  }
  return cur;
}

ParamSet collect_grads(const Tape& tape, const MlpVars& vars, const ParamSet& like) {
  ParamSet grads;
  grads.entries.reserve(like.entries.size());
  for (const auto& [name, tensor] : like.entries)
    grads.entries.emplace_back(name, tape.grad(vars.find(name)));
  return grads;
}

Policy make_policy(int state_dim, int action_dim, const std::vector<int>& hidden,
                   double action_bound, std::uint64_t seed) {
  Policy p;
  p.spec.widths.push_back(state_dim);
  for (int w : hidden) p.spec.widths.push_back(w);
  p.spec.widths.push_back(action_dim);
  p.spec.output = OutputActivation::identity;
  p.action_bound = action_bound;
  p.params = init_params(p.spec, seed);
  // Shrink the output layer so the fresh policy acts near zero; early
  // full-swing actions produce wild trajectories that poison the first
  // generative fits.
  const std::string last = std::to_string(p.spec.layer_count() - 1);
  for (double& v : p.params.find("W" + last)->data()) v *= 0.01;
  return p;
}

Tensor policy_eval(const Policy& policy, const Tensor& states) {
  Tensor out = mlp_eval(policy.params, policy.spec, states);
  for (double& v : out.data()) v = policy.action_bound * std::tanh(v);
  return out;
}

std::vector<double> policy_action(const Policy& policy, const std::vector<double>& state) {
  const Tensor out = policy_eval(policy, Tensor::row(state));
  return {out.data().begin(), out.data().end()};
}

Var policy_apply(Tape& tape, const MlpVars& vars, const Policy& policy, Var states) {
  return tape.scale(tape.tanh(mlp_apply(tape, vars, policy.spec, states)),
                    policy.action_bound);
}

AdamState make_adam_state(const ParamSet& like, const AdamConfig& cfg) {
  AdamState state;
  state.cfg = cfg;
  for (const auto& [name, tensor] : like.entries) {
    state.m.entries.emplace_back(name, Tensor::zeros(tensor.shape()));
    state.v.entries.emplace_back(name, Tensor::zeros(tensor.shape()));
  }
  return state;
}

std::pair<ParamSet, AdamState> adam_step(const ParamSet& params,
                                         const ParamSet& grads,
                                         const AdamState& state) {
  if (!params.same_layout(grads) || !params.same_layout(state.m))
    throw ContractError("adam_step: parameter/gradient layouts differ");
  ParamSet out = params;
  AdamState next = state;
  next.step = state.step + 1;
  const auto& cfg = state.cfg;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(next.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(next.step));
  for (std::size_t e = 0; e < params.entries.size(); ++e) {
    const Tensor& g = grads.entries[e].second;
    if (!g.all_finite())
      throw NumericError("adam_step: non-finite gradient for parameter '" +
                         grads.entries[e].first + "'");
    Tensor& p = out.entries[e].second;
    Tensor& m = next.m.entries[e].second;
    Tensor& v = next.v.entries[e].second;
    for (int i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  return {std::move(out), std::move(next)};
}

}  // namespace sbrl
