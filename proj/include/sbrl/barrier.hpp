#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbrl/envs.hpp"
#include "sbrl/sdegen.hpp"

namespace sbrl {

// Soft barrier function B: R^n -> (0,1), sigmoid output by construction so
// the nonnegativity condition holds everywhere.
struct BarrierNet {
  MlpSpec spec;  // n -> 1, sigmoid output
  ParamSet params;
};

BarrierNet make_barrier(int state_dim, const std::vector<int>& hidden, std::uint64_t seed);

Tensor barrier_values(const BarrierNet& barrier, const Tensor& states);  // [B,1]
double barrier_value(const BarrierNet& barrier, const Vec& state);
Var barrier_apply(Tape& tape, const MlpVars& vars, const BarrierNet& barrier, Var states);

enum class EtaMode { max, mean };

// Upper bound of unsafe probability read off the barrier at sampled initial
// states: max over samples by default, or the sampled-mean variant of the
// translated constraints.
double eta_from_barrier(const BarrierNet& barrier, const std::vector<Vec>& init_samples,
                        EtaMode mode = EtaMode::max);

// The three sample means of the barrier training loss:
//   term1: mean B over initial samples
//   term2: mean (1 - B) over unsafe samples
//   term3: mean over trajectory states of (1/M) sum_j B(next_j) - B(s),
//          next_j a fresh one-step model sample (Lie/supermartingale term)
struct BarrierLossParts {
  Var init_term;
  Var unsafe_term;
  Var lie_term;
  Var total;
};

// Differentiable in the barrier parameters and, through the fresh one-step
// samples, in the policy parameters. Trajectory states themselves enter as
// constants.
BarrierLossParts barrier_loss_tape(Tape& tape, const BarrierNet& barrier, const MlpVars& bv,
                                   const GenerativeModel& model, const ModelVars& mv,
                                   const Policy& policy, const MlpVars& pv,
                                   const Tensor& init_states, const Tensor& unsafe_states,
                                   const Tensor& traj_states, int lie_samples, Rng& noise_rng);

struct BarrierLossValue {
  double init_term = 0.0;
  double unsafe_term = 0.0;
  double lie_term = 0.0;
  double total = 0.0;
};

BarrierLossValue barrier_loss(const BarrierNet& barrier, const GenerativeModel& model,
                              const Policy& policy, const Tensor& init_states,
                              const Tensor& unsafe_states, const Tensor& traj_states,
                              int lie_samples, Rng& noise_rng);

// Certification result. `eta` already carries the conservative 1/c scaling
// for the soft unsafe level c (= ville_threshold), so bound = 1 - eta and the
// Monte Carlo cross-check compares against eta directly.
struct SafetyCertificate {
  double eta = 1.0;
  double bound = 0.0;
  bool valid = false;
  std::string invalid_reason;

  struct ConditionStats {
    double init_mean = 0.0;   // mean B over S0 samples
    double init_max = 0.0;    // max B over S0 samples
    double unsafe_min = 0.0;  // min B over Su samples
    double unsafe_mean = 0.0;
    double lie_mean = 0.0;    // sample mean of the Lie estimates
    double lie_max = 0.0;
    double eta_raw_max = 0.0;   // unscaled eta, max convention
    double eta_raw_mean = 0.0;  // unscaled eta, mean convention
  } stats;

  struct McCrossCheck {
    double sup_exceed_freq = 0.0;  // P(sup_t B >= threshold) estimate
    double standard_error = 0.0;
    int samples = 0;
    double threshold = 0.0;
    bool consistent = false;  // freq <= eta + 3 SE (Ville)
  } mc;

  // Componentwise model/environment gap behind the region enlargement;
  // filled by the practical-bound pipeline only.
  std::vector<double> delta;
};

struct CertifyOptions {
  int init_samples = 1000;
  int unsafe_samples = 1000;
  int mc_rollouts = 10000;
  int lie_states = 1000;
  int lie_samples = 10;
  int horizon = 0;  // 0: use the environment horizon
  double unsafe_level = 0.95;    // required min B over Su samples
  double lie_tolerance = 1e-3;   // required bound on the Lie sample mean
  double ville_threshold = 0.95; // c in P(sup B >= c) <= B(s0)/c
  // eta convention: max initial barrier over rollouts (Theorem 1 reading) or
  // max barrier over every sampled rollout state (the practical-bound
  // convention).
  enum class Eta { initial_max, trajectory_max } eta = Eta::initial_max;
};

// Samples S0/Su/synthetic rollouts, fills the condition statistics, runs the
// Ville cross-check, and marks the certificate INVALID naming the failing
// condition if any check misses.
SafetyCertificate certify(const BarrierNet& barrier, const GenerativeModel& model,
                          const Policy& policy, const EnvSpec& env,
                          const CertifyOptions& options, Rng& rng);

}  // namespace sbrl
