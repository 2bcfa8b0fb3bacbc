#pragma once

// Alternating adversarial-imitation training over the reasoning MDP.
//
// Each epoch shuffles the training facts (one query per fact, direction
// drawn per epoch) and walks them in batches:
//   1. sampled rollouts from the current policy,
//   2. demonstration sampling for every query in the batch,
//   3. one discriminator step on the semantic critic (gradient-penalty
//      objective over path matrices) plus the logic critic (log loss over
//      rule truths), path inputs detached,
//   4. per-step shaped rewards: the terminal hit indicator on the final
//      decision step plus the noise-gated discriminator margins evaluated on
//      each path prefix, blended by alpha,
//   5. one REINFORCE step: mean over trajectories of
//      sum_l log pi(a_l|s_l) * (G_l - baseline), with G_l the
//      gamma-discounted reward-to-go and the baseline an exponential moving
//      average (zero-initialized) of batch mean returns.
// Queries whose demonstration search comes back empty fall back to the
// terminal-only reward; terminal-only mode skips steps 2-4 entirely.
//
// All randomness derives from (seed, epoch, index) mixes, so a fixed seed
// reproduces every metric bit-for-bit.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tkgr/adversary.hpp"
#include "tkgr/dataset.hpp"
#include "tkgr/env.hpp"
#include "tkgr/eval.hpp"
#include "tkgr/mfar.hpp"
#include "tkgr/params.hpp"
#include "tkgr/policy.hpp"
#include "tkgr/sampler.hpp"

namespace tkgr {

enum class RewardMode { adaptive, terminal_only };

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  double policy_lr = 1e-3;
  double disc_lr = 1e-4;
  double alpha = 0.5;    // semantic share of the shaped reward
  double lambda = 5.0;   // gradient-penalty weight
  std::size_t max_steps = 3;   // L, reasoning-path budget
  double bandwidth = 1.0;      // b, hop-attenuation bandwidth
  std::size_t raga_heads = 8;  // M
  std::size_t tsan_heads = 8;  // M'
  RewardMode reward_mode = RewardMode::adaptive;
  bool no_mfar = false;  // static entity embeddings everywhere
  bool no_raga = false;  // static embeddings feed the temporal stage
  bool no_tsan = false;  // latest-snapshot graph attention output only
  double gamma = 0.95;          // reward discount
  double baseline_decay = 0.9;  // EMA factor of the REINFORCE baseline
  double clip_norm = 5.0;       // policy gradient clipping (0 disables)
  std::uint64_t seed = 7;

  // Geometry and budgets shared with the component configs.
  std::size_t dim = 200;         // D and F'
  std::size_t hidden_dim = 200;  // recurrent policy state
  std::size_t beam_width = 40;
  std::size_t action_cap = 50;
  std::size_t neighbor_cap = 10;
  std::size_t window = 60;
  std::size_t max_hop = 2;
  std::size_t demos_per_query = 8;
  TimeConstraint time_constraint = TimeConstraint::strict;

  void validate() const;

  // Flat string form used by checkpoints and config files; `from_strings`
  // starts from defaults, rejects unknown keys, and validates.
  std::map<std::string, std::string> to_strings() const;
  static TrainConfig from_strings(const std::map<std::string, std::string>& kv);
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_reward = 0.0;    // mean final-decision shaped reward, in [0, 2]
  double mean_terminal = 0.0;  // mean gold-hit indicator, in [0, 1]
  double loss_sem = 0.0;       // mean semantic-critic loss over updates
  double loss_logic = 0.0;     // mean logic-critic loss over updates
  double valid_mrr = 0.0;
  double seconds = 0.0;
};

class Trainer {
 public:
  // `initial` adopts checkpointed parameters; shapes must match the
  // dataset-derived geometry.
  Trainer(const Dataset& data, const TrainConfig& cfg,
          ParameterStore&& initial = ParameterStore{});

  const TrainConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  Representer& representer() { return rep_; }
  Env& environment() { return env_; }
  Policy& policy() { return policy_; }
  Adversary& adversary() { return adversary_; }
  double baseline() const { return baseline_; }

  // REINFORCE gradients of the batch surrogate at the current baseline;
  // trajectories must carry rewards and log-probs. No parameter change.
  ad::GradMap policy_gradients(const std::vector<Trajectory>& batch) const;

  // One optimizer step from `policy_gradients`, then the baseline update.
  // Returns the pre-clip gradient norm. An empty batch warns and is a no-op;
  // a batch whose advantages are all exactly zero updates the baseline only.
  double policy_update(const std::vector<Trajectory>& batch);

  EpochMetrics train_epoch(std::size_t epoch);

  static void write_metrics_header(std::ostream& out);
  static void write_metrics_row(std::ostream& out, const EpochMetrics& row);

 private:
  std::vector<double> rewards_to_go(const Trajectory& trajectory) const;
  void shape_rewards(Trajectory& trajectory, bool has_demos, Rng& noise_rng);

  const Dataset& data_;
  TrainConfig cfg_;
  TemporalKG kg_;
  ParameterStore store_;
  Rng init_rng_;
  Representer rep_;
  Env env_;
  Policy policy_;
  Adversary adversary_;
  AdamOptimizer policy_opt_;
  AdamOptimizer disc_opt_;
  double baseline_ = 0.0;
};

// Parameter checkpoint with the training configuration embedded in the
// container's config block.
void save_train_checkpoint(const ParameterStore& store, const TrainConfig& cfg,
                           const std::filesystem::path& path);
std::pair<ParameterStore, TrainConfig> load_train_checkpoint(
    const std::filesystem::path& path);

}  // namespace tkgr
