#include "tkgr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <utility>

#include "tkgr/common.hpp"

namespace tkgr {

namespace {

TrainConfig checked(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}

MfarConfig mfar_config(const TrainConfig& cfg) {
  MfarConfig m;
  m.dim = cfg.dim;
  m.raga_heads = cfg.raga_heads;
  m.tsan_heads = cfg.tsan_heads;
  m.max_hop = cfg.max_hop;
  m.neighbor_cap = cfg.neighbor_cap;
  m.window = cfg.window;
  m.bandwidth = cfg.bandwidth;
  m.use_mfar = !cfg.no_mfar;
  m.use_raga = !cfg.no_raga;
  m.use_tsan = !cfg.no_tsan;
  m.sample_seed = cfg.seed;
  return m;
}

EnvConfig env_config(const TrainConfig& cfg) {
  return EnvConfig{cfg.max_steps, cfg.action_cap, cfg.time_constraint};
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty() || value.front() == '-')
    fail(ErrorKind::config,
         strf("key '%s' expects a non-negative integer, got '%s'", key.c_str(),
              value.c_str()));
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty())
    fail(ErrorKind::config, strf("key '%s' expects a number, got '%s'",
                                 key.c_str(), value.c_str()));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorKind::config, strf("key '%s' expects true/false, got '%s'",
                               key.c_str(), value.c_str()));
}

// One entry per config key keeps to_strings/from_strings in lockstep.
struct ConfigField {
  const char* key;
  std::function<std::string(const TrainConfig&)> write;
  std::function<void(TrainConfig&, const std::string&)> read;
};

std::string fmt_u64(std::uint64_t v) { return strf("%llu", (unsigned long long)v); }
std::string fmt_f(double v) { return strf("%.17g", v); }
std::string fmt_b(bool v) { return v ? "true" : "false"; }

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"epochs", [](const TrainConfig& c) { return fmt_u64(c.epochs); },
       [](TrainConfig& c, const std::string& v) { c.epochs = parse_u64("epochs", v); }},
      {"batch_size", [](const TrainConfig& c) { return fmt_u64(c.batch_size); },
       [](TrainConfig& c, const std::string& v) { c.batch_size = parse_u64("batch_size", v); }},
      {"policy_lr", [](const TrainConfig& c) { return fmt_f(c.policy_lr); },
       [](TrainConfig& c, const std::string& v) { c.policy_lr = parse_double("policy_lr", v); }},
      {"disc_lr", [](const TrainConfig& c) { return fmt_f(c.disc_lr); },
       [](TrainConfig& c, const std::string& v) { c.disc_lr = parse_double("disc_lr", v); }},
      {"alpha", [](const TrainConfig& c) { return fmt_f(c.alpha); },
       [](TrainConfig& c, const std::string& v) { c.alpha = parse_double("alpha", v); }},
      {"lambda", [](const TrainConfig& c) { return fmt_f(c.lambda); },
       [](TrainConfig& c, const std::string& v) { c.lambda = parse_double("lambda", v); }},
      {"max_steps", [](const TrainConfig& c) { return fmt_u64(c.max_steps); },
       [](TrainConfig& c, const std::string& v) { c.max_steps = parse_u64("max_steps", v); }},
      {"bandwidth", [](const TrainConfig& c) { return fmt_f(c.bandwidth); },
       [](TrainConfig& c, const std::string& v) { c.bandwidth = parse_double("bandwidth", v); }},
      {"raga_heads", [](const TrainConfig& c) { return fmt_u64(c.raga_heads); },
       [](TrainConfig& c, const std::string& v) { c.raga_heads = parse_u64("raga_heads", v); }},
      {"tsan_heads", [](const TrainConfig& c) { return fmt_u64(c.tsan_heads); },
       [](TrainConfig& c, const std::string& v) { c.tsan_heads = parse_u64("tsan_heads", v); }},
      {"reward_mode",
       [](const TrainConfig& c) {
         return std::string(c.reward_mode == RewardMode::adaptive ? "adaptive"
                                                                  : "terminal-only");
       },
       [](TrainConfig& c, const std::string& v) {
         if (v == "adaptive") c.reward_mode = RewardMode::adaptive;
         else if (v == "terminal-only") c.reward_mode = RewardMode::terminal_only;
         else
           fail(ErrorKind::config,
                strf("key 'reward_mode' expects adaptive|terminal-only, got '%s'",
                     v.c_str()));
       }},
      {"no_mfar", [](const TrainConfig& c) { return fmt_b(c.no_mfar); },
       [](TrainConfig& c, const std::string& v) { c.no_mfar = parse_bool("no_mfar", v); }},
      {"no_raga", [](const TrainConfig& c) { return fmt_b(c.no_raga); },
       [](TrainConfig& c, const std::string& v) { c.no_raga = parse_bool("no_raga", v); }},
      {"no_tsan", [](const TrainConfig& c) { return fmt_b(c.no_tsan); },
       [](TrainConfig& c, const std::string& v) { c.no_tsan = parse_bool("no_tsan", v); }},
      {"gamma", [](const TrainConfig& c) { return fmt_f(c.gamma); },
       [](TrainConfig& c, const std::string& v) { c.gamma = parse_double("gamma", v); }},
      {"baseline_decay", [](const TrainConfig& c) { return fmt_f(c.baseline_decay); },
       [](TrainConfig& c, const std::string& v) {
         c.baseline_decay = parse_double("baseline_decay", v);
       }},
      {"clip_norm", [](const TrainConfig& c) { return fmt_f(c.clip_norm); },
       [](TrainConfig& c, const std::string& v) { c.clip_norm = parse_double("clip_norm", v); }},
      {"seed", [](const TrainConfig& c) { return fmt_u64(c.seed); },
       [](TrainConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      {"dim", [](const TrainConfig& c) { return fmt_u64(c.dim); },
       [](TrainConfig& c, const std::string& v) { c.dim = parse_u64("dim", v); }},
      {"hidden_dim", [](const TrainConfig& c) { return fmt_u64(c.hidden_dim); },
       [](TrainConfig& c, const std::string& v) { c.hidden_dim = parse_u64("hidden_dim", v); }},
      {"beam_width", [](const TrainConfig& c) { return fmt_u64(c.beam_width); },
       [](TrainConfig& c, const std::string& v) { c.beam_width = parse_u64("beam_width", v); }},
      {"action_cap", [](const TrainConfig& c) { return fmt_u64(c.action_cap); },
       [](TrainConfig& c, const std::string& v) { c.action_cap = parse_u64("action_cap", v); }},
      {"neighbor_cap", [](const TrainConfig& c) { return fmt_u64(c.neighbor_cap); },
       [](TrainConfig& c, const std::string& v) { c.neighbor_cap = parse_u64("neighbor_cap", v); }},
      {"window", [](const TrainConfig& c) { return fmt_u64(c.window); },
       [](TrainConfig& c, const std::string& v) { c.window = parse_u64("window", v); }},
      {"max_hop", [](const TrainConfig& c) { return fmt_u64(c.max_hop); },
       [](TrainConfig& c, const std::string& v) { c.max_hop = parse_u64("max_hop", v); }},
      {"demos_per_query", [](const TrainConfig& c) { return fmt_u64(c.demos_per_query); },
       [](TrainConfig& c, const std::string& v) {
         c.demos_per_query = parse_u64("demos_per_query", v);
       }},
      {"time_constraint",
       [](const TrainConfig& c) {
         return std::string(c.time_constraint == TimeConstraint::strict ? "strict"
                                                                        : "paper");
       },
       [](TrainConfig& c, const std::string& v) {
         if (v == "strict") c.time_constraint = TimeConstraint::strict;
         else if (v == "paper") c.time_constraint = TimeConstraint::paper;
         else
           fail(ErrorKind::config,
                strf("key 'time_constraint' expects strict|paper, got '%s'",
                     v.c_str()));
       }},
  };
  return fields;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorKind::config, "epochs must be at least 1");
  if (batch_size == 0) fail(ErrorKind::config, "batch_size must be at least 1");
  if (policy_lr <= 0.0 || disc_lr <= 0.0)
    fail(ErrorKind::config, "learning rates must be positive");
  if (alpha < 0.0 || alpha > 1.0)
    fail(ErrorKind::config, "alpha must lie in [0, 1]");
  if (lambda < 0.0) fail(ErrorKind::config, "lambda must be non-negative");
  if (gamma <= 0.0 || gamma > 1.0)
    fail(ErrorKind::config, "gamma must lie in (0, 1]");
  if (baseline_decay < 0.0 || baseline_decay >= 1.0)
    fail(ErrorKind::config, "baseline_decay must lie in [0, 1)");
  if (clip_norm < 0.0) fail(ErrorKind::config, "clip_norm must be non-negative");
  if (bandwidth <= 0.0) fail(ErrorKind::config, "bandwidth must be positive");
  if (max_steps < 3)
    fail(ErrorKind::config,
         "max_steps must be at least 3 (the path critic convolves a 3-row kernel)");
  if (dim == 0 || hidden_dim == 0)
    fail(ErrorKind::config, "dim and hidden_dim must be positive");
  if (2 * dim < 5)
    fail(ErrorKind::config,
         "dim must be at least 3 (the path critic kernel spans 5 columns)");
  if (beam_width == 0) fail(ErrorKind::config, "beam_width must be at least 1");
  if (action_cap < 2)
    fail(ErrorKind::config, "action_cap must admit at least one edge beyond the stop action");
  if (neighbor_cap == 0 || window == 0 || max_hop == 0)
    fail(ErrorKind::config, "neighbor_cap, window, and max_hop must be positive");
  if (demos_per_query == 0)
    fail(ErrorKind::config, "demos_per_query must be at least 1");
  if (raga_heads == 0 || tsan_heads == 0)
    fail(ErrorKind::config, "attention head counts must be positive");
  if (dim % raga_heads != 0 || dim % tsan_heads != 0)
    fail(ErrorKind::config, "dim must be divisible by both head counts");
}

std::map<std::string, std::string> TrainConfig::to_strings() const {
  std::map<std::string, std::string> out;
  for (const auto& f : config_fields()) out[f.key] = f.write(*this);
  return out;
}

TrainConfig TrainConfig::from_strings(
    const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) {
    const auto& fields = config_fields();
    const auto it =
        std::find_if(fields.begin(), fields.end(),
                     [&](const ConfigField& f) { return key == f.key; });
    if (it == fields.end())
      fail(ErrorKind::config, strf("unknown config key '%s'", key.c_str()));
    it->read(cfg, value);
  }
  cfg.validate();
  return cfg;
}

Trainer::Trainer(const Dataset& data, const TrainConfig& cfg,
                 ParameterStore&& initial)
    : data_(data),
      cfg_(checked(cfg)),
      kg_(TemporalKG::build(data.train, data.entities.size(),
                            data.num_base_relations())),
      store_(std::move(initial)),
      init_rng_(Rng::mix({cfg_.seed, 0x696e69747061726dULL})),
      rep_(kg_, store_, mfar_config(cfg_), init_rng_),
      env_(kg_, env_config(cfg_)),
      policy_(env_, rep_, store_,
              PolicyConfig{cfg_.hidden_dim, cfg_.beam_width}, init_rng_),
      adversary_(kg_, rep_, store_, cfg_.max_steps, init_rng_),
      policy_opt_(cfg_.policy_lr, cfg_.clip_norm),
      disc_opt_(cfg_.disc_lr) {
  for (const auto& name : store_.names()) {
    if (name.rfind("disc/", 0) == 0)
      disc_opt_.attach(store_.get(name));
    else
      policy_opt_.attach(store_.get(name));
  }
}

std::vector<double> Trainer::rewards_to_go(const Trajectory& trajectory) const {
  if (trajectory.rewards.size() != trajectory.steps.size())
    fail(ErrorKind::contract,
         "trajectory rewards are not aligned with its steps");
  std::vector<double> g(trajectory.rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = g.size(); i-- > 0;) {
    acc = trajectory.rewards[i] + cfg_.gamma * acc;
    g[i] = acc;
  }
  return g;
}

ad::GradMap Trainer::policy_gradients(
    const std::vector<Trajectory>& batch) const {
  if (batch.empty())
    fail(ErrorKind::contract, "policy gradients need a non-empty batch");
  std::vector<ad::Var> terms;
  for (const Trajectory& trajectory : batch) {
    const auto to_go = rewards_to_go(trajectory);
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
      const TrajectoryStep& step = trajectory.steps[i];
      if (step.forced || !step.log_prob) continue;
      const double advantage = to_go[i] - baseline_;
      if (advantage == 0.0) continue;  // exact-zero terms cannot move anything
      terms.push_back(ad::scale(step.log_prob, -advantage));
    }
  }
  if (terms.empty()) return {};
  const ad::Var loss = ad::scale(ad::sum(ad::concat(terms)),
                                 1.0 / static_cast<double>(batch.size()));
  return ad::backward(loss);
}

double Trainer::policy_update(const std::vector<Trajectory>& batch) {
  if (batch.empty()) {
    std::cerr << "warning: empty trajectory batch, skipping policy update\n";
    return 0.0;
  }
  const auto grads = policy_gradients(batch);
  double norm = 0.0;
  if (!grads.empty()) {
    norm = policy_opt_.step(grads);
    store_.bump_version();
  }
  double mean_return = 0.0;
  for (const Trajectory& trajectory : batch)
    mean_return += rewards_to_go(trajectory).front();
  mean_return /= static_cast<double>(batch.size());
  baseline_ = cfg_.baseline_decay * baseline_ +
              (1.0 - cfg_.baseline_decay) * mean_return;
  return norm;
}

void Trainer::shape_rewards(Trajectory& trajectory, bool has_demos,
                            Rng& noise_rng) {
  trajectory.terminal = env_.terminal_reward(trajectory);
  trajectory.rewards.assign(trajectory.steps.size(), 0.0);
  std::size_t last = 0;
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i)
    if (!trajectory.steps[i].forced) last = i;

  const bool shaped =
      cfg_.reward_mode == RewardMode::adaptive && has_demos;
  if (!shaped) {
    trajectory.rewards[last] = trajectory.terminal;
    return;
  }

  const auto [noise_sem, noise_rule] = Adversary::noise_scores(noise_rng);
  std::vector<ActionCandidate> prefix;
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    if (trajectory.steps[i].forced) continue;
    prefix.push_back(trajectory.steps[i].action);
    double sem = 0.0, logic = 0.0;
    {
      ad::NoGradGuard values_only;
      sem = adversary_
                .semantic_score(
                    adversary_.path_matrix(prefix, trajectory.query.time))
                ->value.item();
      logic = adversary_
                  .rule_truth(adversary_.path_to_rule(prefix, trajectory.query),
                              /*detach=*/true)
                  ->value.item();
    }
    const auto [r_sem, r_rule] =
        Adversary::gated_rewards(sem, logic, noise_sem, noise_rule);
    double r = cfg_.alpha * r_sem + (1.0 - cfg_.alpha) * r_rule;
    if (i == last) r += trajectory.terminal;
    trajectory.rewards[i] = r;
  }
}

EpochMetrics Trainer::train_epoch(std::size_t epoch) {
  const auto t_start = std::chrono::steady_clock::now();
  if (data_.train.empty())
    fail(ErrorKind::argument, "cannot train on an empty split");
  EpochMetrics metrics;
  metrics.epoch = epoch;

  Rng order_rng(Rng::mix({cfg_.seed, 0x71756572796f7264ULL, epoch}));
  const std::uint64_t rollout_master =
      Rng::mix({cfg_.seed, 0x726f6c6c6f757473ULL, epoch});
  Rng demo_rng(Rng::mix({cfg_.seed, 0x64656d6f73616d70ULL, epoch}));
  Rng noise_rng(Rng::mix({cfg_.seed, 0x6e6f697365747261ULL, epoch}));
  Rng mix_rng(Rng::mix({cfg_.seed, 0x657073696c6f6e73ULL, epoch}));

  // One query per training fact, direction drawn per epoch, then shuffled.
  std::vector<QueryTask> queries;
  queries.reserve(data_.train.size());
  for (const Quadruple& fact : data_.train)
    queries.push_back(order_rng.below(2) == 1
                          ? subject_query(fact, data_.num_base_relations())
                          : object_query(fact));
  for (std::size_t i = queries.size(); i > 1; --i)
    std::swap(queries[i - 1], queries[order_rng.below(i)]);

  const bool adaptive = cfg_.reward_mode == RewardMode::adaptive;
  double sum_reward = 0.0, sum_terminal = 0.0;
  double sum_sem = 0.0, sum_logic = 0.0;
  std::size_t disc_updates = 0;
  std::uint64_t query_index = 0;

  for (std::size_t begin = 0; begin < queries.size();
       begin += cfg_.batch_size) {
    const std::size_t end =
        std::min(begin + cfg_.batch_size, queries.size());
    std::vector<Trajectory> batch;
    batch.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k, ++query_index) {
      Rng rollout_stream = Policy::rollout_rng(rollout_master, query_index);
      batch.push_back(policy_.rollout(queries[k], Policy::RolloutMode::sample,
                                      rollout_stream));
    }

    std::vector<std::vector<Demonstration>> demos(batch.size());
    if (adaptive) {
      // Demonstrations use at most L-1 hops so that, once closed with the
      // same stop marker the policy emits, they fit the L-row path matrix.
      // Sharing the termination convention keeps the critics comparing path
      // content instead of keying on the stop row only one side would have.
      for (std::size_t k = 0; k < batch.size(); ++k)
        demos[k] =
            sample_demonstrations(env_, batch[k].query, cfg_.max_steps - 1,
                                  cfg_.demos_per_query, demo_rng);

      // Discriminator step: semantic critic over detached path matrices,
      // logic critic over detached rule truths.
      std::vector<ad::Var> gen_mats, demo_mats, gen_truths, demo_truths;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        std::vector<ActionCandidate> steps;
        for (const TrajectoryStep& s : batch[k].steps)
          if (!s.forced) steps.push_back(s.action);
        {
          ad::NoGradGuard values_only;
          gen_mats.push_back(ad::constant(
              adversary_.path_matrix(steps, batch[k].query.time)->value));
        }
        gen_truths.push_back(adversary_.rule_truth(
            adversary_.path_to_rule(steps, batch[k].query), /*detach=*/true));
        for (const Demonstration& demo : demos[k]) {
          std::vector<ActionCandidate> walk;
          for (const Quadruple& edge : demo.edges)
            walk.push_back({edge.r, edge.o, edge.t});
          walk.push_back(
              {kg_.stop_relation_id(), walk.back().entity, walk.back().time});
          {
            ad::NoGradGuard values_only;
            demo_mats.push_back(ad::constant(
                adversary_.path_matrix(walk, demo.query.time)->value));
          }
          demo_truths.push_back(adversary_.rule_truth(
              adversary_.path_to_rule(walk, demo.query), /*detach=*/true));
        }
      }
      if (!demo_mats.empty()) {
        const ad::Var sem = adversary_.semantic_disc_loss(
            gen_mats, demo_mats, cfg_.lambda, mix_rng);
        const ad::Var logic =
            Adversary::logic_disc_loss(gen_truths, demo_truths);
        const auto grads = ad::backward(ad::add(sem, logic));
        disc_opt_.step(grads);
        sum_sem += sem->value.item();
        sum_logic += logic->value.item();
        ++disc_updates;
      }
    }

    for (std::size_t k = 0; k < batch.size(); ++k) {
      shape_rewards(batch[k], !demos[k].empty(), noise_rng);
      sum_terminal += batch[k].terminal;
      for (std::size_t i = batch[k].steps.size(); i-- > 0;)
        if (!batch[k].steps[i].forced) {
          sum_reward += batch[k].rewards[i];
          break;
        }
    }

    policy_update(batch);
  }

  const auto n = static_cast<double>(queries.size());
  metrics.mean_reward = sum_reward / n;
  metrics.mean_terminal = sum_terminal / n;
  if (disc_updates > 0) {
    metrics.loss_sem = sum_sem / static_cast<double>(disc_updates);
    metrics.loss_logic = sum_logic / static_cast<double>(disc_updates);
  }
  if (!data_.valid.empty())
    metrics.valid_mrr =
        evaluate(policy_, data_.valid, data_, cfg_.beam_width).mrr;
  metrics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  for (double v : {metrics.mean_reward, metrics.mean_terminal,
                   metrics.loss_sem, metrics.loss_logic, metrics.valid_mrr,
                   metrics.seconds})
    if (!std::isfinite(v))
      fail(ErrorKind::contract, "epoch metrics must be finite");
  return metrics;
}

void Trainer::write_metrics_header(std::ostream& out) {
  out << "epoch,mean_reward,mean_terminal,loss_sem,loss_logic,valid_mrr,"
         "seconds\n";
}

void Trainer::write_metrics_row(std::ostream& out, const EpochMetrics& row) {
  out << row.epoch << ',' << strf("%.17g", row.mean_reward) << ','
      << strf("%.17g", row.mean_terminal) << ','
      << strf("%.17g", row.loss_sem) << ',' << strf("%.17g", row.loss_logic)
      << ',' << strf("%.17g", row.valid_mrr) << ','
      << strf("%.3f", row.seconds) << '\n';
}

void save_train_checkpoint(const ParameterStore& store, const TrainConfig& cfg,
                           const std::filesystem::path& path) {
  save_checkpoint(store, cfg.to_strings(), path);
}

std::pair<ParameterStore, TrainConfig> load_train_checkpoint(
    const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  ParameterStore store = load_checkpoint(path, kv);
  return {std::move(store), TrainConfig::from_strings(kv)};
}

}  // namespace tkgr
