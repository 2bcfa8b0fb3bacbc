#pragma once

// Named trainable parameters, a first-order adaptive-moment optimizer with
// optional global-norm gradient clipping, and a binary checkpoint container.
//
// `create` is idempotent: when the store already holds a tensor under the
// requested name (e.g. loaded from a checkpoint), the existing values are
// adopted after a shape check. Model constructors therefore work unchanged
// for both fresh initialization and resume.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tkgr/autodiff.hpp"
#include "tkgr/rng.hpp"

namespace tkgr {

class ParameterStore {
 public:
  // Uniform init in [-scale, scale]; scale <= 0 picks sqrt(6 / (fan_in + fan_out)).
  ad::Var create(const std::string& name, const std::vector<std::size_t>& shape,
                 Rng& rng, double scale = 0.0);
  ad::Var zeros(const std::string& name, const std::vector<std::size_t>& shape);

  bool has(const std::string& name) const { return by_name_.contains(name); }
  ad::Var get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t total_elements() const;

  // Monotone counter bumped after each optimizer step that can change any
  // representation input; memoized representations key on it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  friend ParameterStore load_checkpoint(const std::filesystem::path&,
                                        std::map<std::string, std::string>&);
  ad::Var insert_raw(const std::string& name, Tensor value);
  std::map<std::string, ad::Var> by_name_;
  std::vector<std::string> order_;  // insertion order, for stable iteration
  std::uint64_t version_ = 0;
};

struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables clipping

  explicit AdamOptimizer(double learning_rate, double clip = 0.0)
      : lr(learning_rate), clip_norm(clip) {}

  void attach(const ad::Var& param);
  void attach_all(const ParameterStore& store);  // every param, insertion order

  // Applies one update from the gradient map (missing entries count as zero).
  // Returns the pre-clip global gradient norm.
  double step(const ad::GradMap& grads);

  const std::vector<ad::Var>& params() const { return params_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  std::uint64_t steps_ = 0;
};

// Checkpoint container: magic, format version, config block (string pairs),
// per-parameter records (name, dtype = 64-bit float, shape, row-major
// payload), footer. Corrupt or truncated files raise integrity errors naming
// the failing record.
void save_checkpoint(const ParameterStore& store,
                     const std::map<std::string, std::string>& config,
                     const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path,
                               std::map<std::string, std::string>& config_out);

}  // namespace tkgr
