#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "interacte/eval.hpp"
#include "interacte/kgdata.hpp"
#include "interacte/model.hpp"

namespace interacte {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t eval_every = 5;
  std::size_t patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2 = 0.0;
  std::uint64_t seed = 0;

  // lr >= 0 (0 freezes the model), batch size, eval_every and patience >= 1.
  void validate() const;
};

template <typename T>
struct AdamState {
  ModelParams<T> m;
  ModelParams<T> v;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

template <typename T>
AdamState<T> make_adam_state(const ModelParams<T>& params);

// One bias-corrected Adam update. With l2 > 0, l2 * param is added to each
// gradient first. Throws NumericError naming the tensor on a non-finite
// gradient; params and state are left untouched in that case.
template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, const TrainConfig& config);

// One training example: an (entity, relation-row) query with every train-split
// answer as a positive.
struct TrainGroup {
  Query query;
  std::vector<EntityId> targets;
};

// Groups in (relation row, entity) order. With inverse relations each triple
// also contributes (o, r + |R|) -> s.
std::vector<TrainGroup> build_train_groups(const KnowledgeGraph& kg, bool inverse_relations);

struct HistoryRecord {
  std::size_t epoch = 0;
  std::string split;  // "train" for loss records, the eval split otherwise
  std::optional<double> loss;
  std::optional<RankingMetrics> metrics;
  double wallclock_s = 0.0;
};

template <typename T>
struct TrainState {
  ModelParams<T> params;
  AdamState<T> adam;
  std::size_t epoch = 0;  // completed epochs
  double best_mrr = -1.0;
  std::size_t best_epoch = 0;
  std::size_t bad_evals = 0;
  ModelParams<T> best_params;
};

template <typename T>
struct TrainResult {
  ModelParams<T> best_params;
  double best_valid_mrr = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t evaluations = 0;
  bool stopped_early = false;
  std::vector<HistoryRecord> history;
  TrainState<T> final_state;
};

struct TrainHooks {
  std::function<void(const HistoryRecord&)> on_record;
  // Stop after this many epochs even if max_epochs is larger (for resume tests).
  std::optional<std::size_t> stop_after_epoch;
};

// Epoch e shuffles the groups with derive_seed(seed, {kShuffle, e}); step s
// draws dropout masks from derive_seed(seed, {kDropout, s}). Filtered valid
// MRR is computed at epoch 0 and then every eval_every epochs; the best
// parameters are kept and training stops after `patience` evaluations without
// improvement.
template <typename T>
TrainResult<T> train_loop(const KnowledgeGraph& kg, const ModelConfig& model_config, const TrainConfig& config,
                          std::optional<TrainState<T>> resume = std::nullopt, const TrainHooks& hooks = {});

}  // namespace interacte
