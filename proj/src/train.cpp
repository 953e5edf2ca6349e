#include "interacte/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "interacte/error.hpp"
#include "interacte/rng.hpp"

namespace interacte {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 weight must be >= 0");
}

template <typename T>
AdamState<T> make_adam_state(const ModelParams<T>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, const TrainConfig& config) {
  auto p = params.named();
  const auto g = grads.named();
  auto m = state.m.named();
  auto v = state.v.named();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ShapeError("Adam: parameter, gradient and moment sets differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].second->shape != g[i].second->shape || p[i].second->shape != m[i].second->shape) {
      throw ShapeError("Adam: shape mismatch for '" + p[i].first + "'");
    }
    if (!all_finite(g[i].second->span())) throw NumericError("non-finite gradient in '" + g[i].first + "'");
  }
  state.step += 1;
  const double step = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, step);
  const double c2 = 1.0 - std::pow(config.beta2, step);
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  const T lr = static_cast<T>(config.learning_rate), eps = static_cast<T>(config.adam_eps);
  const T l2 = static_cast<T>(config.l2);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
  const T tiny = std::numeric_limits<T>::min();
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pv = p[i].second->data;
    const auto& gv = g[i].second->data;
    auto& mv = m[i].second->data;
    auto& vv = v[i].second->data;
    const auto n = static_cast<std::int64_t>(pv.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t jj = 0; jj < n; ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      const T grad = l2 > T(0) ? gv[j] + l2 * pv[j] : gv[j];
      T m = b1 * mv[j] + (T(1) - b1) * grad;
      T v = b2 * vv[j] + (T(1) - b2) * grad * grad;
      // Moments of long-idle parameters decay into the subnormal range, where
      // arithmetic is very slow; they are flushed to zero instead.
      if (std::abs(m) < tiny) m = T(0);
      if (v < tiny) v = T(0);
      mv[j] = m;
      vv[j] = v;
      const T mhat = mv[j] * inv_c1;
      const T vhat = vv[j] * inv_c2;
      pv[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::vector<TrainGroup> build_train_groups(const KnowledgeGraph& kg, bool inverse_relations) {
  const auto nr = static_cast<RelationId>(kg.num_relations());
  std::map<std::pair<RelationId, EntityId>, std::vector<EntityId>> groups;
  for (const Triple& t : kg.train) {
    groups[{t.r, t.s}].push_back(t.o);
    if (inverse_relations) groups[{t.r + nr, t.o}].push_back(t.s);
  }
  std::vector<TrainGroup> out;
  out.reserve(groups.size());
  for (auto& [key, targets] : groups) {
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    out.push_back({Query{key.second, key.first}, std::move(targets)});
  }
  return out;
}

template <typename T>
TrainResult<T> train_loop(const KnowledgeGraph& kg, const ModelConfig& model_config, const TrainConfig& config,
                          std::optional<TrainState<T>> resume, const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (kg.train.empty()) throw PreconditionError("training needs a non-empty train split");
  if (kg.valid.empty()) throw PreconditionError("training needs a non-empty valid split");

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

  const std::vector<TrainGroup> groups = build_train_groups(kg, model_config.inverse_relations);
  const FilterIndex filter(kg);

  TrainResult<T> result;
  TrainState<T> state;
  const bool resumed = resume.has_value();
  if (resumed) {
    state = std::move(*resume);
  } else {
    state.params = init_params<T>(model_config, kg.num_entities(), kg.num_relations(), config.seed);
    state.adam = make_adam_state(state.params);
  }
  InteractE<T> model(model_config, kg.num_entities(), kg.num_relations(), std::move(state.params));

  auto record = [&](HistoryRecord rec) {
    rec.wallclock_s = elapsed();
    if (hooks.on_record) hooks.on_record(rec);
    result.history.push_back(std::move(rec));
  };

  auto run_eval = [&](std::size_t epoch) {
    const EvaluationResult ev = evaluate(model, kg, Split::kValid, filter);
    ++result.evaluations;
    HistoryRecord rec;
    rec.epoch = epoch;
    rec.split = "valid";
    rec.metrics = ev.overall;
    record(rec);
    if (ev.overall.mrr > state.best_mrr) {
      state.best_mrr = ev.overall.mrr;
      state.best_epoch = epoch;
      state.best_params = model.params();
      state.bad_evals = 0;
    } else {
      ++state.bad_evals;
    }
  };

  if (!resumed) run_eval(0);

  std::vector<std::size_t> order(groups.size());
  bool stop = !resumed ? false : state.bad_evals >= config.patience;
  for (std::size_t epoch = state.epoch + 1; !stop && epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffler(derive_seed(config.seed, {stream::kShuffle, epoch}));
    shuffler.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Query> pairs;
      std::vector<std::vector<EntityId>> targets;
      for (std::size_t i = start; i < end; ++i) {
        pairs.push_back(groups[order[i]].query);
        targets.push_back(groups[order[i]].targets);
      }
      const std::uint64_t dropout_seed = derive_seed(config.seed, {stream::kDropout, state.adam.step});
      ForwardBackward<T> fb = model.forward_backward(pairs, targets, dropout_seed);
      if (!std::isfinite(fb.loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      adam_step(model.params(), fb.grads, state.adam, config);
      loss_sum += fb.loss * static_cast<double>(end - start);
    }
    state.epoch = epoch;
    HistoryRecord rec;
    rec.epoch = epoch;
    rec.split = "train";
    rec.loss = groups.empty() ? 0.0 : loss_sum / static_cast<double>(groups.size());
    record(rec);

    if (epoch % config.eval_every == 0) {
      run_eval(epoch);
      if (state.bad_evals >= config.patience) {
        stop = true;
        result.stopped_early = true;
      }
    }
    if (hooks.stop_after_epoch && epoch >= *hooks.stop_after_epoch) break;
  }

  result.epochs_run = state.epoch;
  result.best_valid_mrr = state.best_mrr;
  result.best_epoch = state.best_epoch;
  result.best_params = state.best_params;
  state.params = model.params();
  result.final_state = std::move(state);
  return result;
}

template AdamState<float> make_adam_state<float>(const ModelParams<float>&);
template AdamState<double> make_adam_state<double>(const ModelParams<double>&);
template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&, const TrainConfig&);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&,
                                const TrainConfig&);
template TrainResult<float> train_loop<float>(const KnowledgeGraph&, const ModelConfig&, const TrainConfig&,
                                              std::optional<TrainState<float>>, const TrainHooks&);
template TrainResult<double> train_loop<double>(const KnowledgeGraph&, const ModelConfig&, const TrainConfig&,
                                                std::optional<TrainState<double>>, const TrainHooks&);

}  // namespace interacte
