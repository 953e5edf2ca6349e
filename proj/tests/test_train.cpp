#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "interacte/checkpoint.hpp"
#include "interacte/error.hpp"
#include "interacte/train.hpp"

using namespace interacte;

namespace {

ModelParams<double> scalar_params(double v) {
  ModelParams<double> p;
  p.entity = Tensor<double>({1}, v);
  p.relation = Tensor<double>({1}, v);
  p.filters = Tensor<double>({1}, v);
  p.projection = Tensor<double>({1}, v);
  p.bias = Tensor<double>({1}, v);
  return p;
}

KnowledgeGraph synthetic() {
  SyntheticSpec spec;
  spec.compositions = true;
  return generate_synthetic_kg(spec);
}

ModelConfig fast_model() {
  ModelConfig c;
  c.d_w = 2;
  c.d_h = 4;
  c.n_filters = 4;
  c.input_dropout = 0.1;
  c.hidden_dropout = 0.2;
  c.precision = Precision::kFloat64;
  return c;
}

TrainConfig fast_train() {
  TrainConfig t;
  t.batch_size = 32;
  t.max_epochs = 4;
  t.eval_every = 2;
  t.patience = 10;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_CASE("Adam first step moves each coordinate by the learning rate") {
  auto p = scalar_params(0.0);
  auto g = scalar_params(1.0);
  auto state = make_adam_state(p);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(p, g, state, cfg);
  CHECK(state.step == 1);
  for (auto& [name, t] : p.named()) CHECK(t->data[0] == doctest::Approx(-0.1).epsilon(1e-6));

  // The bias-corrected step stays at lr for a constant gradient.
  adam_step(p, g, state, cfg);
  CHECK(p.entity.data[0] == doctest::Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("Adam with zero gradients leaves parameters unchanged") {
  auto p = scalar_params(0.3);
  auto g = scalar_params(0.0);
  auto state = make_adam_state(p);
  adam_step(p, g, state, TrainConfig{});
  CHECK(state.step == 1);
  CHECK(p == scalar_params(0.3));
}

TEST_CASE("Adam l2 adds weight times parameter to the gradient") {
  auto p = scalar_params(2.0);
  auto g = scalar_params(0.0);
  auto state = make_adam_state(p);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.l2 = 0.5;
  adam_step(p, g, state, cfg);
  CHECK(p.entity.data[0] == doctest::Approx(1.9).epsilon(1e-6));
}

TEST_CASE("non-finite gradient aborts without touching state") {
  auto p = scalar_params(1.0);
  auto g = scalar_params(0.5);
  g.filters.data[0] = std::nan("");
  auto state = make_adam_state(p);
  try {
    adam_step(p, g, state, TrainConfig{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("filters") != std::string::npos);
  }
  CHECK(p == scalar_params(1.0));
  CHECK(state.step == 0);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.learning_rate = -1.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("training groups hold every train answer") {
  auto kg = synthetic();
  for (bool inverse : {false, true}) {
    auto groups = build_train_groups(kg, inverse);
    std::map<std::pair<EntityId, RelationId>, std::set<EntityId>> expected;
    const auto nr = static_cast<RelationId>(kg.num_relations());
    for (const Triple& t : kg.train) {
      expected[{t.s, t.r}].insert(t.o);
      if (inverse) expected[{t.o, t.r + nr}].insert(t.s);
    }
    CHECK(groups.size() == expected.size());
    for (const auto& g : groups) {
      const auto& want = expected.at({g.query.entity, g.query.relation});
      CHECK(g.targets == std::vector<EntityId>(want.begin(), want.end()));
    }
  }
}

TEST_CASE("zero epochs returns the initial parameters and baseline metrics") {
  auto kg = synthetic();
  auto tc = fast_train();
  tc.max_epochs = 0;
  auto res = train_loop<double>(kg, fast_model(), tc);
  CHECK(res.epochs_run == 0);
  CHECK(res.evaluations == 1);
  CHECK(res.best_epoch == 0);
  CHECK(res.best_params == init_params<double>(fast_model(), kg.num_entities(), kg.num_relations(), tc.seed));
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].metrics.has_value());
}

TEST_CASE("patience 1 with a frozen model stops after two evaluations") {
  auto kg = synthetic();
  auto tc = fast_train();
  tc.learning_rate = 0.0;
  tc.patience = 1;
  tc.eval_every = 1;
  tc.max_epochs = 50;
  auto res = train_loop<double>(kg, fast_model(), tc);
  CHECK(res.evaluations == 2);
  CHECK(res.stopped_early);
  CHECK(res.epochs_run == 1);
}

TEST_CASE("loss decreases over the first 20 epochs") {
  auto kg = synthetic();
  ModelConfig mc = fast_model();
  mc.precision = Precision::kFloat32;
  mc.n_filters = 8;
  auto tc = fast_train();
  tc.max_epochs = 20;
  tc.eval_every = 20;
  tc.batch_size = 16;
  auto res = train_loop<float>(kg, mc, tc);
  std::vector<double> losses;
  for (const auto& h : res.history) {
    if (h.loss) losses.push_back(*h.loss);
  }
  REQUIRE(losses.size() == 20);
  std::vector<double> sorted = losses;
  std::nth_element(sorted.begin(), sorted.begin() + 10, sorted.end());
  const double median = 0.5 * (sorted[10] + *std::max_element(sorted.begin(), sorted.begin() + 10));
  CHECK(median < losses[0]);
}

TEST_CASE("training is deterministic") {
  auto kg = synthetic();
  auto a = train_loop<double>(kg, fast_model(), fast_train());
  auto b = train_loop<double>(kg, fast_model(), fast_train());
  CHECK(a.best_params == b.best_params);
  CHECK(a.final_state.params == b.final_state.params);
  CHECK(a.final_state.adam == b.final_state.adam);
  auto tc = fast_train();
  tc.seed = 4;
  CHECK_FALSE(train_loop<double>(kg, fast_model(), tc).final_state.params == a.final_state.params);
}

TEST_CASE("resuming from a serialized checkpoint is bit-exact") {
  auto kg = synthetic();
  const ModelConfig mc = fast_model();
  const TrainConfig tc = fast_train();
  auto full = train_loop<double>(kg, mc, tc);

  TrainHooks hooks;
  hooks.stop_after_epoch = 2;
  auto first = train_loop<double>(kg, mc, tc, std::nullopt, hooks);
  CHECK(first.epochs_run == 2);

  Checkpoint ck;
  add_train_state(ck, first.final_state);
  auto restored = load_train_state<double>(deserialize_checkpoint(serialize_checkpoint(ck)), mc, kg.num_entities(),
                                           kg.num_relations());
  CHECK(restored.params == first.final_state.params);
  CHECK(restored.adam == first.final_state.adam);

  auto second = train_loop<double>(kg, mc, tc, std::move(restored));
  CHECK(second.epochs_run == 4);
  CHECK(second.final_state.params == full.final_state.params);
  CHECK(second.final_state.adam == full.final_state.adam);
  CHECK(second.best_params == full.best_params);
  CHECK(second.best_epoch == full.best_epoch);

  Checkpoint empty;
  CHECK_THROWS_AS(load_train_state<double>(empty, mc, kg.num_entities(), kg.num_relations()), CheckpointError);
}

TEST_CASE("training needs train and valid triples") {
  auto kg = synthetic();
  kg.valid.clear();
  CHECK_THROWS_AS(train_loop<double>(kg, fast_model(), fast_train()), PreconditionError);
}
