#include <doctest.h>

#include <cmath>

#include "interacte/checkpoint.hpp"
#include "interacte/error.hpp"
#include "interacte/gradcheck.hpp"
#include "interacte/model.hpp"
#include "interacte/rng.hpp"
#include "test_util.hpp"

using namespace interacte;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_w = 2;
  c.d_h = 4;
  c.k = 3;
  c.t = 2;
  c.n_filters = 3;
  c.precision = Precision::kFloat64;
  return c;
}

std::vector<Query> all_queries(std::size_t ne, std::size_t rows) {
  std::vector<Query> q;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = 0; e < ne; ++e) q.push_back({static_cast<EntityId>(e), static_cast<RelationId>(r)});
  }
  return q;
}

void randomize(ModelParams<double>& p, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, t] : p.named()) {
    for (double& v : t->data) v = rng.uniform(-0.5, 0.5);
  }
}

}  // namespace

TEST_CASE("parameter shapes") {
  ModelConfig c;
  c.d_w = 10;
  c.d_h = 20;
  c.t = 1;
  c.n_filters = 32;
  auto shapes = param_shapes(c, 100, 7);
  REQUIRE(shapes.size() == 5);
  CHECK(shapes[0].second == std::vector<std::size_t>{100, 200});
  CHECK(shapes[1].second == std::vector<std::size_t>{14, 200});
  CHECK(shapes[2].second == std::vector<std::size_t>{32, 3, 3});
  CHECK(shapes[3].second == std::vector<std::size_t>{12800, 200});
  CHECK(shapes[4].second == std::vector<std::size_t>{100});

  c.inverse_relations = false;
  c.entity_bias = false;
  shapes = param_shapes(c, 100, 7);
  CHECK(shapes.size() == 4);
  CHECK(shapes[1].second == std::vector<std::size_t>{7, 200});
}

TEST_CASE("init is deterministic, Xavier-bounded and has zero bias") {
  ModelConfig c = small_config();
  auto a = init_params<double>(c, 10, 3, 5);
  auto b = init_params<double>(c, 10, 3, 5);
  CHECK(a == b);
  CHECK_FALSE(a == init_params<double>(c, 10, 3, 6));

  auto bound_ok = [](const Tensor<double>& t, double fan_in, double fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double m = 0.0;
    for (double v : t.data) m = std::max(m, std::abs(v));
    return m <= bound && m > 0.5 * bound;
  };
  const double d = 8.0;
  CHECK(bound_ok(a.entity, 10, d));
  CHECK(bound_ok(a.relation, 6, d));
  CHECK(bound_ok(a.filters, 9, 27));
  CHECK(bound_ok(a.projection, static_cast<double>(c.feature_size()), d));
  for (double v : a.bias.data) CHECK(v == 0.0);
}

TEST_CASE("all-zero parameters score one half") {
  ModelConfig c = small_config();
  auto p = zeros_like(init_params<double>(c, 6, 2, 0));
  InteractE<double> m(c, 6, 2, p);
  auto sb = m.score_1N(all_queries(6, 4), 0, false);
  for (double v : sb.scores.data) CHECK(v == 0.5);
}

TEST_CASE("score batch shape and range") {
  ModelConfig c = small_config();
  InteractE<double> m(c, 50, 3, 1);
  auto sb = m.score_1N({{0, 0}, {7, 4}}, 0, false);
  CHECK(sb.scores.shape == std::vector<std::size_t>{2, 50});
  for (double v : sb.scores.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(m.score_1N({{50, 0}}, 0, false), PreconditionError);
  CHECK_THROWS_AS(m.score_1N({{0, 6}}, 0, false), PreconditionError);
}

TEST_CASE("loss with uniform and near-perfect scores") {
  Tensor<double> half({2, 5}, 0.5);
  auto l = loss_bce_smoothed(half, {{1}, {0, 3}}, 0.1);
  CHECK(l.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Tensor<double> perfect({1, 4}, 0.0);
  perfect.data[2] = 1.0;
  auto p = loss_bce_smoothed(perfect, {{2}}, 0.0);
  CHECK(p.loss < 1e-10);
  // d/ds of -log(1-s) is 1/(1-s), of -log s is -1/s; both 1 in size here, over B*N = 4.
  CHECK(p.grad.data == std::vector<double>{0.25, 0.25, -0.25, 0.25});

  Tensor<double> almost({1, 4}, 1e-9);
  almost.data[2] = 1.0 - 1e-9;
  CHECK(loss_bce_smoothed(almost, {{2}}, 0.0).loss < 1e-8);
}

TEST_CASE("label smoothing targets") {
  // At score 0.5 the gradient is (0.5 - y') / 0.25 / (B N), so it reveals y'.
  Tensor<double> half({1, 10}, 0.5);
  auto l = loss_bce_smoothed(half, {{3}}, 0.1);
  for (std::size_t o = 0; o < 10; ++o) {
    const double y = 0.5 - l.grad.data[o] * 0.25 * 10.0;
    CHECK(y == doctest::Approx(o == 3 ? 0.91 : 0.01).epsilon(1e-12));
  }
  CHECK_THROWS_AS(loss_bce_smoothed(half, {{3}}, 1.0), PreconditionError);
}

TEST_CASE("forward_backward loss equals the standalone loss") {
  ModelConfig c = small_config();
  InteractE<double> m(c, 7, 2, 3);
  std::vector<Query> q{{0, 0}, {3, 1}, {6, 3}};
  std::vector<std::vector<EntityId>> targets{{1}, {2, 4}, {0}};
  auto fb = m.forward_backward(q, targets, 0);
  auto l = loss_bce_smoothed(m.score_1N(q, 0, false).scores, targets, c.label_smoothing);
  CHECK(fb.loss == doctest::Approx(l.loss).epsilon(1e-12));

  auto again = m.forward_backward(q, targets, 0);
  CHECK(again.grads == fb.grads);
}

TEST_CASE("pipeline gradient checks") {
  auto small = gradcheck_pipeline("small", small_gradcheck_config(), 4, 2, 0);
  MESSAGE("small pipeline max relative error " << small.report.max_rel_error);
  CHECK(small.passed());
  auto large = gradcheck_pipeline("large", large_gradcheck_config(), 12, 3, 1);
  CHECK(large.passed());

  ModelConfig dropout = small_gradcheck_config();
  dropout.hidden_dropout = 0.3;
  auto skipped = gradcheck_pipeline("dropout", dropout, 4, 2, 0);
  CHECK(skipped.report.skipped);
  CHECK_FALSE(skipped.report.status.empty());
}

TEST_CASE("swapping permutations and projection blocks leaves scores unchanged") {
  ModelConfig c = small_config();
  c.permutation_seed = 17;
  const std::size_t ne = 9, nr = 2;
  auto params = init_params<double>(c, ne, nr, 4);
  randomize(params, 8);
  InteractE<double> base(c, ne, nr, params);

  ReshapePlan swapped = make_plan(c);
  std::swap(swapped.perm_s[0], swapped.perm_s[1]);
  std::swap(swapped.perm_r[0], swapped.perm_r[1]);
  ModelParams<double> p2 = params;
  const std::size_t block = c.n_filters * c.grid_rows() * c.grid_cols() * c.dim();
  std::swap_ranges(p2.projection.data.begin(), p2.projection.data.begin() + block,
                   p2.projection.data.begin() + block);
  InteractE<double> other(c, ne, nr, p2, swapped);

  const auto q = all_queries(ne, 2 * nr);
  auto a = base.logits(q, 0, false);
  auto b = other.logits(q, 0, false);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(InteractE<double>(c, ne, nr, params, make_plan(ReshapeKind::kStack, 2, 4, 2, 0)), ShapeError);
}

TEST_CASE("entity bias moves its score monotonically") {
  ModelConfig c = small_config();
  InteractE<double> m(c, 6, 2, 2);
  const std::vector<Query> q{{1, 0}, {4, 3}};
  auto before = m.logits(q, 0, false);
  m.params().bias.data[2] += 0.25;
  auto after = m.logits(q, 0, false);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t o = 0; o < 6; ++o) {
      if (o == 2) {
        CHECK(after.data[b * 6 + o] > before.data[b * 6 + o]);
      } else {
        CHECK(after.data[b * 6 + o] == before.data[b * 6 + o]);
      }
    }
  }
}

TEST_CASE("one-at-a-time scoring equals batched scoring") {
  ModelConfig c = small_config();
  c.t = 3;
  InteractE<double> m(c, 11, 3, 9);
  const auto q = all_queries(11, 6);
  auto batched = m.score_1N(q, 0, false);
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto single = m.score_1N({q[i]}, 0, false);
    for (std::size_t o = 0; o < 11; ++o) REQUIRE(single.scores.data[o] == batched.scores.data[i * 11 + o]);
  }
}

TEST_CASE("dropout only acts in train mode") {
  ModelConfig c = small_config();
  c.input_dropout = 0.2;
  c.feature_dropout = 0.2;
  c.hidden_dropout = 0.3;
  InteractE<double> m(c, 8, 2, 1);
  const std::vector<Query> q{{0, 0}, {5, 2}};
  CHECK(m.logits(q, 1, false) == m.logits(q, 2, false));
  CHECK(m.logits(q, 1, true) == m.logits(q, 1, true));
  CHECK_FALSE(m.logits(q, 1, true) == m.logits(q, 2, true));
}

TEST_CASE("every ablation cell builds and scores") {
  for (ReshapeKind kind : {ReshapeKind::kStack, ReshapeKind::kAlternate, ReshapeKind::kChequer}) {
    for (std::size_t tau : {1u, 2u, 4u}) {
      if (kind != ReshapeKind::kAlternate && tau != 1) continue;
      for (PadMode mode : {PadMode::kZero, PadMode::kCircular}) {
        ModelConfig c;
        c.d_w = 4;
        c.d_h = 8;
        c.n_filters = 4;
        c.reshape = kind;
        c.tau = tau;
        c.conv_mode = mode;
        InteractE<float> m(c, 10, 2, 0);
        auto sb = m.score_1N({{0, 0}, {9, 3}}, 0, false);
        CHECK(all_finite<float>(sb.scores.span()));
      }
    }
  }
}

TEST_CASE("ConvE-shaped configuration: one identity permutation, stack, zero padding") {
  ModelConfig c = small_config();
  c.t = 1;
  c.reshape = ReshapeKind::kStack;
  c.conv_mode = PadMode::kZero;
  InteractE<double> m(c, 5, 2, 0);
  CHECK(m.plan().num_permutations() == 1);
  CHECK(m.params().projection.dim(0) == c.n_filters * 4 * 4);
  CHECK(all_finite<double>(m.score_1N({{0, 0}}, 0, false).scores.span()));
}

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.k = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.k = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.reshape = ReshapeKind::kAlternate;
  c.tau = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.hidden_dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("checkpoint round trip and corruption") {
  ModelConfig c = small_config();
  auto params = init_params<double>(c, 6, 2, 3);
  Checkpoint ck;
  ck.header["note"] = "test";
  add_params(ck, params);
  auto bytes = serialize_checkpoint(ck);
  auto back = deserialize_checkpoint(bytes);
  CHECK(back.header == ck.header);
  CHECK(load_params<double>(back, c, 6, 2) == params);
  CHECK(serialize_checkpoint(back) == bytes);

  // float32 storage converts on load.
  Checkpoint ck32;
  add_params(ck32, init_params<float>(c, 6, 2, 3));
  auto as_double = load_params<double>(deserialize_checkpoint(serialize_checkpoint(ck32)), c, 6, 2);
  CHECK(as_double.entity.shape == params.entity.shape);

  CHECK_THROWS_AS(load_params<double>(back, c, 7, 2), CheckpointError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), CheckpointError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), CheckpointError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CheckpointError);

  TempDir dir;
  write_checkpoint(dir / "c.bin", ck);
  CHECK(read_file(dir / "c.bin") == std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.bin"), CheckpointError);
}
