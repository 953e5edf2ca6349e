#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "interacte/kgdata.hpp"
#include "interacte/reshape.hpp"
#include "interacte/tensor.hpp"

namespace interacte {

enum class Precision { kFloat32, kFloat64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct ModelConfig {
  std::size_t d_w = 4;  // embedding grid units; d = d_w * d_h
  std::size_t d_h = 8;
  std::size_t t = 2;  // feature permutations
  std::size_t k = 3;  // kernel size (odd)
  std::size_t n_filters = 32;
  ReshapeKind reshape = ReshapeKind::kChequer;
  std::size_t tau = 1;
  PadMode conv_mode = PadMode::kCircular;
  double input_dropout = 0.0;
  double feature_dropout = 0.0;
  double hidden_dropout = 0.0;
  double label_smoothing = 0.1;
  bool inverse_relations = true;
  bool entity_bias = true;
  std::uint64_t permutation_seed = 0;
  Precision precision = Precision::kFloat32;

  std::size_t dim() const noexcept { return d_w * d_h; }
  std::size_t grid_rows() const noexcept { return 2 * d_w; }
  std::size_t grid_cols() const noexcept { return d_h; }
  std::size_t feature_size() const noexcept { return t * n_filters * grid_rows() * grid_cols(); }
  bool has_dropout() const noexcept { return input_dropout > 0 || feature_dropout > 0 || hidden_dropout > 0; }

  // Hard errors (ConfigError): zero sizes, even k, k larger than the grid,
  // tau not dividing d_w, dropout or smoothing outside [0, 1).
  void validate() const;
  // Soft warnings for values outside the published hyperparameter grid.
  std::vector<std::string> grid_warnings() const;
};

ReshapePlan make_plan(const ModelConfig& config);

template <typename T>
struct ModelParams {
  Tensor<T> entity;      // [|E|, d]
  Tensor<T> relation;    // [|R| (x2 with inverse relations), d]
  Tensor<T> filters;     // [n_filters, k, k], shared across permutation channels
  Tensor<T> projection;  // [t * n_filters * 2d_w * d_h, d]
  Tensor<T> bias;        // [|E|] or empty

  std::vector<std::pair<std::string, Tensor<T>*>> named();
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Shapes implied by (config, |E|, |R|), in named() order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(const ModelConfig& config,
                                                                          std::size_t num_entities,
                                                                          std::size_t num_relations);

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p);

// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero bias.
// Filters use fan_in = k*k, fan_out = n_filters*k*k.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::size_t num_entities, std::size_t num_relations,
                           std::uint64_t seed);

struct Query {
  EntityId entity = 0;  // subject (or object, with an inverse relation row)
  RelationId relation = 0;  // row in the relation table

  friend bool operator==(const Query&, const Query&) = default;
};

template <typename T>
struct ScoreBatch {
  std::vector<Query> pairs;
  Tensor<T> scores;  // [batch, |E|], post-sigmoid
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d scores
};

// Multi-label BCE against smoothed targets y' = (1-eps)*y + eps/|E|, averaged
// over batch and entities; log arguments clamped at 1e-12.
template <typename T>
LossResult<T> loss_bce_smoothed(const Tensor<T>& scores, const std::vector<std::vector<EntityId>>& targets,
                                double epsilon);

template <typename T>
struct ForwardBackward {
  double loss = 0.0;
  ModelParams<T> grads;
};

template <typename T>
class InteractE {
 public:
  InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations, std::uint64_t init_seed);
  InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations, ModelParams<T> params);
  // Explicit permutations instead of the ones drawn from the config's seed.
  InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations, ModelParams<T> params,
            ReshapePlan plan);

  const ModelConfig& config() const noexcept { return config_; }
  const ReshapePlan& plan() const noexcept { return plan_; }
  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  ModelParams<T>& params() noexcept { return params_; }
  const ModelParams<T>& params() const noexcept { return params_; }

  // Relation table row for r, or for its inverse.
  RelationId relation_row(RelationId r, bool inverse) const;

  // Pre-sigmoid scores [batch, |E|]. Dropout only when train; batch row b
  // draws its masks from derive_seed(dropout_seed, {b}).
  Tensor<T> logits(const std::vector<Query>& pairs, std::uint64_t dropout_seed, bool train) const;

  ScoreBatch<T> score_1N(const std::vector<Query>& pairs, std::uint64_t dropout_seed, bool train) const;

  // Loss and exact gradients for the realized dropout masks (train mode).
  ForwardBackward<T> forward_backward(const std::vector<Query>& pairs,
                                      const std::vector<std::vector<EntityId>>& targets,
                                      std::uint64_t dropout_seed) const;

 private:
  struct RowCache;
  void forward_row(const Query& q, std::uint64_t dropout_seed, bool train, RowCache& cache) const;
  void check_query(const Query& q) const;

  ModelConfig config_;
  std::size_t num_entities_;
  std::size_t num_relations_;
  ReshapePlan plan_;
  ModelParams<T> params_;
};

}  // namespace interacte
