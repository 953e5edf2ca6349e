#include "interacte/model.hpp"

#include <algorithm>
#include <cmath>

#include "interacte/convcore.hpp"
#include "interacte/error.hpp"
#include "interacte/rng.hpp"

namespace interacte {

std::string_view to_string(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

Precision parse_precision(std::string_view s) {
  if (s == "float32" || s == "f32") return Precision::kFloat32;
  if (s == "float64" || s == "f64") return Precision::kFloat64;
  throw ConfigError("unknown precision '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (d_w == 0 || d_h == 0) throw ConfigError("d_w and d_h must be positive");
  if (t == 0) throw ConfigError("number of permutations t must be >= 1");
  if (n_filters == 0) throw ConfigError("n_filters must be >= 1");
  if (k % 2 == 0 || k == 0) throw ConfigError("kernel size k must be odd, got " + std::to_string(k));
  if (k > std::min(grid_rows(), grid_cols())) {
    throw ConfigError("kernel size " + std::to_string(k) + " exceeds the " + std::to_string(grid_rows()) + "x" +
                      std::to_string(grid_cols()) + " grid");
  }
  if (reshape == ReshapeKind::kAlternate && (tau == 0 || d_w % tau != 0)) {
    throw ConfigError("alternate(" + std::to_string(tau) + ") requires tau to divide d_w=" + std::to_string(d_w));
  }
  if (conv_mode == PadMode::kNone) throw ConfigError("conv mode must be zero or circular");
  for (double r : {input_dropout, feature_dropout, hidden_dropout, label_smoothing}) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates and label smoothing must lie in [0, 1)");
  }
}

std::vector<std::string> ModelConfig::grid_warnings() const {
  std::vector<std::string> w;
  auto in = [](double v, std::initializer_list<double> xs) {
    return std::any_of(xs.begin(), xs.end(), [&](double x) { return std::fabs(v - x) < 1e-12; });
  };
  if (t < 1 || t > 5) w.push_back("t=" + std::to_string(t) + " outside {1..5}");
  if (!in(static_cast<double>(k), {3, 5, 7, 9, 11})) w.push_back("k=" + std::to_string(k) + " outside {3,5,7,9,11}");
  if (!in(static_cast<double>(n_filters), {32, 48, 64, 96})) {
    w.push_back("n_filters=" + std::to_string(n_filters) + " outside {32,48,64,96}");
  }
  if (!in(input_dropout, {0.0, 0.2})) w.push_back("input dropout outside {0, 0.2}");
  if (!in(feature_dropout, {0.0, 0.2, 0.5})) w.push_back("feature dropout outside {0, 0.2, 0.5}");
  if (!in(hidden_dropout, {0.0, 0.3, 0.5})) w.push_back("hidden dropout outside {0, 0.3, 0.5}");
  if (!in(label_smoothing, {0.0, 0.1})) w.push_back("label smoothing outside {0, 0.1}");
  if (d_w != 10 || d_h != 20) w.push_back("embedding grid " + std::to_string(d_w) + "x" + std::to_string(d_h) +
                                          " differs from 10x20");
  return w;
}

ReshapePlan make_plan(const ModelConfig& config) {
  return make_plan(config.reshape, config.d_w, config.d_h, config.t, config.permutation_seed, config.tau);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named() {
  std::vector<std::pair<std::string, Tensor<T>*>> out{
      {"entity", &entity}, {"relation", &relation}, {"filters", &filters}, {"projection", &projection}};
  if (!bias.empty()) out.emplace_back("entity_bias", &bias);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out{
      {"entity", &entity}, {"relation", &relation}, {"filters", &filters}, {"projection", &projection}};
  if (!bias.empty()) out.emplace_back("entity_bias", &bias);
  return out;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(const ModelConfig& config,
                                                                          std::size_t num_entities,
                                                                          std::size_t num_relations) {
  const std::size_t d = config.dim();
  const std::size_t rel_rows = num_relations * (config.inverse_relations ? 2 : 1);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> s{
      {"entity", {num_entities, d}},
      {"relation", {rel_rows, d}},
      {"filters", {config.n_filters, config.k, config.k}},
      {"projection", {config.feature_size(), d}},
  };
  if (config.entity_bias) s.push_back({"entity_bias", {num_entities}});
  return s;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> z;
  z.entity = zeros_like(p.entity);
  z.relation = zeros_like(p.relation);
  z.filters = zeros_like(p.filters);
  z.projection = zeros_like(p.projection);
  z.bias = zeros_like(p.bias);
  return z;
}

namespace {

template <typename T>
void xavier_fill(Tensor<T>& t, double fan_in, double fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::size_t num_entities, std::size_t num_relations,
                           std::uint64_t seed) {
  config.validate();
  if (num_entities == 0 || num_relations == 0) throw PreconditionError("model needs entities and relations");
  const auto shapes = param_shapes(config, num_entities, num_relations);
  ModelParams<T> p;
  p.entity = Tensor<T>(shapes[0].second);
  p.relation = Tensor<T>(shapes[1].second);
  p.filters = Tensor<T>(shapes[2].second);
  p.projection = Tensor<T>(shapes[3].second);
  if (config.entity_bias) p.bias = Tensor<T>(shapes[4].second);

  const double d = static_cast<double>(config.dim());
  const double kk = static_cast<double>(config.k * config.k);
  Rng r_ent(derive_seed(seed, {stream::kInit, 0}));
  Rng r_rel(derive_seed(seed, {stream::kInit, 1}));
  Rng r_fil(derive_seed(seed, {stream::kInit, 2}));
  Rng r_proj(derive_seed(seed, {stream::kInit, 3}));
  xavier_fill(p.entity, static_cast<double>(p.entity.dim(0)), d, r_ent);
  xavier_fill(p.relation, static_cast<double>(p.relation.dim(0)), d, r_rel);
  xavier_fill(p.filters, kk, static_cast<double>(config.n_filters) * kk, r_fil);
  xavier_fill(p.projection, static_cast<double>(config.feature_size()), d, r_proj);
  return p;
}

template <typename T>
LossResult<T> loss_bce_smoothed(const Tensor<T>& scores, const std::vector<std::vector<EntityId>>& targets,
                                double epsilon) {
  if (scores.shape.size() != 2) throw ShapeError("scores must be [batch, |E|]");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw PreconditionError("label smoothing must be in [0, 1)");
  const std::size_t B = scores.dim(0), N = scores.dim(1);
  if (targets.size() != B) throw ShapeError("one target set per score row required");
  constexpr double kClamp = 1e-12;
  const double off = epsilon / static_cast<double>(N);
  const double on = (1.0 - epsilon) + off;
  const double denom = static_cast<double>(B * N);
  LossResult<T> res;
  res.grad = Tensor<T>(scores.shape);
  std::vector<char> positive(N);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::fill(positive.begin(), positive.end(), 0);
    for (EntityId o : targets[b]) {
      if (o >= N) throw PreconditionError("target entity out of range");
      positive[o] = 1;
    }
    double row = 0.0;
    for (std::size_t o = 0; o < N; ++o) {
      const double s = static_cast<double>(scores.data[b * N + o]);
      const double y = positive[o] ? on : off;
      const double ps = std::max(s, kClamp), ns = std::max(1.0 - s, kClamp);
      row += -(y * std::log(ps) + (1.0 - y) * std::log(ns));
      double g = 0.0;
      if (s > kClamp) g -= y / s;
      if (1.0 - s > kClamp) g += (1.0 - y) / (1.0 - s);
      res.grad.data[b * N + o] = static_cast<T>(g / denom);
    }
    total += row;
  }
  res.loss = total / denom;
  return res;
}

template <typename T>
struct InteractE<T>::RowCache {
  std::vector<T> e_s, e_r;          // after input dropout
  std::vector<T> mask_s, mask_r;    // input dropout masks
  std::vector<T> grids;             // [t, rows, cols]
  std::vector<T> conv;              // [t * F, rows, cols] pre-activation
  std::vector<T> mask_feat;
  std::vector<T> feat;              // relu(conv) * mask_feat
  std::vector<T> pre;               // feat . W
  std::vector<T> mask_hidden;
  std::vector<T> hidden;            // relu(pre * mask_hidden)
};

template <typename T>
InteractE<T>::InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations,
                        std::uint64_t init_seed)
    : InteractE(config, num_entities, num_relations, init_params<T>(config, num_entities, num_relations, init_seed)) {}

template <typename T>
InteractE<T>::InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations,
                        ModelParams<T> params)
    : InteractE(config, num_entities, num_relations, std::move(params), make_plan(config)) {}

template <typename T>
InteractE<T>::InteractE(ModelConfig config, std::size_t num_entities, std::size_t num_relations,
                        ModelParams<T> params, ReshapePlan plan)
    : config_(std::move(config)),
      num_entities_(num_entities),
      num_relations_(num_relations),
      plan_(std::move(plan)),
      params_(std::move(params)) {
  config_.validate();
  if (plan_.kind != config_.reshape || plan_.tau != config_.tau || plan_.d_w != config_.d_w ||
      plan_.d_h != config_.d_h || plan_.num_permutations() != config_.t) {
    throw ShapeError("reshape plan does not match the model config");
  }
  const auto shapes = param_shapes(config_, num_entities_, num_relations_);
  const auto named = params_.named();
  if (named.size() != shapes.size()) throw ShapeError("parameter set does not match config (entity bias flag)");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (named[i].first != shapes[i].first || named[i].second->shape != shapes[i].second) {
      throw ShapeError("parameter '" + shapes[i].first + "' has shape " + shape_string(named[i].second->shape) +
                       ", config implies " + shape_string(shapes[i].second));
    }
  }
}

template <typename T>
RelationId InteractE<T>::relation_row(RelationId r, bool inverse) const {
  if (r >= num_relations_) throw PreconditionError("relation id out of range");
  if (!inverse) return r;
  if (!config_.inverse_relations) throw PreconditionError("inverse relations are disabled in this model");
  return static_cast<RelationId>(r + num_relations_);
}

template <typename T>
void InteractE<T>::check_query(const Query& q) const {
  if (q.entity >= num_entities_) throw PreconditionError("entity id " + std::to_string(q.entity) + " out of range");
  if (q.relation >= params_.relation.dim(0)) {
    throw PreconditionError("relation row " + std::to_string(q.relation) + " out of range");
  }
}

template <typename T>
void InteractE<T>::forward_row(const Query& q, std::uint64_t dropout_seed, bool train, RowCache& c) const {
  const std::size_t d = config_.dim();
  const std::size_t plane = config_.grid_rows() * config_.grid_cols();
  const std::size_t t = config_.t;
  Rng rng(dropout_seed);

  auto es = params_.entity.row(q.entity);
  auto er = params_.relation.row(q.relation);
  c.e_s.assign(es.begin(), es.end());
  c.e_r.assign(er.begin(), er.end());
  c.mask_s.resize(d);
  c.mask_r.resize(d);
  dropout_inplace<T>(std::span<T>(c.e_s), config_.input_dropout, rng, train, std::span<T>(c.mask_s));
  dropout_inplace<T>(std::span<T>(c.e_r), config_.input_dropout, rng, train, std::span<T>(c.mask_r));

  c.grids.resize(t * plane);
  for (std::size_t i = 0; i < t; ++i) {
    reshape_into<T>(plan_, i, c.e_s, c.e_r, std::span<T>(c.grids).subspan(i * plane, plane));
  }

  const ConvShape cs{t, config_.grid_rows(), config_.grid_cols(), config_.n_filters, config_.k};
  c.conv.resize(cs.out_size());
  conv2d_forward<T>(c.grids, params_.filters.span(), cs, config_.conv_mode, std::span<T>(c.conv));

  c.feat = c.conv;
  relu_inplace(std::span<T>(c.feat));
  c.mask_feat.resize(c.feat.size());
  dropout_inplace<T>(std::span<T>(c.feat), config_.feature_dropout, rng, train, std::span<T>(c.mask_feat));

  c.pre.resize(d);
  affine<T>(c.feat, params_.projection.span(), {}, std::span<T>(c.pre));
  c.hidden = c.pre;
  c.mask_hidden.resize(d);
  dropout_inplace<T>(std::span<T>(c.hidden), config_.hidden_dropout, rng, train, std::span<T>(c.mask_hidden));
  relu_inplace(std::span<T>(c.hidden));
}

template <typename T>
Tensor<T> InteractE<T>::logits(const std::vector<Query>& pairs, std::uint64_t dropout_seed, bool train) const {
  for (const Query& q : pairs) check_query(q);
  const std::size_t B = pairs.size(), N = num_entities_, d = config_.dim();
  Tensor<T> out({B, N});
  const auto rows = static_cast<std::int64_t>(B);
#pragma omp parallel
  {
    RowCache cache;
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < rows; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      forward_row(pairs[ub], derive_seed(dropout_seed, {ub}), train, cache);
      T* dst = out.data.data() + ub * N;
      for (std::size_t o = 0; o < N; ++o) {
        const T* eo = params_.entity.data.data() + o * d;
        T acc = params_.bias.empty() ? T(0) : params_.bias.data[o];
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < d; ++j) acc += cache.hidden[j] * eo[j];
        dst[o] = acc;
      }
    }
  }
  return out;
}

template <typename T>
ScoreBatch<T> InteractE<T>::score_1N(const std::vector<Query>& pairs, std::uint64_t dropout_seed, bool train) const {
  ScoreBatch<T> sb;
  sb.pairs = pairs;
  sb.scores = logits(pairs, dropout_seed, train);
  for (T& v : sb.scores.data) v = sigmoid(v);
  return sb;
}

template <typename T>
ForwardBackward<T> InteractE<T>::forward_backward(const std::vector<Query>& pairs,
                                                  const std::vector<std::vector<EntityId>>& targets,
                                                  std::uint64_t dropout_seed) const {
  if (pairs.size() != targets.size()) throw ShapeError("one target set per query required");
  for (const Query& q : pairs) check_query(q);
  const std::size_t B = pairs.size(), N = num_entities_, d = config_.dim();
  const std::size_t F = config_.feature_size();
  const std::size_t plane = config_.grid_rows() * config_.grid_cols();
  const std::size_t t = config_.t;
  const ConvShape cs{t, config_.grid_rows(), config_.grid_cols(), config_.n_filters, config_.k};

  ForwardBackward<T> fb;
  fb.grads = zeros_like(params_);
  if (B == 0) return fb;

  std::vector<RowCache> caches(B);
  Tensor<T> scores({B, N});
  const auto rows = static_cast<std::int64_t>(B);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < rows; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    RowCache& c = caches[ub];
    forward_row(pairs[ub], derive_seed(dropout_seed, {ub}), true, c);
    T* dst = scores.data.data() + ub * N;
    for (std::size_t o = 0; o < N; ++o) {
      const T* eo = params_.entity.data.data() + o * d;
      T acc = params_.bias.empty() ? T(0) : params_.bias.data[o];
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < d; ++j) acc += c.hidden[j] * eo[j];
      dst[o] = sigmoid(acc);
    }
  }

  fb.loss = loss_bce_smoothed(scores, targets, config_.label_smoothing).loss;
  if (!std::isfinite(fb.loss)) throw NumericError("non-finite loss");

  // d loss / d logit = (sigmoid - y') / (B * N); fused to stay exact when the
  // sigmoid saturates in 32-bit.
  Tensor<T> dlogit({B, N});
  {
    const double eps = config_.label_smoothing;
    const double off = eps / static_cast<double>(N);
    const double on = (1.0 - eps) + off;
    const double denom = static_cast<double>(B * N);
    for (std::size_t b = 0; b < B; ++b) {
      T* g = dlogit.data.data() + b * N;
      const T* s = scores.data.data() + b * N;
      for (std::size_t o = 0; o < N; ++o) g[o] = static_cast<T>((static_cast<double>(s[o]) - off) / denom);
      for (EntityId o : targets[b]) {
        if (o >= N) throw PreconditionError("target entity out of range");
        g[o] = static_cast<T>((static_cast<double>(s[o]) - on) / denom);
      }
    }
  }

  // Output layer: dE[o] += sum_b dlogit[b,o] * h_b ; dbias[o] = sum_b dlogit[b,o].
  const auto n_ent = static_cast<std::int64_t>(N);
#pragma omp parallel for schedule(static)
  for (std::int64_t oo = 0; oo < n_ent; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
    T* ge = fb.grads.entity.data.data() + o * d;
    T gb = T(0);
    for (std::size_t b = 0; b < B; ++b) {
      const T g = dlogit.data[b * N + o];
      gb += g;
      const T* h = caches[b].hidden.data();
      for (std::size_t j = 0; j < d; ++j) ge[j] += g * h[j];
    }
    if (!fb.grads.bias.empty()) fb.grads.bias.data[o] = gb;
  }

  // Hidden layer: dpre_b = (E^T dlogit_b) through relu and hidden dropout.
  std::vector<std::vector<T>> dpre(B, std::vector<T>(d));
#pragma omp parallel for schedule(static)
  for (std::int64_t bb = 0; bb < rows; ++bb) {
    const auto b = static_cast<std::size_t>(bb);
    std::vector<T>& dp = dpre[b];
    std::fill(dp.begin(), dp.end(), T(0));
    const T* g = dlogit.data.data() + b * N;
    for (std::size_t o = 0; o < N; ++o) {
      const T* eo = params_.entity.data.data() + o * d;
      for (std::size_t j = 0; j < d; ++j) dp[j] += g[o] * eo[j];
    }
    const RowCache& c = caches[b];
    for (std::size_t j = 0; j < d; ++j) dp[j] = c.hidden[j] > T(0) ? dp[j] * c.mask_hidden[j] : T(0);
  }

  // Projection: dW[f, :] = sum_b feat_b[f] * dpre_b.
  const auto n_feat = static_cast<std::int64_t>(F);
#pragma omp parallel for schedule(static)
  for (std::int64_t ff = 0; ff < n_feat; ++ff) {
    const auto f = static_cast<std::size_t>(ff);
    T* gw = fb.grads.projection.data.data() + f * d;
    for (std::size_t b = 0; b < B; ++b) {
      const T x = caches[b].feat[f];
      if (x == T(0)) continue;
      for (std::size_t j = 0; j < d; ++j) gw[j] += x * dpre[b][j];
    }
  }

  // Per-row backward through projection, feature dropout, relu, conv, reshape
  // and input dropout.
  std::vector<std::vector<T>> dfilt(B), des(B), der(B);
#pragma omp parallel for schedule(static)
  for (std::int64_t bb = 0; bb < rows; ++bb) {
    const auto b = static_cast<std::size_t>(bb);
    const RowCache& c = caches[b];
    std::vector<T> dconv(F);
    const T* W = params_.projection.data.data();
    for (std::size_t f = 0; f < F; ++f) {
      const T* wr = W + f * d;
      T acc = T(0);
      const T* dp = dpre[b].data();
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < d; ++j) acc += wr[j] * dp[j];
      dconv[f] = c.conv[f] > T(0) ? acc * c.mask_feat[f] : T(0);
    }
    std::vector<T> dgrid(t * plane);
    dfilt[b].assign(cs.filter_size(), T(0));
    conv2d_backward<T>(dconv, c.grids, params_.filters.span(), cs, config_.conv_mode, std::span<T>(dgrid),
                       std::span<T>(dfilt[b]));
    des[b].assign(d, T(0));
    der[b].assign(d, T(0));
    for (std::size_t i = 0; i < t; ++i) {
      reshape_backward<T>(plan_, i, std::span<const T>(dgrid).subspan(i * plane, plane), std::span<T>(des[b]),
                          std::span<T>(der[b]));
    }
    for (std::size_t j = 0; j < d; ++j) {
      des[b][j] *= c.mask_s[j];
      der[b][j] *= c.mask_r[j];
    }
  }

  // Ordered reduction of sparse and shared gradients.
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t x = 0; x < dfilt[b].size(); ++x) fb.grads.filters.data[x] += dfilt[b][x];
    T* ge = fb.grads.entity.data.data() + pairs[b].entity * d;
    T* gr = fb.grads.relation.data.data() + pairs[b].relation * d;
    for (std::size_t j = 0; j < d; ++j) {
      ge[j] += des[b][j];
      gr[j] += der[b][j];
    }
  }
  return fb;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> zeros_like(const ModelParams<float>&);
template ModelParams<double> zeros_like(const ModelParams<double>&);
template ModelParams<float> init_params<float>(const ModelConfig&, std::size_t, std::size_t, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, std::size_t, std::size_t, std::uint64_t);
template LossResult<float> loss_bce_smoothed<float>(const Tensor<float>&, const std::vector<std::vector<EntityId>>&,
                                                    double);
template LossResult<double> loss_bce_smoothed<double>(const Tensor<double>&,
                                                      const std::vector<std::vector<EntityId>>&, double);
template class InteractE<float>;
template class InteractE<double>;

}  // namespace interacte
