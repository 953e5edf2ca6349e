#include "interacte/gradcheck.hpp"

#include "interacte/rng.hpp"

namespace interacte {

namespace {

// The kernel losses are linear in every coordinate, so central differences are
// exact for any step; a large step keeps cancellation error small.
constexpr double kLinearStep = 1e-3;

std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

GradCheckCase gradcheck_conv(PadMode mode, std::uint64_t seed) {
  Rng rng(seed);
  const ConvShape s{2, 4, 6, 3, 3};
  std::vector<double> input = random_values(s.in_size(), rng);
  std::vector<double> filters = random_values(s.filter_size(), rng);
  const std::vector<double> readout = random_values(s.out_size(), rng);
  std::vector<double> out(s.out_size());
  auto loss = [&] {
    conv2d_forward<double>(input, filters, s, mode, std::span<double>(out));
    return dot(out, readout);
  };
  std::vector<double> g_in(s.in_size()), g_f(s.filter_size(), 0.0);
  conv2d_backward<double>(readout, input, filters, s, mode, std::span<double>(g_in), std::span<double>(g_f));
  GradCheckCase c;
  c.name = std::string("conv_") + std::string(to_string(mode));
  c.tolerance = kKernelGradTolerance;
  c.report = gradcheck(loss, {{"input", input, g_in}, {"filters", filters, g_f}}, kLinearStep, 512, seed);
  return c;
}

GradCheckCase gradcheck_affine(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n_in = 12, n_out = 5;
  std::vector<double> x = random_values(n_in, rng);
  std::vector<double> W = random_values(n_in * n_out, rng);
  std::vector<double> b = random_values(n_out, rng);
  const std::vector<double> readout = random_values(n_out, rng);
  std::vector<double> out(n_out);
  auto loss = [&] {
    affine<double>(x, W, b, std::span<double>(out));
    return dot(out, readout);
  };
  std::vector<double> gx(n_in, 0.0), gW(n_in * n_out), gb = readout;
  for (std::size_t f = 0; f < n_in; ++f) {
    for (std::size_t j = 0; j < n_out; ++j) {
      gx[f] += W[f * n_out + j] * readout[j];
      gW[f * n_out + j] = x[f] * readout[j];
    }
  }
  GradCheckCase c;
  c.name = "affine";
  c.tolerance = kKernelGradTolerance;
  c.report = gradcheck(loss, {{"x", x, gx}, {"W", W, gW}, {"b", b, gb}}, kLinearStep, 512, seed);
  return c;
}

GradCheckCase gradcheck_pipeline(const std::string& name, const ModelConfig& config, std::size_t num_entities,
                                 std::size_t num_relations, std::uint64_t seed) {
  GradCheckCase c;
  c.name = name;
  c.tolerance = kPipelineGradTolerance;
  if (config.has_dropout()) {
    c.report = gradcheck_skipped("skipped: dropout makes the loss stochastic");
    return c;
  }
  config.validate();
  InteractE<double> model(config, num_entities, num_relations, seed);
  // Random biases so the bias gradient is exercised away from zero.
  Rng rng(derive_seed(seed, {stream::kSynthetic}));
  for (double& v : model.params().bias.data) v = rng.uniform(-0.5, 0.5);

  const std::size_t rows = model.params().relation.dim(0);
  std::vector<Query> pairs;
  std::vector<std::vector<EntityId>> targets;
  for (std::size_t b = 0; b < 3; ++b) {
    pairs.push_back({static_cast<EntityId>(rng.below(num_entities)), static_cast<RelationId>(rng.below(rows))});
    std::vector<EntityId> tg{static_cast<EntityId>(rng.below(num_entities))};
    if (b == 1) tg.push_back(static_cast<EntityId>((tg[0] + 1) % num_entities));
    targets.push_back(tg);
  }
  const std::uint64_t dropout_seed = 0;
  const ForwardBackward<double> fb = model.forward_backward(pairs, targets, dropout_seed);
  auto loss = [&] { return model.forward_backward(pairs, targets, dropout_seed).loss; };

  std::vector<GradCheckTensor> tensors;
  auto params = model.params().named();
  const auto grads = fb.grads.named();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({params[i].first, params[i].second->span(), grads[i].second->span()});
  }
  c.report = gradcheck(loss, std::move(tensors), 1e-5, 256, seed);
  return c;
}

ModelConfig small_gradcheck_config() {
  ModelConfig c;
  c.d_w = 2;
  c.d_h = 4;
  c.k = 3;
  c.t = 2;
  c.n_filters = 4;
  c.reshape = ReshapeKind::kChequer;
  c.conv_mode = PadMode::kCircular;
  c.precision = Precision::kFloat64;
  return c;
}

ModelConfig large_gradcheck_config() {
  ModelConfig c;
  c.d_w = 4;
  c.d_h = 8;
  c.k = 5;
  c.t = 3;
  c.n_filters = 6;
  c.reshape = ReshapeKind::kStack;
  c.conv_mode = PadMode::kZero;
  c.precision = Precision::kFloat64;
  return c;
}

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  out.push_back(gradcheck_conv(PadMode::kCircular, seed));
  out.push_back(gradcheck_conv(PadMode::kZero, seed));
  out.push_back(gradcheck_affine(seed));
  out.push_back(gradcheck_pipeline("pipeline_small", small_gradcheck_config(), 4, 2, seed));
  out.push_back(gradcheck_pipeline("pipeline_large", large_gradcheck_config(), 12, 3, seed));
  ModelConfig dropout = small_gradcheck_config();
  dropout.input_dropout = 0.2;
  dropout.hidden_dropout = 0.3;
  out.push_back(gradcheck_pipeline("pipeline_dropout", dropout, 4, 2, seed));
  return out;
}

}  // namespace interacte
