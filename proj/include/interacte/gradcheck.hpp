#pragma once

#include <string>
#include <vector>

#include "interacte/convcore.hpp"
#include "interacte/model.hpp"

namespace interacte {

inline constexpr double kKernelGradTolerance = 1e-6;
inline constexpr double kPipelineGradTolerance = 1e-4;

struct GradCheckCase {
  std::string name;
  double tolerance = 0.0;
  GradCheckReport report;

  bool passed() const { return report.passed(tolerance); }
};

// Circular and zero-padded convolution against a random linear readout.
GradCheckCase gradcheck_conv(PadMode mode, std::uint64_t seed);
GradCheckCase gradcheck_affine(std::uint64_t seed);

// Full model loss in 64-bit with a fixed batch of queries and targets.
// Configurations with dropout are skipped: the loss is not a deterministic
// function of the parameters across mask draws.
GradCheckCase gradcheck_pipeline(const std::string& name, const ModelConfig& config, std::size_t num_entities,
                                 std::size_t num_relations, std::uint64_t seed);

// d = 8 (2 x 4 grid), k = 3, t = 2, chequer, circular, 4 entities.
ModelConfig small_gradcheck_config();
// d = 32, k = 5, t = 3, stack, zero padding.
ModelConfig large_gradcheck_config();

// Kernels, small and large pipelines, and one dropout configuration that is
// reported as skipped.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace interacte
