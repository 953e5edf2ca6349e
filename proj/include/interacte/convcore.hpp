#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "interacte/reshape.hpp"
#include "interacte/rng.hpp"
#include "interacte/tensor.hpp"

namespace interacte {

// Depth-wise convolution geometry: every one of `n_filters` k x k kernels is
// applied to every input channel, giving channels * n_filters output channels
// ordered (channel-major, filter-minor). Output spatial size equals input.
struct ConvShape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_filters = 1;
  std::size_t k = 3;

  std::size_t in_size() const noexcept { return channels * height * width; }
  std::size_t out_size() const noexcept { return channels * n_filters * height * width; }
  std::size_t filter_size() const noexcept { return n_filters * k * k; }
};

// Border handling: kCircular reads I[(p-i) mod H, (q-j) mod W]; kZero reads 0
// outside the input. kNone is rejected.
void validate_conv(const ConvShape& s, PadMode mode);

// out[c*F+f, p, q] = sum_{i,j in [-h, h]} in[c, p-i, q-j] * w[f, i+h, j+h], h = k/2.
template <typename T>
void conv2d_forward_reference(std::span<const T> input, std::span<const T> filters, const ConvShape& s, PadMode mode,
                              std::span<T> out);

template <typename T>
void conv2d_forward(std::span<const T> input, std::span<const T> filters, const ConvShape& s, PadMode mode,
                    std::span<T> out);

// Writes grad_input (overwritten) and accumulates into grad_filters.
template <typename T>
void conv2d_backward_reference(std::span<const T> grad_out, std::span<const T> input, std::span<const T> filters,
                               const ConvShape& s, PadMode mode, std::span<T> grad_input, std::span<T> grad_filters);

// Parallel over channels; filter gradients are reduced over channels in a
// fixed order so results do not depend on the thread count.
template <typename T>
void conv2d_backward(std::span<const T> grad_out, std::span<const T> input, std::span<const T> filters,
                     const ConvShape& s, PadMode mode, std::span<T> grad_input, std::span<T> grad_filters);

// Tensor-level entry points: input [t, H, W], filters [n_filters, k, k].
template <typename T>
Tensor<T> circular_conv2d(const Tensor<T>& input, const Tensor<T>& filters);

template <typename T>
Tensor<T> zero_conv2d(const Tensor<T>& input, const Tensor<T>& filters);

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> filters;
};

template <typename T>
ConvGrads<T> backward_conv(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& filters, PadMode mode);

// out[j] = sum_f x[f] * W[f, j] + b[j]; W is [x.size(), out.size()], b may be empty.
template <typename T>
void affine(std::span<const T> x, std::span<const T> W, std::span<const T> b, std::span<T> out);

template <typename T>
std::vector<T> affine(std::span<const T> x, const Tensor<T>& W, std::span<const T> b);

template <typename T>
void relu_inplace(std::span<T> x) {
  for (T& v : x) v = v > T(0) ? v : T(0);
}

template <typename T>
std::vector<T> relu(std::span<const T> x) {
  std::vector<T> out(x.begin(), x.end());
  relu_inplace(std::span<T>(out));
  return out;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

// Inverted dropout. Fills `mask` with 0 or 1/(1-rate) and multiplies x by it.
// With train == false or rate == 0 the mask is all ones.
template <typename T>
void dropout_inplace(std::span<T> x, double rate, Rng& rng, bool train, std::span<T> mask);

template <typename T>
std::vector<T> dropout(std::span<const T> x, double rate, Rng& rng, bool train);

template <typename T>
std::vector<T> flatten(const Tensor<T>& t) {
  return t.data;
}

// Finite-difference gradient check.
struct GradCheckTensor {
  std::string name;
  std::span<double> values;          // perturbed in place, restored afterwards
  std::span<const double> analytic;  // d loss / d values
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  bool skipped = false;
  std::string status;
  std::vector<GradCheckEntry> tensors;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return !skipped && max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Central differences on at most `max_coords` coordinates per tensor (sampled
// without replacement when the tensor is larger).
GradCheckReport gradcheck(const std::function<double()>& loss, std::vector<GradCheckTensor> tensors, double eps = 1e-5,
                          std::size_t max_coords = 512, std::uint64_t seed = 0);

GradCheckReport gradcheck_skipped(std::string reason);

}  // namespace interacte
