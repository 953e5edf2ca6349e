#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "interacte/error.hpp"

namespace interacte {

// Dense row-major array. 64-bit in tests and gradient checks, 32-bit for
// training throughput.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T{}) : shape(std::move(dims)) {
    data.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  // Row i of a tensor viewed as [shape[0], rest].
  std::span<T> row(std::size_t i) {
    const std::size_t w = size() / shape.at(0);
    return std::span<T>(data).subspan(i * w, w);
  }
  std::span<const T> row(std::size_t i) const {
    const std::size_t w = size() / shape.at(0);
    return std::span<const T>(data).subspan(i * w, w);
  }

  std::span<T> span() noexcept { return data; }
  std::span<const T> span() const noexcept { return data; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape);
}

template <typename T>
bool all_finite(std::span<const T> xs) {
  for (T x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template <typename T>
void require_finite(std::span<const T> xs, const std::string& name) {
  if (!all_finite(xs)) throw NumericError("non-finite values in " + name);
}

inline std::string shape_string(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace interacte
