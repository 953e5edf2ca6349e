#include "interacte/convcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "interacte/error.hpp"

namespace interacte {

void validate_conv(const ConvShape& s, PadMode mode) {
  if (mode == PadMode::kNone) throw PreconditionError("convolution needs zero or circular border mode");
  if (s.k % 2 == 0) throw PreconditionError("even kernel size " + std::to_string(s.k) + " is unsupported");
  if (s.k > std::min(s.height, s.width)) {
    throw PreconditionError("kernel size " + std::to_string(s.k) + " exceeds input " + std::to_string(s.height) +
                            "x" + std::to_string(s.width));
  }
  if (s.channels == 0 || s.n_filters == 0) throw PreconditionError("convolution needs channels and filters");
}

namespace {

inline std::ptrdiff_t wrap(std::ptrdiff_t x, std::ptrdiff_t n) { return ((x % n) + n) % n; }

// Source index along one axis for output position `pos` and kernel offset
// `off` (in [-h, h]); -1 when the read falls in zero padding.
inline std::ptrdiff_t source_index(std::ptrdiff_t pos, std::ptrdiff_t off, std::ptrdiff_t n, PadMode mode) {
  const std::ptrdiff_t x = pos - off;
  if (mode == PadMode::kCircular) return wrap(x, n);
  return (x < 0 || x >= n) ? -1 : x;
}

// Copies each channel into a (H + 2h) x (W + 2h) plane whose border holds
// wrapped values (circular) or zeros.
template <typename T>
void build_padded(std::span<const T> input, const ConvShape& s, PadMode mode, std::vector<T>& out) {
  const std::size_t H = s.height, W = s.width, h = s.k / 2;
  const std::size_t PH = H + 2 * h, PW = W + 2 * h;
  out.assign(s.channels * PH * PW, T(0));
  const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);
  const auto sh = static_cast<std::ptrdiff_t>(h);
  for (std::size_t c = 0; c < s.channels; ++c) {
    const T* in = input.data() + c * H * W;
    T* dst = out.data() + c * PH * PW;
    for (std::size_t a = 0; a < PH; ++a) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(a) - sh;
      if (mode == PadMode::kZero && (r < 0 || r >= sH)) continue;
      for (std::size_t b = 0; b < PW; ++b) {
        const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(b) - sh;
        if (mode == PadMode::kZero && (q < 0 || q >= sW)) continue;
        dst[a * PW + b] = in[wrap(r, sH) * sW + wrap(q, sW)];
      }
    }
  }
}

void check_spans(const ConvShape& s, std::size_t in, std::size_t filt, std::size_t out) {
  if (in != s.in_size()) throw ShapeError("conv input has " + std::to_string(in) + " values, expected " + std::to_string(s.in_size()));
  if (filt != s.filter_size()) throw ShapeError("conv filters have wrong size");
  if (out != s.out_size()) throw ShapeError("conv output has wrong size");
}

}  // namespace

template <typename T>
void conv2d_forward_reference(std::span<const T> input, std::span<const T> filters, const ConvShape& s, PadMode mode,
                              std::span<T> out) {
  validate_conv(s, mode);
  check_spans(s, input.size(), filters.size(), out.size());
  const auto H = static_cast<std::ptrdiff_t>(s.height), W = static_cast<std::ptrdiff_t>(s.width);
  const auto h = static_cast<std::ptrdiff_t>(s.k / 2);
  const std::size_t plane = s.height * s.width;
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t f = 0; f < s.n_filters; ++f) {
      const T* w = filters.data() + f * s.k * s.k;
      T* o = out.data() + (c * s.n_filters + f) * plane;
      const T* in = input.data() + c * plane;
      for (std::ptrdiff_t p = 0; p < H; ++p) {
        for (std::ptrdiff_t q = 0; q < W; ++q) {
          T acc = T(0);
          for (std::ptrdiff_t i = -h; i <= h; ++i) {
            for (std::ptrdiff_t j = -h; j <= h; ++j) {
              const std::ptrdiff_t a = source_index(p, i, H, mode);
              const std::ptrdiff_t b = source_index(q, j, W, mode);
              if (a < 0 || b < 0) continue;
              acc += in[a * W + b] * w[(i + h) * static_cast<std::ptrdiff_t>(s.k) + (j + h)];
            }
          }
          o[p * W + q] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(std::span<const T> input, std::span<const T> filters, const ConvShape& s, PadMode mode,
                    std::span<T> out) {
  validate_conv(s, mode);
  check_spans(s, input.size(), filters.size(), out.size());
  const std::size_t H = s.height, W = s.width, k = s.k, h = k / 2, plane = H * W;
  const std::size_t PW = W + 2 * h;
  std::vector<T> padded;
  build_padded(input, s, mode, padded);
  const std::size_t pplane = (H + 2 * h) * PW;
  const auto jobs = static_cast<std::int64_t>(s.channels * s.n_filters);
#pragma omp parallel for schedule(static)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::size_t c = static_cast<std::size_t>(job) / s.n_filters;
    const std::size_t f = static_cast<std::size_t>(job) % s.n_filters;
    const T* w = filters.data() + f * k * k;
    const T* in = padded.data() + c * pplane;
    T* o = out.data() + static_cast<std::size_t>(job) * plane;
    std::fill(o, o + plane, T(0));
    // Per-cell accumulation in (i, j) ascending order, as in the reference.
    // Output (p, q) reads padded cell (p + 2h - i, q + 2h - j).
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const T wij = w[i * k + j];
        for (std::size_t p = 0; p < H; ++p) {
          const T* src = in + (p + 2 * h - i) * PW + (2 * h - j);
          T* dst = o + p * W;
#pragma omp simd
          for (std::size_t q = 0; q < W; ++q) dst[q] += src[q] * wij;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_reference(std::span<const T> grad_out, std::span<const T> input, std::span<const T> filters,
                               const ConvShape& s, PadMode mode, std::span<T> grad_input, std::span<T> grad_filters) {
  validate_conv(s, mode);
  check_spans(s, input.size(), filters.size(), grad_out.size());
  if (grad_input.size() != s.in_size() || grad_filters.size() != s.filter_size()) {
    throw ShapeError("conv gradient buffers have wrong size");
  }
  const auto H = static_cast<std::ptrdiff_t>(s.height), W = static_cast<std::ptrdiff_t>(s.width);
  const auto h = static_cast<std::ptrdiff_t>(s.k / 2);
  const auto K = static_cast<std::ptrdiff_t>(s.k);
  const std::size_t plane = s.height * s.width;
  std::fill(grad_input.begin(), grad_input.end(), T(0));
  for (std::size_t c = 0; c < s.channels; ++c) {
    const T* in = input.data() + c * plane;
    T* gi = grad_input.data() + c * plane;
    for (std::size_t f = 0; f < s.n_filters; ++f) {
      const T* w = filters.data() + f * s.k * s.k;
      T* gw = grad_filters.data() + f * s.k * s.k;
      const T* go = grad_out.data() + (c * s.n_filters + f) * plane;
      for (std::ptrdiff_t p = 0; p < H; ++p) {
        for (std::ptrdiff_t q = 0; q < W; ++q) {
          const T g = go[p * W + q];
          for (std::ptrdiff_t i = -h; i <= h; ++i) {
            for (std::ptrdiff_t j = -h; j <= h; ++j) {
              const std::ptrdiff_t a = source_index(p, i, H, mode);
              const std::ptrdiff_t b = source_index(q, j, W, mode);
              if (a < 0 || b < 0) continue;
              const std::ptrdiff_t widx = (i + h) * K + (j + h);
              gi[a * W + b] += g * w[widx];
              gw[widx] += g * in[a * W + b];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(std::span<const T> grad_out, std::span<const T> input, std::span<const T> filters,
                     const ConvShape& s, PadMode mode, std::span<T> grad_input, std::span<T> grad_filters) {
  validate_conv(s, mode);
  check_spans(s, input.size(), filters.size(), grad_out.size());
  if (grad_input.size() != s.in_size() || grad_filters.size() != s.filter_size()) {
    throw ShapeError("conv gradient buffers have wrong size");
  }
  const std::size_t H = s.height, W = s.width, k = s.k, h = k / 2, plane = H * W, fsz = s.filter_size();
  const std::size_t PH = H + 2 * h, PW = W + 2 * h, pplane = PH * PW;
  std::vector<T> padded;
  build_padded(input, s, mode, padded);
  std::vector<T> partial(s.channels * fsz, T(0));
  const auto C = static_cast<std::int64_t>(s.channels);
#pragma omp parallel for schedule(static)
  for (std::int64_t cc = 0; cc < C; ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const T* in = padded.data() + c * pplane;
    T* gw_all = partial.data() + c * fsz;
    std::vector<T> gpad(pplane, T(0));
    std::vector<T> lanes(W);
    for (std::size_t f = 0; f < s.n_filters; ++f) {
      const T* w = filters.data() + f * k * k;
      T* gw = gw_all + f * k * k;
      const T* go = grad_out.data() + (c * s.n_filters + f) * plane;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const T wij = w[i * k + j];
          std::fill(lanes.begin(), lanes.end(), T(0));
          for (std::size_t p = 0; p < H; ++p) {
            const std::size_t off = (p + 2 * h - i) * PW + (2 * h - j);
            const T* g = go + p * W;
            const T* src = in + off;
            T* dst = gpad.data() + off;
#pragma omp simd
            for (std::size_t q = 0; q < W; ++q) {
              dst[q] += g[q] * wij;
              lanes[q] += g[q] * src[q];
            }
          }
          T acc = T(0);
          for (std::size_t q = 0; q < W; ++q) acc += lanes[q];
          gw[i * k + j] += acc;
        }
      }
    }
    // Fold the padded-plane gradient back onto the input plane.
    T* gi = grad_input.data() + c * plane;
    std::fill(gi, gi + plane, T(0));
    const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);
    const auto sh = static_cast<std::ptrdiff_t>(h);
    for (std::size_t a = 0; a < PH; ++a) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(a) - sh;
      if (mode == PadMode::kZero && (r < 0 || r >= sH)) continue;
      const std::ptrdiff_t rr = wrap(r, sH);
      for (std::size_t b = 0; b < PW; ++b) {
        const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(b) - sh;
        if (mode == PadMode::kZero && (q < 0 || q >= sW)) continue;
        gi[rr * sW + wrap(q, sW)] += gpad[a * PW + b];
      }
    }
  }
  for (std::size_t c = 0; c < s.channels; ++c) {
    const T* src = partial.data() + c * fsz;
    for (std::size_t x = 0; x < fsz; ++x) grad_filters[x] += src[x];
  }
}

namespace {

template <typename T>
ConvShape tensor_conv_shape(const Tensor<T>& input, const Tensor<T>& filters) {
  if (input.shape.size() != 3) throw ShapeError("conv input must be [t, H, W], got " + shape_string(input.shape));
  if (filters.shape.size() != 3 || filters.shape[1] != filters.shape[2]) {
    throw ShapeError("filters must be [n_filters, k, k], got " + shape_string(filters.shape));
  }
  return {input.shape[0], input.shape[1], input.shape[2], filters.shape[0], filters.shape[1]};
}

template <typename T>
Tensor<T> conv_tensor(const Tensor<T>& input, const Tensor<T>& filters, PadMode mode) {
  const ConvShape s = tensor_conv_shape(input, filters);
  Tensor<T> out({s.channels * s.n_filters, s.height, s.width});
  conv2d_forward<T>(input.span(), filters.span(), s, mode, out.span());
  return out;
}

}  // namespace

template <typename T>
Tensor<T> circular_conv2d(const Tensor<T>& input, const Tensor<T>& filters) {
  return conv_tensor(input, filters, PadMode::kCircular);
}

template <typename T>
Tensor<T> zero_conv2d(const Tensor<T>& input, const Tensor<T>& filters) {
  return conv_tensor(input, filters, PadMode::kZero);
}

template <typename T>
ConvGrads<T> backward_conv(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& filters, PadMode mode) {
  const ConvShape s = tensor_conv_shape(input, filters);
  if (grad_out.size() != s.out_size()) throw ShapeError("grad_out shape does not match forward output");
  ConvGrads<T> g{zeros_like(input), zeros_like(filters)};
  conv2d_backward<T>(grad_out.span(), input.span(), filters.span(), s, mode, g.input.span(), g.filters.span());
  return g;
}

template <typename T>
void affine(std::span<const T> x, std::span<const T> W, std::span<const T> b, std::span<T> out) {
  const std::size_t n_in = x.size(), n_out = out.size();
  if (W.size() != n_in * n_out) throw ShapeError("affine weight has wrong size");
  if (!b.empty() && b.size() != n_out) throw ShapeError("affine bias has wrong size");
  if (b.empty()) {
    std::fill(out.begin(), out.end(), T(0));
  } else {
    std::copy(b.begin(), b.end(), out.begin());
  }
  for (std::size_t f = 0; f < n_in; ++f) {
    const T xf = x[f];
    if (xf == T(0)) continue;
    const T* row = W.data() + f * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += xf * row[j];
  }
}

template <typename T>
std::vector<T> affine(std::span<const T> x, const Tensor<T>& W, std::span<const T> b) {
  if (W.shape.size() != 2 || W.shape[0] != x.size()) {
    throw ShapeError("affine expects W of shape [" + std::to_string(x.size()) + ", d], got " + shape_string(W.shape));
  }
  std::vector<T> out(W.shape[1]);
  affine<T>(x, W.span(), b, std::span<T>(out));
  return out;
}

template <typename T>
void dropout_inplace(std::span<T> x, double rate, Rng& rng, bool train, std::span<T> mask) {
  if (rate < 0.0 || rate >= 1.0) throw PreconditionError("dropout rate must be in [0, 1)");
  if (mask.size() != x.size()) throw ShapeError("dropout mask size mismatch");
  if (!train || rate == 0.0) {
    std::fill(mask.begin(), mask.end(), T(1));
    return;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
    x[i] *= mask[i];
  }
}

template <typename T>
std::vector<T> dropout(std::span<const T> x, double rate, Rng& rng, bool train) {
  std::vector<T> out(x.begin(), x.end()), mask(x.size());
  dropout_inplace<T>(std::span<T>(out), rate, rng, train, std::span<T>(mask));
  return out;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport gradcheck(const std::function<double()>& loss, std::vector<GradCheckTensor> tensors, double eps,
                          std::size_t max_coords, std::uint64_t seed) {
  GradCheckReport report;
  report.status = "ok";
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    GradCheckTensor& t = tensors[ti];
    if (t.values.size() != t.analytic.size()) throw ShapeError("gradcheck: gradient size mismatch for " + t.name);
    std::vector<std::size_t> coords(t.values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      Rng rng(derive_seed(seed, {ti}));
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    GradCheckEntry entry;
    entry.name = t.name;
    for (std::size_t idx : coords) {
      const double orig = t.values[idx];
      t.values[idx] = orig + eps;
      const double up = loss();
      t.values[idx] = orig - eps;
      const double down = loss();
      t.values[idx] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(t.analytic[idx], numeric);
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = idx;
      }
      ++entry.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.tensors.push_back(entry);
  }
  return report;
}

GradCheckReport gradcheck_skipped(std::string reason) {
  GradCheckReport r;
  r.skipped = true;
  r.status = std::move(reason);
  return r;
}

#define INTERACTE_INSTANTIATE(T)                                                                                    \
  template void conv2d_forward_reference<T>(std::span<const T>, std::span<const T>, const ConvShape&, PadMode,      \
                                            std::span<T>);                                                          \
  template void conv2d_forward<T>(std::span<const T>, std::span<const T>, const ConvShape&, PadMode, std::span<T>); \
  template void conv2d_backward_reference<T>(std::span<const T>, std::span<const T>, std::span<const T>,            \
                                             const ConvShape&, PadMode, std::span<T>, std::span<T>);                \
  template void conv2d_backward<T>(std::span<const T>, std::span<const T>, std::span<const T>, const ConvShape&,    \
                                   PadMode, std::span<T>, std::span<T>);                                            \
  template Tensor<T> circular_conv2d<T>(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> zero_conv2d<T>(const Tensor<T>&, const Tensor<T>&);                                            \
  template ConvGrads<T> backward_conv<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, PadMode);            \
  template void affine<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>);               \
  template std::vector<T> affine<T>(std::span<const T>, const Tensor<T>&, std::span<const T>);                      \
  template void dropout_inplace<T>(std::span<T>, double, Rng&, bool, std::span<T>);                                 \
  template std::vector<T> dropout<T>(std::span<const T>, double, Rng&, bool);

INTERACTE_INSTANTIATE(float)
INTERACTE_INSTANTIATE(double)
#undef INTERACTE_INSTANTIATE

}  // namespace interacte
