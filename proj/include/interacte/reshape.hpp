#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace interacte {

enum class ReshapeKind { kStack, kAlternate, kChequer };

enum class PadMode { kNone, kZero, kCircular };

std::string_view to_string(ReshapeKind k);
std::string_view to_string(PadMode m);
ReshapeKind parse_reshape_kind(std::string_view s);
PadMode parse_pad_mode(std::string_view s);

// Row-major 2-D array.
template <typename T>
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> cells;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), cells(r * c, fill) {}

  T& at(std::size_t i, std::size_t j) { return cells[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

enum class Source : std::uint8_t { kBlank = 0, kSubject = 1, kRelation = 2 };

// Which embedding component a grid cell carries. Blank cells (zero padding)
// carry none.
struct CellTag {
  Source source = Source::kBlank;
  std::uint32_t index = 0;

  friend bool operator==(const CellTag&, const CellTag&) = default;
};

using ProvenanceGrid = Grid<CellTag>;

// A reshaping function plus its t permutation pairs. The combined grid is
// (2*d_w) rows by d_h columns, holding d = d_w*d_h components of each input.
struct ReshapePlan {
  ReshapeKind kind = ReshapeKind::kChequer;
  std::size_t tau = 1;  // alternate block height, rows
  std::size_t d_w = 0;
  std::size_t d_h = 0;
  // perm_s[i][j] is the component of e_s placed at position j of the i-th
  // permuted vector; index 0 is the identity.
  std::vector<std::vector<std::uint32_t>> perm_s;
  std::vector<std::vector<std::uint32_t>> perm_r;

  std::size_t dim() const noexcept { return d_w * d_h; }
  std::size_t rows() const noexcept { return 2 * d_w; }
  std::size_t cols() const noexcept { return d_h; }
  std::size_t num_permutations() const noexcept { return perm_s.size(); }

  // Flat cell offset (row-major in the combined grid) for every position of the
  // two permuted vectors. Depends only on kind/tau/d_w/d_h.
  const std::vector<std::uint32_t>& subject_slots() const { return s_slots_; }
  const std::vector<std::uint32_t>& relation_slots() const { return r_slots_; }

  void build_layout();

 private:
  std::vector<std::uint32_t> s_slots_;
  std::vector<std::uint32_t> r_slots_;
};

// Permutations 1..t-1 are Fisher-Yates shuffles seeded by
// derive_seed(master, {kPermutation, i, 0 for e_s | 1 for e_r}).
ReshapePlan make_plan(ReshapeKind kind, std::size_t d_w, std::size_t d_h, std::size_t t, std::uint64_t master_seed,
                      std::size_t tau = 1);

template <typename T>
struct Reshaped {
  Grid<T> values;
  ProvenanceGrid provenance;
};

// Places permutation `perm_index` of (e_s, e_r) into the combined grid.
// Provenance indices refer to the original (unpermuted) components.
template <typename T>
Reshaped<T> reshape(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> e_s, std::span<const T> e_r);

// Provenance only; cheaper when no values are involved.
ProvenanceGrid reshape_provenance(const ReshapePlan& plan, std::size_t perm_index = 0);

// Scatter-free version used by the model: writes permuted values straight into
// `out` (rows*cols) using the plan's slot tables.
template <typename T>
void reshape_into(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> e_s, std::span<const T> e_r,
                  std::span<T> out);

// Adjoint of reshape_into: accumulates the gradient of a grid back onto e_s/e_r.
template <typename T>
void reshape_backward(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> grad_grid,
                      std::span<T> grad_s, std::span<T> grad_r);

// Pads by p on every side. Zero mode fills with `blank`; circular mode wraps
// (index arithmetic modulo the grid dims). kNone requires p == 0.
template <typename T>
Grid<T> pad(const Grid<T>& g, std::size_t p, PadMode mode, T blank = T{});

template <typename T>
Reshaped<T> pad(const Reshaped<T>& g, std::size_t p, PadMode mode) {
  return {pad(g.values, p, mode, T{}), pad(g.provenance, p, mode, CellTag{})};
}

// Inverts a provenance-tagged grid back into (e_s, e_r) of length d.
template <typename T>
void unreshape(const Grid<T>& values, const ProvenanceGrid& prov, std::span<T> e_s, std::span<T> e_r);

}  // namespace interacte
