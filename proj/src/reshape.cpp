#include "interacte/reshape.hpp"

#include <numeric>

#include "interacte/error.hpp"
#include "interacte/rng.hpp"

namespace interacte {

std::string_view to_string(ReshapeKind k) {
  switch (k) {
    case ReshapeKind::kStack: return "stack";
    case ReshapeKind::kAlternate: return "alternate";
    case ReshapeKind::kChequer: return "chequer";
  }
  return "?";
}

std::string_view to_string(PadMode m) {
  switch (m) {
    case PadMode::kNone: return "none";
    case PadMode::kZero: return "zero";
    case PadMode::kCircular: return "circular";
  }
  return "?";
}

ReshapeKind parse_reshape_kind(std::string_view s) {
  if (s == "stack") return ReshapeKind::kStack;
  if (s == "alternate" || s == "alt") return ReshapeKind::kAlternate;
  if (s == "chequer" || s == "checkered") return ReshapeKind::kChequer;
  throw ConfigError("unknown reshaping kind '" + std::string(s) + "'");
}

PadMode parse_pad_mode(std::string_view s) {
  if (s == "none") return PadMode::kNone;
  if (s == "zero") return PadMode::kZero;
  if (s == "circular") return PadMode::kCircular;
  throw ConfigError("unknown padding mode '" + std::string(s) + "'");
}

void ReshapePlan::build_layout() {
  const std::size_t d = dim();
  s_slots_.assign(d, 0);
  r_slots_.assign(d, 0);
  switch (kind) {
    case ReshapeKind::kStack:
      for (std::size_t j = 0; j < d; ++j) {
        s_slots_[j] = static_cast<std::uint32_t>(j);
        r_slots_[j] = static_cast<std::uint32_t>(d + j);
      }
      break;
    case ReshapeKind::kAlternate:
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t row = j / d_h, col = j % d_h;
        const std::size_t block = row / tau, within = row % tau;
        const std::size_t s_row = block * 2 * tau + within;
        s_slots_[j] = static_cast<std::uint32_t>(s_row * d_h + col);
        r_slots_[j] = static_cast<std::uint32_t>((s_row + tau) * d_h + col);
      }
      break;
    case ReshapeKind::kChequer: {
      std::size_t next_s = 0, next_r = 0;
      for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t j = 0; j < cols(); ++j) {
          const auto cell = static_cast<std::uint32_t>(i * cols() + j);
          if ((i + j) % 2 == 0) {
            s_slots_[next_s++] = cell;
          } else {
            r_slots_[next_r++] = cell;
          }
        }
      }
      break;
    }
  }
}

ReshapePlan make_plan(ReshapeKind kind, std::size_t d_w, std::size_t d_h, std::size_t t, std::uint64_t master_seed,
                      std::size_t tau) {
  if (d_w < 1 || d_h < 1) throw PreconditionError("reshape plan needs d_w, d_h >= 1");
  if (t < 1) throw PreconditionError("reshape plan needs t >= 1");
  if (kind == ReshapeKind::kAlternate) {
    if (tau < 1 || d_w % tau != 0) {
      throw PreconditionError("alternate(" + std::to_string(tau) + ") requires tau to divide d_w=" +
                              std::to_string(d_w));
    }
  } else {
    tau = 1;
  }
  ReshapePlan plan;
  plan.kind = kind;
  plan.tau = tau;
  plan.d_w = d_w;
  plan.d_h = d_h;
  const std::size_t d = d_w * d_h;
  std::vector<std::uint32_t> identity(d);
  std::iota(identity.begin(), identity.end(), 0u);
  for (std::size_t i = 0; i < t; ++i) {
    auto ps = identity, pr = identity;
    if (i > 0) {
      Rng rs(derive_seed(master_seed, {stream::kPermutation, i, 0}));
      Rng rr(derive_seed(master_seed, {stream::kPermutation, i, 1}));
      rs.shuffle(std::span<std::uint32_t>(ps));
      rr.shuffle(std::span<std::uint32_t>(pr));
    }
    plan.perm_s.push_back(std::move(ps));
    plan.perm_r.push_back(std::move(pr));
  }
  plan.build_layout();
  return plan;
}

namespace {

void check_dims(const ReshapePlan& plan, std::size_t perm_index, std::size_t ns, std::size_t nr) {
  if (perm_index >= plan.num_permutations()) throw ShapeError("permutation index out of range");
  if (ns != plan.dim() || nr != plan.dim()) {
    throw ShapeError("reshape expects vectors of length " + std::to_string(plan.dim()) + ", got " +
                     std::to_string(ns) + " and " + std::to_string(nr));
  }
}

}  // namespace

ProvenanceGrid reshape_provenance(const ReshapePlan& plan, std::size_t perm_index) {
  if (perm_index >= plan.num_permutations()) throw ShapeError("permutation index out of range");
  ProvenanceGrid g(plan.rows(), plan.cols());
  const auto& ps = plan.perm_s[perm_index];
  const auto& pr = plan.perm_r[perm_index];
  for (std::size_t j = 0; j < plan.dim(); ++j) {
    g.cells[plan.subject_slots()[j]] = {Source::kSubject, ps[j]};
    g.cells[plan.relation_slots()[j]] = {Source::kRelation, pr[j]};
  }
  return g;
}

template <typename T>
void reshape_into(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> e_s, std::span<const T> e_r,
                  std::span<T> out) {
  check_dims(plan, perm_index, e_s.size(), e_r.size());
  if (out.size() != plan.rows() * plan.cols()) throw ShapeError("reshape output buffer has wrong size");
  const auto& ps = plan.perm_s[perm_index];
  const auto& pr = plan.perm_r[perm_index];
  const auto& ss = plan.subject_slots();
  const auto& rs = plan.relation_slots();
  for (std::size_t j = 0; j < plan.dim(); ++j) {
    out[ss[j]] = e_s[ps[j]];
    out[rs[j]] = e_r[pr[j]];
  }
}

template <typename T>
void reshape_backward(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> grad_grid,
                      std::span<T> grad_s, std::span<T> grad_r) {
  check_dims(plan, perm_index, grad_s.size(), grad_r.size());
  if (grad_grid.size() != plan.rows() * plan.cols()) throw ShapeError("reshape gradient buffer has wrong size");
  const auto& ps = plan.perm_s[perm_index];
  const auto& pr = plan.perm_r[perm_index];
  const auto& ss = plan.subject_slots();
  const auto& rs = plan.relation_slots();
  for (std::size_t j = 0; j < plan.dim(); ++j) {
    grad_s[ps[j]] += grad_grid[ss[j]];
    grad_r[pr[j]] += grad_grid[rs[j]];
  }
}

template <typename T>
Reshaped<T> reshape(const ReshapePlan& plan, std::size_t perm_index, std::span<const T> e_s, std::span<const T> e_r) {
  check_dims(plan, perm_index, e_s.size(), e_r.size());
  Reshaped<T> out;
  out.values = Grid<T>(plan.rows(), plan.cols());
  reshape_into<T>(plan, perm_index, e_s, e_r, std::span<T>(out.values.cells));
  out.provenance = reshape_provenance(plan, perm_index);
  return out;
}

template <typename T>
Grid<T> pad(const Grid<T>& g, std::size_t p, PadMode mode, T blank) {
  if (p == 0) return g;
  if (mode == PadMode::kNone) throw PreconditionError("padding width > 0 requires a padding mode");
  Grid<T> out(g.rows + 2 * p, g.cols + 2 * p, blank);
  const auto R = static_cast<std::ptrdiff_t>(g.rows), C = static_cast<std::ptrdiff_t>(g.cols);
  const auto P = static_cast<std::ptrdiff_t>(p);
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.rows); ++i) {
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(out.cols); ++j) {
      std::ptrdiff_t si = i - P, sj = j - P;
      if (mode == PadMode::kCircular) {
        si = ((si % R) + R) % R;
        sj = ((sj % C) + C) % C;
      } else if (si < 0 || sj < 0 || si >= R || sj >= C) {
        continue;
      }
      out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          g.at(static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
    }
  }
  return out;
}

template <typename T>
void unreshape(const Grid<T>& values, const ProvenanceGrid& prov, std::span<T> e_s, std::span<T> e_r) {
  if (values.rows != prov.rows || values.cols != prov.cols) throw ShapeError("value/provenance grid mismatch");
  for (std::size_t c = 0; c < values.cells.size(); ++c) {
    const CellTag& tag = prov.cells[c];
    if (tag.source == Source::kSubject) {
      e_s[tag.index] = values.cells[c];
    } else if (tag.source == Source::kRelation) {
      e_r[tag.index] = values.cells[c];
    }
  }
}

#define INTERACTE_INSTANTIATE(T)                                                                                 \
  template Reshaped<T> reshape<T>(const ReshapePlan&, std::size_t, std::span<const T>, std::span<const T>);     \
  template void reshape_into<T>(const ReshapePlan&, std::size_t, std::span<const T>, std::span<const T>,         \
                                std::span<T>);                                                                   \
  template void reshape_backward<T>(const ReshapePlan&, std::size_t, std::span<const T>, std::span<T>,           \
                                    std::span<T>);                                                               \
  template Grid<T> pad<T>(const Grid<T>&, std::size_t, PadMode, T);                                              \
  template void unreshape<T>(const Grid<T>&, const ProvenanceGrid&, std::span<T>, std::span<T>);

INTERACTE_INSTANTIATE(float)
INTERACTE_INSTANTIATE(double)
#undef INTERACTE_INSTANTIATE

template Grid<CellTag> pad<CellTag>(const Grid<CellTag>&, std::size_t, PadMode, CellTag);

}  // namespace interacte
