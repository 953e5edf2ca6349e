#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "interacte/error.hpp"
#include "interacte/reshape.hpp"
#include "interacte/rng.hpp"

using namespace interacte;

namespace {

// Independent layout oracle: which source owns cell (i, j) of a rows x cols grid.
Source expected_source(ReshapeKind kind, std::size_t tau, std::size_t rows, std::size_t i, std::size_t j) {
  switch (kind) {
    case ReshapeKind::kStack:
      return i < rows / 2 ? Source::kSubject : Source::kRelation;
    case ReshapeKind::kAlternate:
      return (i / tau) % 2 == 0 ? Source::kSubject : Source::kRelation;
    case ReshapeKind::kChequer:
      return (i + j) % 2 == 0 ? Source::kSubject : Source::kRelation;
  }
  return Source::kBlank;
}

// Expected provenance grid for the identity permutation: each source's
// components fill its cells in row-major scan order.
ProvenanceGrid expected_layout(ReshapeKind kind, std::size_t tau, std::size_t d_w, std::size_t d_h) {
  ProvenanceGrid g(2 * d_w, d_h);
  std::uint32_t next_s = 0, next_r = 0;
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < g.cols; ++j) {
      Source s = expected_source(kind, tau, g.rows, i, j);
      g.at(i, j) = {s, s == Source::kSubject ? next_s++ : next_r++};
    }
  }
  return g;
}

std::vector<double> iota_values(std::size_t d, double start) {
  std::vector<double> v(d);
  std::iota(v.begin(), v.end(), start);
  return v;
}

bool is_permutation_of_range(const std::vector<std::uint32_t>& p) {
  std::vector<std::uint32_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) return false;
  }
  return true;
}

// Unordered (subject component, relation component) pairs that share a k x k
// window of the unpadded grid.
std::set<std::pair<std::uint32_t, std::uint32_t>> het_interaction_set(const ProvenanceGrid& g, std::size_t k) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t r0 = 0; r0 + k <= g.rows; ++r0) {
    for (std::size_t c0 = 0; c0 + k <= g.cols; ++c0) {
      std::vector<std::uint32_t> s, r;
      for (std::size_t i = r0; i < r0 + k; ++i) {
        for (std::size_t j = c0; j < c0 + k; ++j) {
          const CellTag& t = g.at(i, j);
          (t.source == Source::kSubject ? s : r).push_back(t.index);
        }
      }
      for (auto a : s) {
        for (auto b : r) out.insert({a, b});
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("make_plan shapes and permutations") {
  auto plan = make_plan(ReshapeKind::kChequer, 10, 20, 1, 99);
  CHECK(plan.rows() == 20);
  CHECK(plan.cols() == 20);
  CHECK(plan.num_permutations() == 1);
  std::vector<std::uint32_t> id(200);
  std::iota(id.begin(), id.end(), 0u);
  CHECK(plan.perm_s[0] == id);
  CHECK(plan.perm_r[0] == id);

  CHECK_THROWS_AS(make_plan(ReshapeKind::kAlternate, 10, 20, 1, 0, 3), PreconditionError);
  CHECK_THROWS_AS(make_plan(ReshapeKind::kStack, 0, 4, 1, 0), PreconditionError);
  CHECK_THROWS_AS(make_plan(ReshapeKind::kStack, 2, 4, 0, 0), PreconditionError);

  auto stack = make_plan(ReshapeKind::kStack, 2, 4, 3, 42);
  REQUIRE(stack.num_permutations() == 3);
  CHECK(stack.perm_s[0] == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(stack.perm_r[0] == stack.perm_s[0]);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(is_permutation_of_range(stack.perm_s[i]));
    CHECK(is_permutation_of_range(stack.perm_r[i]));
  }
  CHECK(make_plan(ReshapeKind::kStack, 2, 4, 3, 42).perm_s == stack.perm_s);
  CHECK(make_plan(ReshapeKind::kStack, 2, 4, 3, 43).perm_s != stack.perm_s);
}

TEST_CASE("layouts of the three reshaping kinds on a 4x4 grid") {
  const auto a = iota_values(8, 1.0);   // a1..a8
  const auto b = iota_values(8, 11.0);  // b1..b8 as 11..18
  SUBCASE("stack") {
    auto plan = make_plan(ReshapeKind::kStack, 2, 4, 1, 0);
    auto g = reshape<double>(plan, 0, a, b);
    const std::vector<double> expected{1, 2, 3, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15, 16, 17, 18};
    CHECK(g.values.cells == expected);
  }
  SUBCASE("alternate(1)") {
    auto plan = make_plan(ReshapeKind::kAlternate, 2, 4, 1, 0, 1);
    auto g = reshape<double>(plan, 0, a, b);
    const std::vector<double> expected{1, 2, 3, 4, 11, 12, 13, 14, 5, 6, 7, 8, 15, 16, 17, 18};
    CHECK(g.values.cells == expected);
  }
  SUBCASE("chequer") {
    auto plan = make_plan(ReshapeKind::kChequer, 2, 4, 1, 0);
    auto g = reshape<double>(plan, 0, a, b);
    const std::vector<double> expected{1, 11, 2, 12, 13, 3, 14, 4, 5, 15, 6, 16, 17, 7, 18, 8};
    CHECK(g.values.cells == expected);
  }
}

TEST_CASE("provenance matches the layout oracle") {
  for (ReshapeKind kind : {ReshapeKind::kStack, ReshapeKind::kAlternate, ReshapeKind::kChequer}) {
    for (std::size_t d_w : {1u, 2u, 3u, 4u, 6u}) {
      for (std::size_t d_h : {1u, 2u, 5u, 8u}) {
        for (std::size_t tau : {1u, 2u, 3u}) {
          if (kind != ReshapeKind::kAlternate && tau != 1) continue;
          if (d_w % tau != 0) continue;
          auto plan = make_plan(kind, d_w, d_h, 1, 0, tau);
          CHECK(reshape_provenance(plan) == expected_layout(kind, tau, d_w, d_h));
        }
      }
    }
  }
}

TEST_CASE("chequer splits cells evenly and has no same-source neighbours") {
  for (std::size_t d_w : {1u, 2u, 3u, 5u, 10u}) {
    for (std::size_t d_h : {1u, 2u, 3u, 7u, 20u}) {
      auto g = reshape_provenance(make_plan(ReshapeKind::kChequer, d_w, d_h, 1, 0));
      std::size_t s = 0, r = 0;
      for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) {
          const Source src = g.at(i, j).source;
          (src == Source::kSubject ? s : r)++;
          if (i + 1 < g.rows) CHECK(g.at(i + 1, j).source != src);
          if (j + 1 < g.cols) CHECK(g.at(i, j + 1).source != src);
        }
      }
      CHECK(s == d_w * d_h);
      CHECK(r == d_w * d_h);
    }
  }
}

TEST_CASE("stack of identical inputs has equal halves") {
  auto plan = make_plan(ReshapeKind::kStack, 3, 5, 1, 0);
  const auto e = iota_values(15, 1.0);
  auto g = reshape<double>(plan, 0, e, e);
  const std::size_t half = g.values.cells.size() / 2;
  CHECK(std::equal(g.values.cells.begin(), g.values.cells.begin() + half, g.values.cells.begin() + half));
}

TEST_CASE("reshape is a bijection for every kind and permutation") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d_w = 1 + rng.below(6);
    const std::size_t d_h = 1 + rng.below(9);
    const auto kind = static_cast<ReshapeKind>(rng.below(3));
    const std::size_t tau = kind == ReshapeKind::kAlternate ? (d_w % 2 == 0 ? 2 : 1) : 1;
    auto plan = make_plan(kind, d_w, d_h, 3, rng.next(), tau);
    const std::size_t d = d_w * d_h;
    std::vector<double> es(d), er(d);
    for (auto& v : es) v = rng.uniform(-1, 1);
    for (auto& v : er) v = rng.uniform(-1, 1);
    for (std::size_t p = 0; p < plan.num_permutations(); ++p) {
      auto g = reshape<double>(plan, p, es, er);
      std::vector<double> s2(d), r2(d);
      unreshape<double>(g.values, g.provenance, s2, r2);
      CHECK(s2 == es);
      CHECK(r2 == er);

      std::vector<double> flat(plan.rows() * plan.cols());
      reshape_into<double>(plan, p, es, er, flat);
      CHECK(flat == g.values.cells);
    }
  }
}

TEST_CASE("reshape_backward is the adjoint of reshape_into") {
  Rng rng(7);
  auto plan = make_plan(ReshapeKind::kChequer, 3, 4, 2, 11);
  const std::size_t d = plan.dim();
  std::vector<double> es(d), er(d), g(2 * d);
  for (auto& v : es) v = rng.uniform(-1, 1);
  for (auto& v : er) v = rng.uniform(-1, 1);
  for (auto& v : g) v = rng.uniform(-1, 1);
  for (std::size_t p = 0; p < 2; ++p) {
    std::vector<double> grid(2 * d);
    reshape_into<double>(plan, p, es, er, grid);
    std::vector<double> gs(d, 0.0), gr(d, 0.0);
    reshape_backward<double>(plan, p, g, gs, gr);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < 2 * d; ++i) lhs += grid[i] * g[i];
    for (std::size_t i = 0; i < d; ++i) rhs += es[i] * gs[i] + er[i] * gr[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  auto plan = make_plan(ReshapeKind::kStack, 2, 2, 1, 0);
  std::vector<double> a(4), b(3);
  CHECK_THROWS_AS(reshape<double>(plan, 0, a, b), ShapeError);
}

TEST_CASE("padding") {
  auto plan = make_plan(ReshapeKind::kChequer, 2, 4, 1, 0);
  const auto a = iota_values(8, 1.0), b = iota_values(8, 11.0);
  auto g = reshape<double>(plan, 0, a, b);

  CHECK(pad(g.values, 0, PadMode::kNone) == g.values);
  CHECK(pad(g.values, 0, PadMode::kCircular) == g.values);

  auto circ = pad(g, 1, PadMode::kCircular);
  CHECK(circ.values.rows == 6);
  CHECK(circ.values.cols == 6);
  CHECK(circ.values.at(0, 0) == g.values.at(3, 3));
  CHECK(circ.provenance.at(0, 0) == g.provenance.at(3, 3));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(circ.values.at(i, j) == g.values.at((i + 3) % 4, (j + 3) % 4));
    }
  }

  auto zero = pad(g, 1, PadMode::kZero);
  std::size_t blank = 0, tagged = 0;
  for (const CellTag& t : zero.provenance.cells) (t.source == Source::kBlank ? blank : tagged)++;
  CHECK(tagged == 16);
  CHECK(blank == 20);
  CHECK(zero.values.at(0, 3) == 0.0);
  CHECK(zero.values.at(1, 1) == g.values.at(0, 0));

  CHECK_THROWS_AS(pad(g.values, 1, PadMode::kNone), PreconditionError);
}

TEST_CASE("permuted chequer grids share few interactions") {
  // d = 100 as a 20 x 10 grid; mean Jaccard overlap between the heterogeneous
  // interaction sets of the identity and a random permutation.
  double total = 0.0;
  const int pairs = 100;
  for (int s = 0; s < pairs; ++s) {
    auto plan = make_plan(ReshapeKind::kChequer, 10, 10, 2, static_cast<std::uint64_t>(s));
    auto a = het_interaction_set(reshape_provenance(plan, 0), 3);
    auto b = het_interaction_set(reshape_provenance(plan, 1), 3);
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    total += static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
  }
  const double mean = total / pairs;
  // Two independent uniform draws covering a fraction rho of all d*d pairs
  // overlap by rho / (2 - rho) in expectation.
  const auto single = het_interaction_set(reshape_provenance(make_plan(ReshapeKind::kChequer, 10, 10, 1, 0), 0), 3);
  const double rho = static_cast<double>(single.size()) / 1e4;
  const double chance = rho / (2.0 - rho);
  MESSAGE("mean Jaccard overlap: " << mean << ", chance level " << chance);
  CHECK(std::abs(mean - chance) < 0.1 * chance);
  CHECK(mean < 0.05);
}
