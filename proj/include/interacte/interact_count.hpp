#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "interacte/reshape.hpp"

namespace interacte {

// Heterogeneous / homogeneous interaction totals over every k-submatrix of a
// grid. Interactions are ordered pairs: a window with x subject cells and y
// relation cells contributes 2xy heterogeneous and 2(C(x,2)+C(y,2))
// homogeneous interactions.
struct InteractionCount {
  std::uint64_t n_het = 0;
  std::uint64_t n_homo = 0;
  std::uint64_t n_windows = 0;

  friend bool operator==(const InteractionCount&, const InteractionCount&) = default;
};

// Square n x n grid (d_w = n/2, d_h = n), kernel k, padding p on every side.
struct CountQuery {
  ReshapeKind kind = ReshapeKind::kChequer;
  std::size_t tau = 1;
  std::size_t n = 4;
  std::size_t k = 3;
  PadMode pad_mode = PadMode::kNone;
  std::size_t p = 0;

  std::size_t padded_side() const noexcept { return n + 2 * p; }
  std::string label() const;
};

// Throws PreconditionError for odd n, k > padded side, tau not dividing n/2,
// or p > 0 without a padding mode.
void validate(const CountQuery& q);

// Padded provenance grid the query enumerates.
ProvenanceGrid query_grid(const CountQuery& q);

// Per-window contribution for x subject and y relation cells.
InteractionCount window_count(std::uint64_t x, std::uint64_t y);

// 2*C(k^2, 2): total ordered pairs in a fully populated k x k window.
std::uint64_t pairs_per_window(std::size_t k);

// Plain nested-loop enumeration: visits every window and counts its cells.
// Reference implementation, always single-threaded.
InteractionCount count_bruteforce_serial(const CountQuery& q);

// Same enumeration with window rows distributed across OpenMP threads. The
// reduction is over exact integers so the result is independent of the
// partitioning.
InteractionCount count_bruteforce(const CountQuery& q);

// Closed forms for unpadded stack, alternate(1) and chequer grids. Returns
// nullopt outside the formula's domain: padded grids, alternate(tau>1), and
// stack grids with n < 2(k-1) (where not every split row count is reachable).
std::optional<std::uint64_t> count_closed_form(const CountQuery& q);

// C * (k^2 - tau^2/3 - 2/3) with C = n*k^2/4, the heterogeneous-interaction
// expression used to argue monotonicity in tau. Requires tau < k-1, 2*tau | n
// and tau | k; throws PreconditionError otherwise.
double alt_tau_expression(std::size_t n, std::size_t k, std::size_t tau);

struct AltTauComparison {
  std::size_t n = 0, k = 0, tau = 0;
  double expression = 0.0;
  std::uint64_t bruteforce = 0;
  bool agrees = false;
};

// Evaluates the expression beside a brute-force count of the same
// alternate(tau) grid; disagreement is reported, not corrected.
AltTauComparison compare_alt_tau_expression(std::size_t n, std::size_t k, std::size_t tau);

// Largest ordered heterogeneous count a single k x k window can hold:
// k^4/2 for even k, (k^4-1)/2 for odd k.
std::uint64_t max_window_het(std::size_t k);

// Exact threshold test for the alternate-vs-stack claim: n >= 5k/3 - 1 for odd
// k, n >= (5k+2)(k-1)/(3k) for even k.
bool alt_beats_stack_precondition(std::size_t n, std::size_t k);

struct SweepSpec {
  std::vector<std::size_t> sizes;    // n values (even)
  std::vector<std::size_t> kernels;  // k values
  std::vector<std::size_t> taus;     // alternate block heights
  bool include_padded = true;        // also p = floor(k/2) in zero and circular modes
  bool add_boundary_sizes = true;    // smallest even n >= 5k/3 - 1 per k
};

SweepSpec default_sweep();

struct PropositionCheck {
  std::string proposition;  // "4.1" .. "4.4", "amgm"
  std::string query;        // human-readable configuration
  std::uint64_t lhs = 0;    // count claimed to be larger
  std::uint64_t rhs = 0;
  bool holds = true;
  bool in_precondition = true;
};

struct PropositionReport {
  std::vector<PropositionCheck> checks;
  std::vector<AltTauComparison> alt_tau;
  std::size_t violations() const;
  std::size_t out_of_precondition() const;
  std::size_t checked(const std::string& proposition) const;
};

// Checks, with brute-force counts over every configuration of the sweep:
//   4.1  alternate(1) >= stack when n meets the threshold
//   4.2  alternate(tau) >= alternate(tau') for tau < tau'
//   4.3  chequer >= every other reshaping at the same (n, k, padding)
//   4.4  circular padding >= zero padding for every reshaping
//   amgm every chequer window (unpadded or circular) attains max_window_het
// Configurations outside a claim's precondition are recorded with
// in_precondition = false and never count as violations.
PropositionReport verify_propositions(const SweepSpec& sweep);

}  // namespace interacte
