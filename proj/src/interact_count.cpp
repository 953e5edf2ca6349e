#include "interacte/interact_count.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "interacte/error.hpp"

namespace interacte {

std::string CountQuery::label() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == ReshapeKind::kAlternate) os << "(" << tau << ")";
  os << " n=" << n << " k=" << k << " pad=" << to_string(pad_mode) << " p=" << p;
  return os.str();
}

void validate(const CountQuery& q) {
  if (q.n < 2 || q.n % 2 != 0) throw PreconditionError("count query needs an even grid side, got n=" + std::to_string(q.n));
  if (q.k < 1) throw PreconditionError("kernel size must be >= 1");
  if (q.p > 0 && q.pad_mode == PadMode::kNone) throw PreconditionError("p > 0 requires a padding mode");
  if (q.k > q.padded_side()) {
    throw PreconditionError("kernel k=" + std::to_string(q.k) + " exceeds padded side " +
                            std::to_string(q.padded_side()));
  }
  if (q.kind == ReshapeKind::kAlternate && (q.tau < 1 || (q.n / 2) % q.tau != 0)) {
    throw PreconditionError("alternate(" + std::to_string(q.tau) + ") needs tau | n/2 for n=" + std::to_string(q.n));
  }
}

ProvenanceGrid query_grid(const CountQuery& q) {
  validate(q);
  const ReshapePlan plan = make_plan(q.kind, q.n / 2, q.n, 1, 0, q.tau);
  ProvenanceGrid g = reshape_provenance(plan);
  return pad(g, q.p, q.p == 0 ? PadMode::kNone : q.pad_mode, CellTag{});
}

InteractionCount window_count(std::uint64_t x, std::uint64_t y) {
  InteractionCount c;
  c.n_het = 2 * x * y;
  c.n_homo = x * (x - (x > 0 ? 1 : 0)) + y * (y - (y > 0 ? 1 : 0));  // 2*C(x,2) + 2*C(y,2)
  c.n_windows = 1;
  return c;
}

std::uint64_t pairs_per_window(std::size_t k) {
  const std::uint64_t cells = std::uint64_t{k} * k;
  return cells * (cells - 1);
}

namespace {

InteractionCount count_window(const ProvenanceGrid& g, std::size_t top, std::size_t left, std::size_t k) {
  std::uint64_t x = 0, y = 0;
  for (std::size_t i = top; i < top + k; ++i) {
    for (std::size_t j = left; j < left + k; ++j) {
      const Source s = g.at(i, j).source;
      x += s == Source::kSubject;
      y += s == Source::kRelation;
    }
  }
  return window_count(x, y);
}

}  // namespace

InteractionCount count_bruteforce_serial(const CountQuery& q) {
  const ProvenanceGrid g = query_grid(q);
  const std::size_t positions = g.rows - q.k + 1;
  InteractionCount total;
  for (std::size_t top = 0; top < positions; ++top) {
    for (std::size_t left = 0; left < positions; ++left) {
      const InteractionCount w = count_window(g, top, left, q.k);
      total.n_het += w.n_het;
      total.n_homo += w.n_homo;
      total.n_windows += 1;
    }
  }
  return total;
}

InteractionCount count_bruteforce(const CountQuery& q) {
  const ProvenanceGrid g = query_grid(q);
  const auto positions = static_cast<std::int64_t>(g.rows - q.k + 1);
  std::uint64_t het = 0, homo = 0, windows = 0;
#pragma omp parallel for schedule(static) reduction(+ : het, homo, windows)
  for (std::int64_t top = 0; top < positions; ++top) {
    for (std::int64_t left = 0; left < positions; ++left) {
      const InteractionCount w =
          count_window(g, static_cast<std::size_t>(top), static_cast<std::size_t>(left), q.k);
      het += w.n_het;
      homo += w.n_homo;
      windows += 1;
    }
  }
  return {het, homo, windows};
}

std::optional<std::uint64_t> count_closed_form(const CountQuery& q) {
  validate(q);
  if (q.p != 0) return std::nullopt;
  const std::uint64_t n = q.n, k = q.k;
  const std::uint64_t positions = n - k + 1;
  switch (q.kind) {
    case ReshapeKind::kStack:
      if (n < 2 * (k - 1)) return std::nullopt;
      return positions * k * k * (k * (k + 1) * (k - 1) / 3);
    case ReshapeKind::kAlternate:
      if (q.tau != 1) return std::nullopt;
      return positions * positions * k * k * 2 * (k / 2) * ((k + 1) / 2);
    case ReshapeKind::kChequer: {
      const std::uint64_t x = (k * k + 1) / 2, y = (k * k) / 2;
      return positions * positions * 2 * x * y;
    }
  }
  return std::nullopt;
}

double alt_tau_expression(std::size_t n, std::size_t k, std::size_t tau) {
  if (tau < 1 || !(tau + 1 < k) || n % (2 * tau) != 0 || k % tau != 0) {
    throw PreconditionError("alt_tau_expression needs tau < k-1, 2*tau | n and tau | k (n=" + std::to_string(n) +
                            ", k=" + std::to_string(k) + ", tau=" + std::to_string(tau) + ")");
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k), td = static_cast<double>(tau);
  const double c = nd * kd * kd / 4.0;
  return c * (kd * kd - td * td / 3.0 - 2.0 / 3.0);
}

AltTauComparison compare_alt_tau_expression(std::size_t n, std::size_t k, std::size_t tau) {
  AltTauComparison cmp;
  cmp.n = n;
  cmp.k = k;
  cmp.tau = tau;
  cmp.expression = alt_tau_expression(n, k, tau);
  CountQuery q{ReshapeKind::kAlternate, tau, n, k, PadMode::kNone, 0};
  cmp.bruteforce = count_bruteforce(q).n_het;
  cmp.agrees = std::fabs(cmp.expression - static_cast<double>(cmp.bruteforce)) < 0.5;
  return cmp;
}

std::uint64_t max_window_het(std::size_t k) {
  const std::uint64_t k4 = std::uint64_t{k} * k * k * k;
  return k % 2 == 0 ? k4 / 2 : (k4 - 1) / 2;
}

bool alt_beats_stack_precondition(std::size_t n, std::size_t k) {
  if (k % 2 == 1) return 3 * n + 3 >= 5 * k;
  return 3 * k * n >= (5 * k + 2) * (k - 1);
}

SweepSpec default_sweep() {
  SweepSpec s;
  for (std::size_t n = 4; n <= 24; n += 2) s.sizes.push_back(n);
  s.kernels = {3, 5, 7, 9, 11};
  s.taus = {1, 2, 4};
  return s;
}

std::size_t PropositionReport::violations() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.in_precondition && !c.holds; }));
}

std::size_t PropositionReport::out_of_precondition() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.in_precondition; }));
}

std::size_t PropositionReport::checked(const std::string& proposition) const {
  return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [&](const auto& c) {
    return c.in_precondition && c.proposition == proposition;
  }));
}

namespace {

struct Padding {
  PadMode mode;
  std::size_t p;
};

std::string padding_label(const Padding& pd) {
  return std::string(to_string(pd.mode)) + " p=" + std::to_string(pd.p);
}

// Smallest even n with 3n >= 5k - 3.
std::size_t boundary_size(std::size_t k) {
  std::size_t n = (5 * k - 3 + 2) / 3;
  if (3 * n < 5 * k - 3) ++n;
  if (n % 2 == 1) ++n;
  return std::max<std::size_t>(n, 2);
}

}  // namespace

PropositionReport verify_propositions(const SweepSpec& sweep) {
  PropositionReport report;
  std::vector<std::size_t> sizes = sweep.sizes;
  if (sweep.add_boundary_sizes) {
    for (std::size_t k : sweep.kernels) sizes.push_back(boundary_size(k));
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<std::size_t> taus = sweep.taus;
  std::sort(taus.begin(), taus.end());

  for (std::size_t n : sizes) {
    if (n % 2 != 0) continue;
    for (std::size_t k : sweep.kernels) {
      std::vector<Padding> paddings{{PadMode::kNone, 0}};
      if (sweep.include_padded && k / 2 > 0) {
        paddings.push_back({PadMode::kZero, k / 2});
        paddings.push_back({PadMode::kCircular, k / 2});
      }
      // het counts per padding, keyed by (kind, tau)
      std::map<std::pair<int, std::size_t>, std::uint64_t> het_by_padding[3];

      for (std::size_t pi = 0; pi < paddings.size(); ++pi) {
        const Padding pd = paddings[pi];
        if (k > n + 2 * pd.p) continue;
        auto& het = het_by_padding[pi];
        auto count = [&](ReshapeKind kind, std::size_t tau) {
          CountQuery q{kind, tau, n, k, pd.mode, pd.p};
          const std::uint64_t v = count_bruteforce(q).n_het;
          het[{static_cast<int>(kind), tau}] = v;
          return v;
        };
        const std::string where = "n=" + std::to_string(n) + " k=" + std::to_string(k) + " " + padding_label(pd);

        const std::uint64_t stack = count(ReshapeKind::kStack, 1);
        const std::uint64_t chequer = count(ReshapeKind::kChequer, 1);
        std::vector<std::pair<std::size_t, std::uint64_t>> alts;
        for (std::size_t tau : taus) {
          if ((n / 2) % tau != 0) continue;
          alts.emplace_back(tau, count(ReshapeKind::kAlternate, tau));
        }

        // 4.1
        for (const auto& [tau, v] : alts) {
          if (tau != 1) continue;
          PropositionCheck c{"4.1", "alternate(1) vs stack, " + where, v, stack, v >= stack,
                             alt_beats_stack_precondition(n, k)};
          report.checks.push_back(c);
        }
        // 4.2
        for (std::size_t a = 0; a < alts.size(); ++a) {
          for (std::size_t b = a + 1; b < alts.size(); ++b) {
            PropositionCheck c{"4.2",
                               "alternate(" + std::to_string(alts[a].first) + ") vs alternate(" +
                                   std::to_string(alts[b].first) + "), " + where,
                               alts[a].second, alts[b].second, alts[a].second >= alts[b].second, true};
            report.checks.push_back(c);
          }
        }
        // 4.3
        report.checks.push_back({"4.3", "chequer vs stack, " + where, chequer, stack, chequer >= stack, true});
        for (const auto& [tau, v] : alts) {
          report.checks.push_back({"4.3", "chequer vs alternate(" + std::to_string(tau) + "), " + where, chequer, v,
                                   chequer >= v, true});
        }
        // Per-window optimum of chequer where every cell is populated.
        if (pd.mode != PadMode::kZero) {
          const std::uint64_t windows = (n + 2 * pd.p - k + 1) * (n + 2 * pd.p - k + 1);
          const std::uint64_t bound = windows * max_window_het(k);
          report.checks.push_back({"amgm", "chequer attains window bound, " + where, chequer, bound,
                                   chequer == bound, true});
        }
      }

      // 4.4: circular vs zero for each reshaping.
      if (paddings.size() == 3) {
        const auto& zero = het_by_padding[1];
        const auto& circ = het_by_padding[2];
        for (const auto& [key, zv] : zero) {
          auto it = circ.find(key);
          if (it == circ.end()) continue;
          std::string kind = std::string(to_string(static_cast<ReshapeKind>(key.first)));
          if (static_cast<ReshapeKind>(key.first) == ReshapeKind::kAlternate) {
            kind += "(" + std::to_string(key.second) + ")";
          }
          report.checks.push_back({"4.4",
                                   "circular vs zero, " + kind + " n=" + std::to_string(n) + " k=" +
                                       std::to_string(k) + " p=" + std::to_string(k / 2),
                                   it->second, zv, it->second >= zv, true});
        }
      }

      for (std::size_t tau : taus) {
        if (tau >= 1 && tau + 1 < k && n % (2 * tau) == 0 && k % tau == 0 && k <= n) {
          report.alt_tau.push_back(compare_alt_tau_expression(n, k, tau));
        }
      }
    }
  }
  return report;
}

}  // namespace interacte
