#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "interacte/kgdata.hpp"
#include "interacte/model.hpp"

namespace interacte {

// Rank of `gold` after removing every other member of `filter`. Ties with the
// gold count half: rank = 1 + #higher + #tied / 2 (mean of the optimistic and
// pessimistic ranks).
template <typename T>
double filtered_rank(std::span<const T> scores, EntityId gold, std::span<const EntityId> filter);

enum class Direction { kHead, kTail };

std::string_view to_string(Direction d);

struct MetricSums {
  double reciprocal = 0.0;
  double rank = 0.0;
  std::size_t hits1 = 0;
  std::size_t hits3 = 0;
  std::size_t hits10 = 0;
  std::size_t n = 0;

  void add(double r);
  void merge(const MetricSums& o);
};

struct RankingMetrics {
  double mrr = 0.0;
  double mr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t n = 0;

  static RankingMetrics from(const MetricSums& s);
};

struct EvaluationResult {
  RankingMetrics overall;
  std::map<Direction, RankingMetrics> by_direction;
  // (direction, category) -> metrics; categories with no queries are absent.
  std::map<std::pair<Direction, RelationCategory>, RankingMetrics> by_category;
  // Filtered candidate count per query, in evaluation order (tail then head
  // for each triple).
  std::vector<std::size_t> candidate_counts;
  std::vector<double> ranks;
};

struct EvalOptions {
  std::size_t batch_size = 256;
  double category_threshold = kDefaultCategoryThreshold;
  // Applied to every score before ranking; used to test invariance.
  std::function<double(double)> score_transform;
  bool filtered = true;
};

// Ranks the tail of every triple given (s, r) and the head given (r, o). With
// inverse relations the head query scores (o, r^-1); otherwise every
// candidate head e is scored as (e, r) and read at column o. Both directions
// carry equal per-query weight.
template <typename T>
EvaluationResult evaluate(const InteractE<T>& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                          const EvalOptions& options = {});

// Expected MRR when the gold rank is uniform over m candidates: H_m / m,
// averaged over queries.
double expected_random_mrr(std::span<const std::size_t> candidate_counts);

}  // namespace interacte
