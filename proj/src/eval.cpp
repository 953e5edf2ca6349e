#include "interacte/eval.hpp"

#include <algorithm>
#include <unordered_map>

#include "interacte/error.hpp"

namespace interacte {

template <typename T>
double filtered_rank(std::span<const T> scores, EntityId gold, std::span<const EntityId> filter) {
  if (gold >= scores.size()) throw PreconditionError("gold entity out of range");
  std::vector<EntityId> sorted;
  if (!std::is_sorted(filter.begin(), filter.end())) {
    sorted.assign(filter.begin(), filter.end());
    std::sort(sorted.begin(), sorted.end());
    filter = sorted;
  }
  const T g = scores[gold];
  std::size_t higher = 0, tied = 0;
  auto f = filter.begin();
  for (std::size_t e = 0; e < scores.size(); ++e) {
    while (f != filter.end() && *f < e) ++f;
    if (e == gold) continue;
    if (f != filter.end() && *f == e) continue;
    if (scores[e] > g) {
      ++higher;
    } else if (scores[e] == g) {
      ++tied;
    }
  }
  return 1.0 + static_cast<double>(higher) + static_cast<double>(tied) / 2.0;
}

std::string_view to_string(Direction d) { return d == Direction::kHead ? "head" : "tail"; }

void MetricSums::add(double r) {
  reciprocal += 1.0 / r;
  rank += r;
  hits1 += r <= 1.0;
  hits3 += r <= 3.0;
  hits10 += r <= 10.0;
  ++n;
}

void MetricSums::merge(const MetricSums& o) {
  reciprocal += o.reciprocal;
  rank += o.rank;
  hits1 += o.hits1;
  hits3 += o.hits3;
  hits10 += o.hits10;
  n += o.n;
}

RankingMetrics RankingMetrics::from(const MetricSums& s) {
  RankingMetrics m;
  m.n = s.n;
  if (s.n == 0) return m;
  const double n = static_cast<double>(s.n);
  m.mrr = s.reciprocal / n;
  m.mr = s.rank / n;
  m.hits1 = static_cast<double>(s.hits1) / n;
  m.hits3 = static_cast<double>(s.hits3) / n;
  m.hits10 = static_cast<double>(s.hits10) / n;
  return m;
}

namespace {

struct RankQuery {
  Direction direction;
  EntityId gold;
  RelationId relation;  // base relation, for categories
  Query scored;         // row to score (tail queries and inverse heads)
  EntityId column;      // head queries without inverses: object column
  const std::vector<EntityId>* filter;
};

}  // namespace

template <typename T>
EvaluationResult evaluate(const InteractE<T>& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                          const EvalOptions& options) {
  const auto& triples = kg.split(split);
  if (triples.empty()) throw PreconditionError("cannot evaluate an empty split");
  if (model.num_entities() != kg.num_entities() || model.num_relations() != kg.num_relations()) {
    throw PreconditionError("model vocabulary does not match the knowledge graph");
  }
  const bool inverse = model.config().inverse_relations;
  const std::size_t N = model.num_entities();
  static const std::vector<EntityId> kNoFilter;

  std::vector<RankQuery> queries;
  queries.reserve(triples.size() * 2);
  for (const Triple& t : triples) {
    const auto* tail_filter = options.filtered ? &filter.objects(t.s, t.r) : &kNoFilter;
    const auto* head_filter = options.filtered ? &filter.subjects(t.r, t.o) : &kNoFilter;
    queries.push_back({Direction::kTail, t.o, t.r, Query{t.s, t.r}, 0, tail_filter});
    if (inverse) {
      queries.push_back({Direction::kHead, t.s, t.r, Query{t.o, model.relation_row(t.r, true)}, 0, head_filter});
    } else {
      queries.push_back({Direction::kHead, t.s, t.r, Query{}, t.o, head_filter});
    }
  }

  EvaluationResult res;
  res.ranks.assign(queries.size(), 0.0);
  res.candidate_counts.assign(queries.size(), 0);

  auto rank_row = [&](std::size_t qi, std::span<const T> row) {
    const RankQuery& q = queries[qi];
    if (options.score_transform) {
      std::vector<double> tr(row.size());
      for (std::size_t e = 0; e < row.size(); ++e) tr[e] = options.score_transform(static_cast<double>(row[e]));
      res.ranks[qi] = filtered_rank<double>(tr, q.gold, *q.filter);
    } else {
      res.ranks[qi] = filtered_rank<T>(row, q.gold, *q.filter);
    }
    const std::size_t others =
        q.filter->size() - (std::binary_search(q.filter->begin(), q.filter->end(), q.gold) ? 1 : 0);
    res.candidate_counts[qi] = N - others;
  };

  // Directly scored queries, in batches.
  std::vector<std::size_t> direct;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].direction == Direction::kTail || inverse) direct.push_back(i);
  }
  const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t start = 0; start < direct.size(); start += bs) {
    const std::size_t end = std::min(direct.size(), start + bs);
    std::vector<Query> pairs;
    for (std::size_t i = start; i < end; ++i) pairs.push_back(queries[direct[i]].scored);
    const Tensor<T> logits = model.logits(pairs, 0, false);
    const auto rows = static_cast<std::int64_t>(end - start);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < rows; ++b) {
      rank_row(direct[start + static_cast<std::size_t>(b)], logits.row(static_cast<std::size_t>(b)));
    }
  }

  // Head queries without inverse relations: score (e, r) for all e once per r.
  if (!inverse) {
    std::map<RelationId, std::vector<std::size_t>> by_rel;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (queries[i].direction == Direction::kHead) by_rel[queries[i].relation].push_back(i);
    }
    for (const auto& [r, idx] : by_rel) {
      std::vector<Query> pairs;
      for (EntityId e = 0; e < N; ++e) pairs.push_back({e, r});
      const Tensor<T> all = model.logits(pairs, 0, false);  // [subject, object]
      const auto count = static_cast<std::int64_t>(idx.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t j = 0; j < count; ++j) {
        const std::size_t qi = idx[static_cast<std::size_t>(j)];
        std::vector<T> column(N);
        for (std::size_t e = 0; e < N; ++e) column[e] = all.data[e * N + queries[qi].column];
        rank_row(qi, column);
      }
    }
  }

  std::unordered_map<RelationId, RelationCategory> category;
  if (!kg.train.empty()) {
    for (const auto& info : categorize_relations(kg, options.category_threshold)) category[info.relation] = info.category;
  }
  MetricSums overall;
  std::map<Direction, MetricSums> dir;
  std::map<std::pair<Direction, RelationCategory>, MetricSums> cat;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const double r = res.ranks[i];
    overall.add(r);
    dir[queries[i].direction].add(r);
    auto it = category.find(queries[i].relation);
    if (it != category.end()) cat[{queries[i].direction, it->second}].add(r);
  }
  res.overall = RankingMetrics::from(overall);
  for (const auto& [d, s] : dir) res.by_direction[d] = RankingMetrics::from(s);
  for (const auto& [k, s] : cat) res.by_category[k] = RankingMetrics::from(s);
  return res;
}

double expected_random_mrr(std::span<const std::size_t> candidate_counts) {
  if (candidate_counts.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t m : candidate_counts) {
    double h = 0.0;
    for (std::size_t i = 1; i <= m; ++i) h += 1.0 / static_cast<double>(i);
    total += h / static_cast<double>(m);
  }
  return total / static_cast<double>(candidate_counts.size());
}

template double filtered_rank<float>(std::span<const float>, EntityId, std::span<const EntityId>);
template double filtered_rank<double>(std::span<const double>, EntityId, std::span<const EntityId>);
template EvaluationResult evaluate<float>(const InteractE<float>&, const KnowledgeGraph&, Split, const FilterIndex&,
                                          const EvalOptions&);
template EvaluationResult evaluate<double>(const InteractE<double>&, const KnowledgeGraph&, Split, const FilterIndex&,
                                           const EvalOptions&);

}  // namespace interacte
