#include "interacte/kgdata.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "interacte/error.hpp"
#include "interacte/rng.hpp"

namespace interacte {

Vocab::Vocab(std::vector<std::string> symbols) {
  for (auto& s : symbols) {
    if (find(s)) throw VocabError("duplicate vocab symbol '" + s + "'");
    add(s);
  }
}

std::uint32_t Vocab::add(std::string_view symbol) {
  auto it = index_.find(std::string(symbol));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(symbols_.size());
  symbols_.emplace_back(symbol);
  index_.emplace(symbols_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocab::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

const std::vector<Triple>& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return train;
}

std::vector<Triple>& KnowledgeGraph::split(Split s) {
  return const_cast<std::vector<Triple>&>(std::as_const(*this).split(s));
}

void KnowledgeGraph::validate() const {
  std::set<Triple> seen;
  for (Split sp : {Split::kTrain, Split::kValid, Split::kTest}) {
    std::set<Triple> local;
    for (const Triple& t : split(sp)) {
      if (t.s >= num_entities() || t.o >= num_entities() || t.r >= num_relations()) {
        throw DataError("triple id out of vocab range in " + std::string(to_string(sp)));
      }
      local.insert(t);
    }
    for (const Triple& t : local) {
      if (!seen.insert(t).second) {
        throw DataError("triple (" + entities.symbol(t.s) + ", " + relations.symbol(t.r) + ", " +
                        entities.symbol(t.o) + ") appears in more than one split");
      }
    }
  }
}

namespace {

// Splits on tabs; returns false unless exactly three fields.
bool split_fields(std::string_view line, std::string_view (&out)[3]) {
  std::size_t start = 0;
  for (int f = 0; f < 3; ++f) {
    std::size_t tab = line.find('\t', start);
    if (f < 2) {
      if (tab == std::string_view::npos) return false;
      out[f] = line.substr(start, tab - start);
      start = tab + 1;
    } else {
      if (tab != std::string_view::npos) return false;
      out[f] = line.substr(start);
    }
  }
  return !out[0].empty() && !out[1].empty() && !out[2].empty();
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), lineno);
  }
}

}  // namespace

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities, Vocab& relations, bool grow) {
  std::vector<Triple> out;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    std::string_view f[3];
    if (!split_fields(line, f)) throw ParseError(path.string(), lineno, "expected subject<TAB>relation<TAB>object");
    auto lookup = [&](Vocab& v, std::string_view sym, const char* kind) -> std::uint32_t {
      if (grow) return v.add(sym);
      auto id = v.find(sym);
      if (!id) {
        throw VocabError(path.string() + ":" + std::to_string(lineno) + ": unknown " + kind + " '" +
                         std::string(sym) + "'");
      }
      return *id;
    };
    Triple t;
    t.s = lookup(entities, f[0], "entity");
    t.r = lookup(relations, f[1], "relation");
    t.o = lookup(entities, f[2], "entity");
    out.push_back(t);
  });
  return out;
}

KnowledgeGraph load_knowledge_graph(const std::filesystem::path& train, const std::filesystem::path& valid,
                                    const std::filesystem::path& test, bool vocab_from_all_splits) {
  KnowledgeGraph kg;
  kg.train = load_triples(train, kg.entities, kg.relations, true);
  kg.valid = load_triples(valid, kg.entities, kg.relations, vocab_from_all_splits);
  kg.test = load_triples(test, kg.entities, kg.relations, vocab_from_all_splits);
  kg.validate();
  return kg;
}

void write_triples(const std::filesystem::path& path, const std::vector<Triple>& triples, const Vocab& entities,
                   const Vocab& relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const Triple& t : triples) {
    out << entities.symbol(t.s) << '\t' << relations.symbol(t.r) << '\t' << entities.symbol(t.o) << '\n';
  }
}

void write_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& s : vocab.symbols()) out << s << '\n';
}

Vocab read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) symbols.push_back(line);
  return Vocab(std::move(symbols));
}

DatasetStats scan_dataset_stats(const std::filesystem::path& train, const std::filesystem::path& valid,
                                const std::filesystem::path& test) {
  std::unordered_set<std::string> ents, rels;
  DatasetStats st;
  auto scan = [&](const std::filesystem::path& p, std::size_t& count) {
    for_each_line(p, [&](std::string_view line, std::size_t lineno) {
      std::string_view f[3];
      if (!split_fields(line, f)) throw ParseError(p.string(), lineno, "expected subject<TAB>relation<TAB>object");
      ents.emplace(f[0]);
      rels.emplace(f[1]);
      ents.emplace(f[2]);
      ++count;
    });
  };
  scan(train, st.train);
  scan(valid, st.valid);
  scan(test, st.test);
  st.entities = ents.size();
  st.relations = rels.size();
  return st;
}

FilterIndex::FilterIndex(const KnowledgeGraph& kg) {
  for (Split sp : {Split::kTrain, Split::kValid, Split::kTest}) {
    for (const Triple& t : kg.split(sp)) {
      by_sr_[key(t.s, t.r)].push_back(t.o);
      by_ro_[key(t.r, t.o)].push_back(t.s);
    }
  }
  auto dedup = [](auto& m) {
    for (auto& [k, v] : m) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  };
  dedup(by_sr_);
  dedup(by_ro_);
}

namespace {
const std::vector<EntityId> kEmpty;
}

const std::vector<EntityId>& FilterIndex::objects(EntityId s, RelationId r) const {
  auto it = by_sr_.find(key(s, r));
  return it == by_sr_.end() ? kEmpty : it->second;
}

const std::vector<EntityId>& FilterIndex::subjects(RelationId r, EntityId o) const {
  auto it = by_ro_.find(key(r, o));
  return it == by_ro_.end() ? kEmpty : it->second;
}

FilterIndex build_filter_index(const KnowledgeGraph& kg) { return FilterIndex(kg); }

SyntheticScheme parse_scheme(std::string_view s) {
  if (s == "modular") return SyntheticScheme::kModular;
  throw ConfigError("unknown synthetic scheme '" + std::string(s) + "'");
}

KnowledgeGraph generate_synthetic_kg(const SyntheticSpec& spec) {
  if (spec.n_entities < 8) throw PreconditionError("synthetic KG needs n_entities >= 8");
  KnowledgeGraph kg;
  const auto n = static_cast<std::uint32_t>(spec.n_entities);
  for (std::uint32_t i = 0; i < n; ++i) kg.entities.add("e" + std::to_string(i));

  std::vector<std::uint32_t> offsets;
  for (std::uint32_t k : kModularOffsets) {
    kg.relations.add("add_" + std::to_string(k));
    offsets.push_back(k);
  }
  if (spec.compositions) {
    for (std::size_t a = 0; a < std::size(kModularOffsets); ++a) {
      for (std::size_t b = a; b < std::size(kModularOffsets); ++b) {
        kg.relations.add("add_" + std::to_string(kModularOffsets[a]) + "+add_" + std::to_string(kModularOffsets[b]));
        offsets.push_back(kModularOffsets[a] + kModularOffsets[b]);
      }
    }
  }

  std::vector<Triple> all;
  for (RelationId r = 0; r < offsets.size(); ++r) {
    for (std::uint32_t i = 0; i < n; ++i) all.push_back({i, r, (i + offsets[r]) % n});
  }

  Rng rng(derive_seed(spec.seed, {stream::kSynthetic}));
  rng.shuffle(std::span<Triple>(all));
  const std::size_t n_train = all.size() * 8 / 10;
  const std::size_t n_valid = all.size() / 10;

  std::vector<bool> ent_seen(n, false), rel_seen(offsets.size(), false);
  std::vector<Triple> held;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i < n_train) {
      const Triple& t = all[i];
      kg.train.push_back(t);
      ent_seen[t.s] = ent_seen[t.o] = rel_seen[t.r] = true;
    } else {
      held.push_back(all[i]);
    }
  }
  // Held-out triples that would introduce an untrained symbol go back to train.
  std::vector<Triple> rest;
  for (const Triple& t : held) {
    if (!ent_seen[t.s] || !ent_seen[t.o] || !rel_seen[t.r]) {
      kg.train.push_back(t);
      ent_seen[t.s] = ent_seen[t.o] = rel_seen[t.r] = true;
    } else {
      rest.push_back(t);
    }
  }
  const std::size_t v = std::min(n_valid, rest.size() / 2);
  kg.valid.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(v));
  kg.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(v), rest.end());
  kg.validate();
  return kg;
}

std::string_view to_string(RelationCategory c) {
  switch (c) {
    case RelationCategory::kOneToOne: return "1-1";
    case RelationCategory::kOneToMany: return "1-N";
    case RelationCategory::kManyToOne: return "N-1";
    case RelationCategory::kManyToMany: return "N-N";
  }
  return "?";
}

RelationCategory classify(double tails_per_head, double heads_per_tail, double threshold) {
  const bool many_tails = tails_per_head >= threshold;
  const bool many_heads = heads_per_tail >= threshold;
  if (many_tails && many_heads) return RelationCategory::kManyToMany;
  if (many_tails) return RelationCategory::kOneToMany;
  if (many_heads) return RelationCategory::kManyToOne;
  return RelationCategory::kOneToOne;
}

std::vector<RelationCategoryInfo> categorize_relations(const KnowledgeGraph& kg, double threshold) {
  if (kg.train.empty()) throw PreconditionError("categorize_relations needs a non-empty train split");
  const std::size_t nr = kg.num_relations();
  std::vector<std::size_t> count(nr, 0);
  std::vector<std::unordered_set<EntityId>> heads(nr), tails(nr);
  for (const Triple& t : kg.train) {
    ++count[t.r];
    heads[t.r].insert(t.s);
    tails[t.r].insert(t.o);
  }
  std::vector<RelationCategoryInfo> out;
  for (RelationId r = 0; r < nr; ++r) {
    if (count[r] == 0) continue;
    RelationCategoryInfo info;
    info.relation = r;
    info.tails_per_head = static_cast<double>(count[r]) / static_cast<double>(heads[r].size());
    info.heads_per_tail = static_cast<double>(count[r]) / static_cast<double>(tails[r].size());
    info.category = classify(info.tails_per_head, info.heads_per_tail, threshold);
    out.push_back(info);
  }
  return out;
}

}  // namespace interacte
