#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace interacte {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId s = 0;
  RelationId r = 0;
  EntityId o = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Dense symbol table: id == insertion position.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> symbols);

  std::uint32_t add(std::string_view symbol);
  std::optional<std::uint32_t> find(std::string_view symbol) const;
  const std::string& symbol(std::uint32_t id) const { return symbols_.at(id); }
  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

enum class Split { kTrain, kValid, kTest };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct KnowledgeGraph {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_relations() const noexcept { return relations.size(); }
  const std::vector<Triple>& split(Split s) const;
  std::vector<Triple>& split(Split s);

  // Throws DataError naming the first violated invariant (id range, split overlap).
  void validate() const;
};

// Parses one TSV split. With `grow` the vocabularies are extended with unseen
// symbols; otherwise an unseen symbol is a VocabError.
std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities, Vocab& relations, bool grow);

// Loads train/valid/test. The vocabulary is built from train only unless
// `vocab_from_all_splits` is set.
KnowledgeGraph load_knowledge_graph(const std::filesystem::path& train, const std::filesystem::path& valid,
                                    const std::filesystem::path& test, bool vocab_from_all_splits = false);

void write_triples(const std::filesystem::path& path, const std::vector<Triple>& triples, const Vocab& entities,
                   const Vocab& relations);
void write_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab read_vocab(const std::filesystem::path& path);

// Raw dataset statistics computed over symbol strings, independent of vocab policy.
struct DatasetStats {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};
DatasetStats scan_dataset_stats(const std::filesystem::path& train, const std::filesystem::path& valid,
                                const std::filesystem::path& test);

// Published FB15k-237 statistics (entities across all splits).
inline constexpr DatasetStats kFb15k237Stats{14541, 237, 272115, 17535, 20466};

class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const KnowledgeGraph& kg);

  // All known objects for (s, r), sorted; empty when unseen.
  const std::vector<EntityId>& objects(EntityId s, RelationId r) const;
  // All known subjects for (r, o), sorted.
  const std::vector<EntityId>& subjects(RelationId r, EntityId o) const;

  std::size_t num_sr_keys() const noexcept { return by_sr_.size(); }
  std::size_t num_ro_keys() const noexcept { return by_ro_.size(); }

 private:
  static std::uint64_t key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_sr_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_ro_;
};

FilterIndex build_filter_index(const KnowledgeGraph& kg);

enum class SyntheticScheme { kModular };

SyntheticScheme parse_scheme(std::string_view s);

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t n_entities = 50;
  SyntheticScheme scheme = SyntheticScheme::kModular;
  // Adds one relation per unordered pair (a, b) of base offsets, meaning "add_a then add_b".
  bool compositions = false;
};

// Base relations add_k: i -> (i + k) mod n for k in {1, 2, 3}; 80/10/10 split by
// seeded shuffle, with valid/test triples whose relation or entities are absent
// from train moved back into train.
KnowledgeGraph generate_synthetic_kg(const SyntheticSpec& spec);

inline constexpr std::uint32_t kModularOffsets[] = {1, 2, 3};

enum class RelationCategory { kOneToOne, kOneToMany, kManyToOne, kManyToMany };

std::string_view to_string(RelationCategory c);

struct RelationCategoryInfo {
  RelationId relation = 0;
  double tails_per_head = 0.0;
  double heads_per_tail = 0.0;
  RelationCategory category = RelationCategory::kOneToOne;
};

inline constexpr double kDefaultCategoryThreshold = 1.5;

RelationCategory classify(double tails_per_head, double heads_per_tail, double threshold);

// One entry per relation with at least one train triple, ordered by relation id.
std::vector<RelationCategoryInfo> categorize_relations(const KnowledgeGraph& kg,
                                                       double threshold = kDefaultCategoryThreshold);

}  // namespace interacte
