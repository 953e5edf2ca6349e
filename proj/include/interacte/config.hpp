#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interacte/kgdata.hpp"
#include "interacte/model.hpp"
#include "interacte/train.hpp"

namespace interacte {

struct DataConfig {
  // "synthetic" or "files".
  std::string source = "synthetic";
  SyntheticSpec synthetic;
  // With source == "files": explicit split paths, or `dir` holding
  // train.txt / valid.txt / test.txt.
  std::filesystem::path dir;
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
  bool vocab_from_all_splits = false;
  // Named dataset whose published statistics are checked on load ("" = none).
  std::string expect;
};

struct EvalConfig {
  std::size_t batch_size = 256;
  double category_threshold = kDefaultCategoryThreshold;
  Split final_split = Split::kTest;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  // Records wall-clock seconds in metrics.jsonl. Off by default so repeated
  // runs produce identical files.
  bool wallclock = false;
  bool checkpoint = true;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  OutputConfig output;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = OpenMP default

  // Applies `seed` to the training stream and the permutation draw.
  void apply_seed(std::uint64_t s);
  // Throws ConfigError; returns grid warnings for valid configs.
  std::vector<std::string> validate() const;
};

// Unknown keys and wrong types are ConfigError. Missing keys keep defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

// Reads a JSON file; relative data paths resolve against the file's directory.
// INTERACTE_DATA_DIR and INTERACTE_OUT_DIR override data.dir and output.dir.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_env_overrides(RunConfig& c);

// Builds the knowledge graph the config names. Missing files and statistics
// mismatches are DataError.
KnowledgeGraph resolve_data(const DataConfig& d);

// Compares raw statistics with a named dataset's published figures.
void check_expected_stats(const std::string& name, const DatasetStats& stats);

}  // namespace interacte
