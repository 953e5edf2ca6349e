#include "interacte/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "interacte/error.hpp"

namespace interacte {

using nlohmann::json;

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  model.permutation_seed = s;
}

std::vector<std::string> RunConfig::validate() const {
  if (data.source != "synthetic" && data.source != "files") {
    throw ConfigError("data.source must be \"synthetic\" or \"files\", got \"" + data.source + "\"");
  }
  if (data.source == "files" && data.dir.empty() && (data.train.empty() || data.valid.empty() || data.test.empty())) {
    throw ConfigError("data.source \"files\" needs data.dir or all of data.train/valid/test");
  }
  if (!data.expect.empty() && data.expect != "fb15k-237") {
    throw ConfigError("data.expect: unknown dataset \"" + data.expect + "\"");
  }
  if (eval.batch_size < 1) throw ConfigError("eval.batch_size must be >= 1");
  if (!(eval.category_threshold > 0)) throw ConfigError("eval.category_threshold must be positive");
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
  model.validate();
  train.validate();
  return model.grid_warnings();
}

namespace {

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(section + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + section);
  }
}

template <typename U>
void read(const json& j, const char* key, U& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    if constexpr (std::is_unsigned_v<U> && !std::is_same_v<U, bool>) {
      if (!j.at(key).is_number_unsigned()) throw ConfigError(section + "." + key + " must be a non-negative integer");
    }
    out = j.at(key).get<U>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

void read_path(const json& j, const char* key, std::filesystem::path& out, const std::string& section) {
  std::string s = out.string();
  read(j, key, s, section);
  out = s;
}

template <typename E, typename Parse>
void read_enum(const json& j, const char* key, E& out, Parse parse, const std::string& section) {
  if (!j.contains(key)) return;
  std::string s;
  read(j, key, s, section);
  try {
    out = parse(s);
  } catch (const Error& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config", {"data", "model", "train", "eval", "output", "seed", "threads"});
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read(j, "seed", s, "config");
    c.apply_seed(s);
  }
  read(j, "threads", c.threads, "config");

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"source", "synthetic", "dir", "train", "valid", "test", "vocab_from_all_splits", "expect"});
    read(d, "source", c.data.source, "data");
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      check_keys(s, "data.synthetic", {"seed", "n_entities", "scheme", "compositions"});
      read(s, "seed", c.data.synthetic.seed, "data.synthetic");
      read(s, "n_entities", c.data.synthetic.n_entities, "data.synthetic");
      read_enum(s, "scheme", c.data.synthetic.scheme, parse_scheme, "data.synthetic");
      read(s, "compositions", c.data.synthetic.compositions, "data.synthetic");
    }
    read_path(d, "dir", c.data.dir, "data");
    read_path(d, "train", c.data.train, "data");
    read_path(d, "valid", c.data.valid, "data");
    read_path(d, "test", c.data.test, "data");
    read(d, "vocab_from_all_splits", c.data.vocab_from_all_splits, "data");
    read(d, "expect", c.data.expect, "data");
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"d_w", "d_h", "t", "k", "n_filters", "reshape", "tau", "conv_mode", "input_dropout", "feature_dropout",
                "hidden_dropout", "label_smoothing", "inverse_relations", "entity_bias", "permutation_seed",
                "precision"});
    auto& mc = c.model;
    read(m, "d_w", mc.d_w, "model");
    read(m, "d_h", mc.d_h, "model");
    read(m, "t", mc.t, "model");
    read(m, "k", mc.k, "model");
    read(m, "n_filters", mc.n_filters, "model");
    read_enum(m, "reshape", mc.reshape, parse_reshape_kind, "model");
    read(m, "tau", mc.tau, "model");
    read_enum(m, "conv_mode", mc.conv_mode, parse_pad_mode, "model");
    read(m, "input_dropout", mc.input_dropout, "model");
    read(m, "feature_dropout", mc.feature_dropout, "model");
    read(m, "hidden_dropout", mc.hidden_dropout, "model");
    read(m, "label_smoothing", mc.label_smoothing, "model");
    read(m, "inverse_relations", mc.inverse_relations, "model");
    read(m, "entity_bias", mc.entity_bias, "model");
    read(m, "permutation_seed", mc.permutation_seed, "model");
    read_enum(m, "precision", mc.precision, parse_precision, "model");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"learning_rate", "batch_size", "max_epochs", "eval_every", "patience", "beta1", "beta2", "adam_eps",
                "l2", "seed"});
    auto& tc = c.train;
    read(t, "learning_rate", tc.learning_rate, "train");
    read(t, "batch_size", tc.batch_size, "train");
    read(t, "max_epochs", tc.max_epochs, "train");
    read(t, "eval_every", tc.eval_every, "train");
    read(t, "patience", tc.patience, "train");
    read(t, "beta1", tc.beta1, "train");
    read(t, "beta2", tc.beta2, "train");
    read(t, "adam_eps", tc.adam_eps, "train");
    read(t, "l2", tc.l2, "train");
    read(t, "seed", tc.seed, "train");
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"batch_size", "category_threshold", "final_split"});
    read(e, "batch_size", c.eval.batch_size, "eval");
    read(e, "category_threshold", c.eval.category_threshold, "eval");
    read_enum(e, "final_split", c.eval.final_split, parse_split, "eval");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, "output", {"dir", "wallclock", "checkpoint"});
    read_path(o, "dir", c.output.dir, "output");
    read(o, "wallclock", c.output.wallclock, "output");
    read(o, "checkpoint", c.output.checkpoint, "output");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  json d;
  d["source"] = c.data.source;
  d["synthetic"] = {{"seed", c.data.synthetic.seed},
                    {"n_entities", c.data.synthetic.n_entities},
                    {"scheme", "modular"},
                    {"compositions", c.data.synthetic.compositions}};
  d["dir"] = c.data.dir.string();
  d["train"] = c.data.train.string();
  d["valid"] = c.data.valid.string();
  d["test"] = c.data.test.string();
  d["vocab_from_all_splits"] = c.data.vocab_from_all_splits;
  d["expect"] = c.data.expect;
  j["data"] = d;
  const auto& m = c.model;
  j["model"] = {{"d_w", m.d_w},
                {"d_h", m.d_h},
                {"t", m.t},
                {"k", m.k},
                {"n_filters", m.n_filters},
                {"reshape", to_string(m.reshape)},
                {"tau", m.tau},
                {"conv_mode", to_string(m.conv_mode)},
                {"input_dropout", m.input_dropout},
                {"feature_dropout", m.feature_dropout},
                {"hidden_dropout", m.hidden_dropout},
                {"label_smoothing", m.label_smoothing},
                {"inverse_relations", m.inverse_relations},
                {"entity_bias", m.entity_bias},
                {"permutation_seed", m.permutation_seed},
                {"precision", to_string(m.precision)}};
  const auto& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"eval_every", t.eval_every},
                {"patience", t.patience},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"l2", t.l2},
                {"seed", t.seed}};
  j["eval"] = {{"batch_size", c.eval.batch_size},
               {"category_threshold", c.eval.category_threshold},
               {"final_split", to_string(c.eval.final_split)}};
  j["output"] = {{"dir", c.output.dir.string()}, {"wallclock", c.output.wallclock}, {"checkpoint", c.output.checkpoint}};
  return j;
}

void apply_env_overrides(RunConfig& c) {
  if (const char* v = std::getenv("INTERACTE_DATA_DIR"); v && *v) {
    c.data.dir = v;
    c.data.train.clear();
    c.data.valid.clear();
    c.data.test.clear();
  }
  if (const char* v = std::getenv("INTERACTE_OUT_DIR"); v && *v) c.output.dir = v;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  const auto base = path.parent_path();
  for (auto* p : {&c.data.dir, &c.data.train, &c.data.valid, &c.data.test}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  apply_env_overrides(c);
  return c;
}

void check_expected_stats(const std::string& name, const DatasetStats& s) {
  if (name.empty()) return;
  if (name != "fb15k-237") throw ConfigError("unknown dataset \"" + name + "\"");
  const DatasetStats& e = kFb15k237Stats;
  auto check = [&](const char* what, std::size_t got, std::size_t want) {
    if (got != want) {
      throw DataError(name + ": expected " + std::to_string(want) + " " + what + ", found " + std::to_string(got));
    }
  };
  check("entities", s.entities, e.entities);
  check("relations", s.relations, e.relations);
  check("train triples", s.train, e.train);
  check("valid triples", s.valid, e.valid);
  check("test triples", s.test, e.test);
}

KnowledgeGraph resolve_data(const DataConfig& d) {
  if (d.source == "synthetic") return generate_synthetic_kg(d.synthetic);
  auto pick = [&](const std::filesystem::path& explicit_path, const char* file) {
    return explicit_path.empty() ? d.dir / file : explicit_path;
  };
  const auto train = pick(d.train, "train.txt");
  const auto valid = pick(d.valid, "valid.txt");
  const auto test = pick(d.test, "test.txt");
  for (const auto& p : {train, valid, test}) {
    if (!std::filesystem::is_regular_file(p)) throw DataError("data file not found: " + p.string());
  }
  if (!d.expect.empty()) check_expected_stats(d.expect, scan_dataset_stats(train, valid, test));
  KnowledgeGraph kg = load_knowledge_graph(train, valid, test, d.vocab_from_all_splits);
  kg.validate();
  return kg;
}

}  // namespace interacte
