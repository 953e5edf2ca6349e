#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "interacte/cli.hpp"
#include "interacte/config.hpp"
#include "interacte/error.hpp"
#include "test_util.hpp"

using namespace interacte;
using nlohmann::json;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "interacte");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

json tiny_config(const std::filesystem::path& out) {
  return {{"seed", 1},
          {"data", {{"source", "synthetic"}, {"synthetic", {{"n_entities", 20}, {"compositions", true}}}}},
          {"model", {{"d_w", 2}, {"d_h", 4}, {"n_filters", 4}, {"hidden_dropout", 0.2}}},
          {"train", {{"max_epochs", 3}, {"eval_every", 1}, {"batch_size", 16}}},
          {"output", {{"dir", out.string()}}}};
}

std::string write_config(const TempDir& dir, const json& j, const std::string& name = "config.json") {
  write_file(dir / name, j.dump(2));
  return (dir / name).string();
}

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = run_config_from_json(json::parse(R"({"seed": 5, "model": {"k": 5, "reshape": "stack"}})"));
  CHECK(c.seed == 5);
  CHECK(c.train.seed == 5);
  CHECK(c.model.permutation_seed == 5);
  CHECK(c.model.k == 5);
  CHECK(c.model.reshape == ReshapeKind::kStack);
  CHECK(c.model.d_w == ModelConfig{}.d_w);

  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"modle": {}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"kk": 3}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"k": "three"}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"k": -3}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"model": {"reshape": "spiral"}})")), ConfigError);
  CHECK_NOTHROW(run_config_from_json(json::parse(R"({"data": {"synthetic": {"compositions": true}}})")));

  auto k4 = run_config_from_json(json::parse(R"({"model": {"k": 4}})"));
  CHECK_THROWS_AS(k4.validate(), ConfigError);
}

TEST_CASE("config round trip through JSON") {
  auto c = run_config_from_json(json::parse(
      R"({"seed": 3, "model": {"reshape": "alternate", "tau": 2, "conv_mode": "zero", "precision": "float64"},
          "train": {"learning_rate": 0.01}, "eval": {"final_split": "valid"}, "output": {"wallclock": true}})"));
  const json j = to_json(c);
  CHECK(to_json(run_config_from_json(j)) == j);
}

TEST_CASE("relative data paths and environment overrides") {
  TempDir dir;
  write_config(dir, {{"data", {{"source", "files"}, {"dir", "kg"}}}});
  auto c = load_run_config(dir / "config.json");
  CHECK(c.data.dir == dir / "kg");

  ::setenv("INTERACTE_DATA_DIR", "/elsewhere", 1);
  ::setenv("INTERACTE_OUT_DIR", "/out/here", 1);
  auto e = load_run_config(dir / "config.json");
  ::unsetenv("INTERACTE_DATA_DIR");
  ::unsetenv("INTERACTE_OUT_DIR");
  CHECK(e.data.dir == "/elsewhere");
  CHECK(e.output.dir == "/out/here");

  write_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("resolve_data for files and the FB15k-237 statistics check") {
  TempDir dir;
  DataConfig d;
  d.source = "files";
  d.dir = dir.path();
  CHECK_THROWS_AS(resolve_data(d), DataError);

  write_file(dir / "train.txt", "a\tr\tb\nb\tr\tc\n");
  write_file(dir / "valid.txt", "a\tr\tc\n");
  write_file(dir / "test.txt", "c\tr\ta\n");
  auto kg = resolve_data(d);
  CHECK(kg.num_entities() == 3);
  d.expect = "fb15k-237";
  CHECK_THROWS_AS(resolve_data(d), DataError);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}) == kExitConfig);
  CHECK(run({"frobnicate"}) == kExitConfig);
  CHECK(run({"train", "--config", "/nonexistent/config.json"}) == kExitConfig);
  CHECK(run({"eval"}) == kExitConfig);
  CHECK(run({"count", "--sizes", "five"}) == kExitConfig);
}

TEST_CASE("train rejects an even kernel and missing data") {
  TempDir dir;
  json j = tiny_config(dir / "out");
  j["model"]["k"] = 4;
  CHECK(run({"train", "--config", write_config(dir, j)}) == kExitConfig);

  json f = tiny_config(dir / "out");
  f["data"] = {{"source", "files"}, {"dir", (dir / "nothing").string()}};
  CHECK(run({"train", "--config", write_config(dir, f, "files.json")}) == kExitData);
}

TEST_CASE("train then eval writes the documented outputs") {
  TempDir dir;
  const auto out = dir / "run";
  const std::string cfg = write_config(dir, tiny_config(out));
  REQUIRE(run({"train", "--config", cfg}) == kExitOk);
  for (const char* f : {"config.resolved.json", "metrics.jsonl", "checkpoint.bin", "metrics.json", "categories.csv"}) {
    CHECK(std::filesystem::exists(out / f));
  }
  const json metrics = json::parse(read_file(out / "metrics.json"));
  for (const char* k : {"overall", "by_direction", "best_valid_mrr", "best_epoch", "expected_random_mrr"}) {
    CHECK(metrics.contains(k));
  }
  for (const char* k : {"mrr", "mr", "hits1", "hits3", "hits10"}) CHECK(metrics["overall"].contains(k));
  auto lines = csv_lines(out / "metrics.jsonl");
  CHECK(lines.size() == 3 + 4);  // three train records and four evaluations
  for (const auto& line : lines) {
    const json rec = json::parse(line);
    CHECK(rec.contains("epoch"));
    CHECK(rec.contains("split"));
    CHECK(rec["wallclock_s"].is_null());
  }
  CHECK(csv_lines(out / "categories.csv").at(0) == "direction,category,mrr,mr,hits10,n");

  const auto e1 = dir / "eval1", e2 = dir / "eval2";
  const std::string ckpt = (out / "checkpoint.bin").string();
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--out", e1.string()}) == kExitOk);
  REQUIRE(run({"eval", "--checkpoint", ckpt, "--out", e2.string()}) == kExitOk);
  CHECK(read_file(e1 / "metrics.json") == read_file(e2 / "metrics.json"));
  CHECK(read_file(e1 / "categories.csv") == read_file(e2 / "categories.csv"));
  CHECK(json::parse(read_file(e1 / "metrics.json"))["overall"] == metrics["overall"]);

  // Resume continues from the stored state to a larger epoch budget.
  json more = tiny_config(dir / "resumed");
  more["train"]["max_epochs"] = 4;
  REQUIRE(run({"train", "--config", write_config(dir, more, "more.json"), "--resume", ckpt}) == kExitOk);
  CHECK(csv_lines(dir / "resumed" / "metrics.jsonl").size() == 2);

  // A flipped byte is a checkpoint error.
  std::string bytes = read_file(ckpt);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  write_file(dir / "bad.bin", bytes);
  CHECK(run({"eval", "--checkpoint", (dir / "bad.bin").string(), "--out", (dir / "e3").string()}) == kExitData);
  CHECK(run({"eval", "--checkpoint", (dir / "none.bin").string()}) == kExitData);

  // Evaluating against different data is a vocabulary mismatch.
  json other = tiny_config(dir / "e4");
  other["data"]["synthetic"]["n_entities"] = 21;
  CHECK(run({"eval", "--checkpoint", ckpt, "--config", write_config(dir, other, "other.json")}) == kExitData);
}

TEST_CASE("train is byte-for-byte reproducible") {
  TempDir dir;
  // The resolved config embeds the output directory, so both runs write to the same place.
  const std::string cfg = write_config(dir, tiny_config(dir / "run"));
  REQUIRE(run({"train", "--config", cfg}) == kExitOk);
  std::filesystem::rename(dir / "run", dir / "a");
  REQUIRE(run({"train", "--config", cfg}) == kExitOk);
  std::filesystem::rename(dir / "run", dir / "b");
  for (const char* f : {"checkpoint.bin", "metrics.jsonl", "metrics.json", "categories.csv"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
}

TEST_CASE("count writes agreeing rows") {
  TempDir dir;
  REQUIRE(run({"count", "--sizes", "4,8", "--kernels", "3", "--out", dir.path().string()}) == kExitOk);
  auto lines = csv_lines(dir / "counts.csv");
  REQUIRE(lines.size() == 1 + 2 * 3 * 3);
  CHECK(lines[0] == "kind,tau,n,k,pad_mode,p,n_het,n_homo,n_windows,closed_form_het,agrees");
  bool found = false;
  for (const auto& l : lines) found |= l.rfind("chequer,1,4,3,none,0,160,", 0) == 0;
  CHECK(found);
}

TEST_CASE("verify-props and gradcheck succeed") {
  TempDir dir;
  REQUIRE(run({"verify-props", "--max-n", "12", "--max-k", "5", "--out", dir.path().string()}) == kExitOk);
  const json report = json::parse(read_file(dir / "props_report.json"));
  CHECK(report["total_violations"] == 0);

  TempDir g;
  CHECK(run({"gradcheck", "--out", g.path().string()}) == kExitOk);
  const json gc = json::parse(read_file(g / "gradcheck.json"));
  CHECK(gc.is_array());
  CHECK(gc.size() > 0);
}

TEST_CASE("ablate writes one row per cell") {
  TempDir dir;
  json j = tiny_config(dir / "abl");
  j["train"]["max_epochs"] = 1;
  const std::string cfg = write_config(dir, j);
  REQUIRE(run({"ablate", "--config", cfg, "--cells", "chequer+circular,stack+zero", "--seeds", "2", "--t-max", "2",
               "--out", (dir / "abl").string()}) == kExitOk);
  auto rows = csv_lines(dir / "abl" / "ablation.csv");
  CHECK(rows.size() == 3);
  CHECK(csv_lines(dir / "abl" / "t_sweep.csv").size() == 3);
  CHECK(csv_lines(dir / "abl" / "ablation_runs.csv").size() == 1 + 2 * 2 + 2 * 2);
  CHECK(run({"ablate", "--config", cfg, "--cells", "spiral+zero", "--out", (dir / "x").string()}) == kExitConfig);
}
