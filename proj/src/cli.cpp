#include "interacte/cli.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "interacte/checkpoint.hpp"
#include "interacte/config.hpp"
#include "interacte/error.hpp"
#include "interacte/eval.hpp"
#include "interacte/gradcheck.hpp"
#include "interacte/interact_count.hpp"
#include "interacte/train.hpp"

namespace interacte {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::vector<std::size_t> parse_sizes(const std::string& csv, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": \"" + item + "\" is not a non-negative integer");
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " needs at least one value");
  return out;
}

std::vector<std::string> parse_words(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json metrics_json(const RankingMetrics& m) {
  return {{"mrr", m.mrr}, {"mr", m.mr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10}, {"n", m.n}};
}

json history_json(const HistoryRecord& r, bool wallclock) {
  json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  if (r.loss) j["loss"] = *r.loss;
  if (r.metrics) {
    j["mrr"] = r.metrics->mrr;
    j["mr"] = r.metrics->mr;
    j["hits1"] = r.metrics->hits1;
    j["hits3"] = r.metrics->hits3;
    j["hits10"] = r.metrics->hits10;
  }
  j["wallclock_s"] = wallclock ? json(r.wallclock_s) : json(nullptr);
  return j;
}

// metrics.json and categories.csv for one evaluation.
void write_eval_outputs(const fs::path& dir, const EvaluationResult& ev, Split split, json extra) {
  json j = std::move(extra);
  j["split"] = to_string(split);
  j["overall"] = metrics_json(ev.overall);
  for (const auto& [d, m] : ev.by_direction) j["by_direction"][std::string(to_string(d))] = metrics_json(m);
  j["expected_random_mrr"] = expected_random_mrr(ev.candidate_counts);
  write_json(dir / "metrics.json", j);

  std::string csv = "direction,category,mrr,mr,hits10,n\n";
  for (const auto& [key, m] : ev.by_category) {
    csv += std::string(to_string(key.first)) + "," + std::string(to_string(key.second)) + "," + num(m.mrr) + "," +
           num(m.mr, 4) + "," + num(m.hits10) + "," + std::to_string(m.n) + "\n";
  }
  write_text(dir / "categories.csv", csv);
}

json vocab_header(const KnowledgeGraph& kg) { return {{"entities", kg.entities.symbols()}, {"relations", kg.relations.symbols()}}; }

void check_vocab(const json& header, const KnowledgeGraph& kg) {
  try {
    if (header.at("vocab").at("entities").get<std::vector<std::string>>() != kg.entities.symbols() ||
        header.at("vocab").at("relations").get<std::vector<std::string>>() != kg.relations.symbols()) {
      throw DataError("checkpoint vocabulary does not match the data");
    }
  } catch (const json::exception&) {
    throw CheckpointError("checkpoint header lacks a vocabulary");
  }
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.batch_size = cfg.eval.batch_size;
  o.category_threshold = cfg.eval.category_threshold;
  return o;
}

void print_metrics(const std::string& label, const RankingMetrics& m) {
  std::cout << label << " mrr " << num(m.mrr, 4) << " mr " << num(m.mr, 2) << " hits@1 " << num(m.hits1, 4)
            << " hits@3 " << num(m.hits3, 4) << " hits@10 " << num(m.hits10, 4) << " (n=" << m.n << ")\n";
}

struct TrainOutcome {
  RankingMetrics final_metrics;
  double best_valid_mrr = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double seconds = 0.0;
};

// Trains and evaluates the best parameters on cfg.eval.final_split. With an
// output directory, writes checkpoint.bin, metrics.jsonl, metrics.json and
// categories.csv there.
template <typename T>
TrainOutcome train_and_evaluate(const RunConfig& cfg, const KnowledgeGraph& kg, const std::optional<fs::path>& out,
                                const std::optional<fs::path>& resume, bool verbose) {
  const auto started = std::chrono::steady_clock::now();
  std::optional<TrainState<T>> state;
  if (resume) {
    const Checkpoint ck = read_checkpoint(*resume);
    check_vocab(ck.header, kg);
    state = load_train_state<T>(ck, cfg.model, kg.num_entities(), kg.num_relations());
  }

  std::ofstream jsonl;
  if (out) {
    jsonl.open(*out / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
    if (!jsonl) throw DataError("cannot write metrics.jsonl in '" + out->string() + "'");
  }
  TrainHooks hooks;
  hooks.on_record = [&](const HistoryRecord& r) {
    if (jsonl.is_open()) jsonl << history_json(r, cfg.output.wallclock).dump() << "\n" << std::flush;
    if (verbose && r.metrics) {
      std::cerr << "epoch " << r.epoch << " " << r.split << " mrr " << num(r.metrics->mrr, 4) << " hits@10 "
                << num(r.metrics->hits10, 4) << "\n";
    }
  };

  TrainResult<T> res = train_loop<T>(kg, cfg.model, cfg.train, std::move(state), hooks);
  InteractE<T> model(cfg.model, kg.num_entities(), kg.num_relations(), res.best_params);
  const FilterIndex filter(kg);
  const EvaluationResult ev = evaluate(model, kg, cfg.eval.final_split, filter, eval_options(cfg));

  TrainOutcome o;
  o.final_metrics = ev.overall;
  o.best_valid_mrr = res.best_valid_mrr;
  o.best_epoch = res.best_epoch;
  o.epochs_run = res.epochs_run;

  if (out) {
    Checkpoint ck;
    ck.header["config"] = to_json(cfg);
    ck.header["vocab"] = vocab_header(kg);
    ck.header["best_valid_mrr"] = res.best_valid_mrr;
    ck.header["best_epoch"] = res.best_epoch;
    add_params(ck, res.best_params);
    add_train_state(ck, res.final_state);
    if (cfg.output.checkpoint) write_checkpoint(*out / "checkpoint.bin", ck);
    json extra = {{"best_valid_mrr", res.best_valid_mrr},
                  {"best_epoch", res.best_epoch},
                  {"epochs_run", res.epochs_run},
                  {"stopped_early", res.stopped_early}};
    write_eval_outputs(*out, ev, cfg.eval.final_split, extra);
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return o;
}

TrainOutcome dispatch_train(const RunConfig& cfg, const KnowledgeGraph& kg, const std::optional<fs::path>& out,
                            const std::optional<fs::path>& resume, bool verbose) {
  if (cfg.model.precision == Precision::kFloat64) return train_and_evaluate<double>(cfg, kg, out, resume, verbose);
  return train_and_evaluate<float>(cfg, kg, out, resume, verbose);
}

template <typename T>
EvaluationResult evaluate_checkpoint(const Checkpoint& ck, const RunConfig& cfg, const KnowledgeGraph& kg, Split split) {
  ModelParams<T> params = load_params<T>(ck, cfg.model, kg.num_entities(), kg.num_relations());
  InteractE<T> model(cfg.model, kg.num_entities(), kg.num_relations(), std::move(params));
  return evaluate(model, kg, split, FilterIndex(kg), eval_options(cfg));
}

struct CommonOptions {
  std::string config;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "JSON run configuration");
  app->add_option("--threads", o.threads, "cap on worker threads")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--out", o.out, "output directory");
}

RunConfig resolve_run_config(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_run_config(o.config);
  } else {
    apply_env_overrides(cfg);
  }
  if (o.seed) cfg.apply_seed(*o.seed);
  if (o.threads) cfg.threads = *o.threads;
  if (!o.out.empty()) cfg.output.dir = o.out;
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << "\n";
  return cfg;
}

void apply_threads(std::size_t threads) {
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
}

fs::path out_dir_for(const CommonOptions& o) { return o.out.empty() ? fs::path("out") : fs::path(o.out); }

// ---- commands --------------------------------------------------------------

int cmd_train(const CommonOptions& o, const std::string& resume) {
  const RunConfig cfg = resolve_run_config(o);
  apply_threads(cfg.threads);
  const KnowledgeGraph kg = resolve_data(cfg.data);
  prepare_out_dir(cfg.output.dir);
  write_json(cfg.output.dir / "config.resolved.json", to_json(cfg));
  std::cerr << "data: " << kg.num_entities() << " entities, " << kg.num_relations() << " relations, "
            << kg.train.size() << "/" << kg.valid.size() << "/" << kg.test.size() << " triples\n";
  const std::optional<fs::path> res = resume.empty() ? std::nullopt : std::optional<fs::path>(resume);
  const TrainOutcome t = dispatch_train(cfg, kg, cfg.output.dir, res, true);
  std::cout << "best valid mrr " << num(t.best_valid_mrr, 4) << " at epoch " << t.best_epoch << " (" << t.epochs_run
            << " epochs, " << num(t.seconds, 1) << " s)\n";
  print_metrics(std::string(to_string(cfg.eval.final_split)), t.final_metrics);
  return kExitOk;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& split_name) {
  const Split split = parse_split(split_name);
  const Checkpoint ck = read_checkpoint(checkpoint);
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_run_config(o.config);
  } else {
    if (!ck.header.contains("config")) throw CheckpointError("checkpoint has no embedded config");
    cfg = run_config_from_json(ck.header.at("config"));
    apply_env_overrides(cfg);
  }
  if (o.threads) cfg.threads = *o.threads;
  if (!o.out.empty()) cfg.output.dir = o.out;
  cfg.validate();
  apply_threads(cfg.threads);
  const KnowledgeGraph kg = resolve_data(cfg.data);
  check_vocab(ck.header, kg);
  const EvaluationResult ev = cfg.model.precision == Precision::kFloat64
                                  ? evaluate_checkpoint<double>(ck, cfg, kg, split)
                                  : evaluate_checkpoint<float>(ck, cfg, kg, split);
  prepare_out_dir(cfg.output.dir);
  write_json(cfg.output.dir / "config.resolved.json", to_json(cfg));
  write_eval_outputs(cfg.output.dir, ev, split, json::object());
  print_metrics(split_name, ev.overall);
  return kExitOk;
}

struct CountOptions {
  std::string sizes = "8,12,16,20";
  std::string kernels = "3,5,7";
  std::string kinds = "stack,alternate,chequer";
  std::string taus = "1";
  std::string pads = "none,zero,circular";
};

int cmd_count(const CommonOptions& o, const CountOptions& c) {
  apply_threads(o.threads.value_or(0));
  const auto sizes = parse_sizes(c.sizes, "--sizes");
  const auto kernels = parse_sizes(c.kernels, "--kernels");
  const auto taus = parse_sizes(c.taus, "--taus");
  std::vector<ReshapeKind> kinds;
  for (const auto& w : parse_words(c.kinds)) kinds.push_back(parse_reshape_kind(w));
  std::vector<PadMode> pads;
  for (const auto& w : parse_words(c.pads)) pads.push_back(parse_pad_mode(w));
  if (kinds.empty() || pads.empty()) throw ConfigError("--kinds and --pads need at least one value");

  const fs::path dir = out_dir_for(o);
  prepare_out_dir(dir);
  write_json(dir / "config.resolved.json",
             {{"command", "count"},
              {"sizes", sizes},
              {"kernels", kernels},
              {"kinds", parse_words(c.kinds)},
              {"taus", taus},
              {"pads", parse_words(c.pads)}});

  std::string csv = "kind,tau,n,k,pad_mode,p,n_het,n_homo,n_windows,closed_form_het,agrees\n";
  std::size_t rows = 0, skipped = 0, disagreements = 0;
  for (ReshapeKind kind : kinds) {
    const std::vector<std::size_t> kind_taus = kind == ReshapeKind::kAlternate ? taus : std::vector<std::size_t>{1};
    for (std::size_t tau : kind_taus) {
      for (std::size_t n : sizes) {
        for (std::size_t k : kernels) {
          for (PadMode pm : pads) {
            CountQuery q{kind, tau, n, k, pm, pm == PadMode::kNone ? 0 : k / 2};
            try {
              validate(q);
            } catch (const PreconditionError&) {
              ++skipped;
              continue;
            }
            const InteractionCount ic = count_bruteforce(q);
            const auto cf = count_closed_form(q);
            std::string agrees = "n/a";
            if (cf) {
              agrees = *cf == ic.n_het ? "yes" : "no";
              if (*cf != ic.n_het) ++disagreements;
            }
            csv += std::string(to_string(kind)) + "," + std::to_string(tau) + "," + std::to_string(n) + "," +
                   std::to_string(k) + "," + std::string(to_string(pm)) + "," + std::to_string(q.p) + "," +
                   std::to_string(ic.n_het) + "," + std::to_string(ic.n_homo) + "," + std::to_string(ic.n_windows) +
                   "," + (cf ? std::to_string(*cf) : "") + "," + agrees + "\n";
            ++rows;
          }
        }
      }
    }
  }
  write_text(dir / "counts.csv", csv);
  std::cout << rows << " rows written to " << (dir / "counts.csv").string() << " (" << skipped
            << " configurations outside the grid skipped, " << disagreements << " closed-form disagreements)\n";
  return disagreements == 0 ? kExitOk : kExitVerification;
}

int cmd_verify_props(const CommonOptions& o, std::size_t max_n, std::size_t max_k, const std::string& taus) {
  apply_threads(o.threads.value_or(0));
  SweepSpec sweep;
  for (std::size_t n = 4; n <= max_n; n += 2) sweep.sizes.push_back(n);
  for (std::size_t k = 3; k <= max_k; k += 2) sweep.kernels.push_back(k);
  sweep.taus = parse_sizes(taus, "--taus");
  if (sweep.sizes.empty() || sweep.kernels.empty()) throw ConfigError("empty sweep: need --max-n >= 4, --max-k >= 3");

  const auto started = std::chrono::steady_clock::now();
  const PropositionReport rep = verify_propositions(sweep);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json j;
  j["sweep"] = {{"sizes", sweep.sizes}, {"kernels", sweep.kernels}, {"taus", sweep.taus}, {"include_padded", true}};
  json summary = json::object();
  for (const char* p : {"4.1", "4.2", "4.3", "4.4", "amgm"}) {
    std::size_t viol = 0, outside = 0;
    for (const auto& c : rep.checks) {
      if (c.proposition != p) continue;
      if (!c.in_precondition) ++outside;
      else if (!c.holds) ++viol;
    }
    summary[p] = {{"checked", rep.checked(p)}, {"violations", viol}, {"out_of_precondition", outside}};
  }
  j["summary"] = summary;
  json violations = json::array(), outside = json::array();
  for (const auto& c : rep.checks) {
    const json row = {{"proposition", c.proposition}, {"query", c.query}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}};
    if (!c.in_precondition) outside.push_back(row);
    else if (!c.holds) violations.push_back(row);
  }
  j["violations"] = violations;
  j["out_of_precondition"] = outside;
  json alt = json::array();
  for (const auto& a : rep.alt_tau) {
    alt.push_back({{"n", a.n}, {"k", a.k}, {"tau", a.tau}, {"expression", a.expression}, {"bruteforce", a.bruteforce}, {"agrees", a.agrees}});
  }
  j["alt_tau_expression"] = alt;
  j["total_violations"] = rep.violations();

  const fs::path dir = out_dir_for(o);
  prepare_out_dir(dir);
  write_json(dir / "config.resolved.json", {{"command", "verify-props"}, {"max_n", max_n}, {"max_k", max_k}, {"taus", sweep.taus}});
  write_json(dir / "props_report.json", j);

  for (const auto& [p, s] : summary.items()) {
    std::cout << "prop " << p << ": " << s["checked"] << " checks, " << s["violations"] << " violations, "
              << s["out_of_precondition"] << " outside precondition\n";
  }
  std::size_t alt_agree = 0;
  for (const auto& a : rep.alt_tau) alt_agree += a.agrees;
  std::cout << "alt-tau expression agrees with brute force in " << alt_agree << " of " << rep.alt_tau.size()
            << " admissible cases (reported only)\n";
  std::cout << "total violations " << rep.violations() << " (" << num(seconds, 2) << " s)\n";
  return rep.violations() == 0 ? kExitOk : kExitVerification;
}

struct AblateOptions {
  std::size_t seeds = 3;
  std::string cells = "all";
  std::size_t t_max = 5;
  bool no_t_sweep = false;
};

struct Cell {
  ReshapeKind reshape;
  PadMode conv;
};

int cmd_ablate(const CommonOptions& o, const AblateOptions& a) {
  const RunConfig base = resolve_run_config(o);
  apply_threads(base.threads);
  if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const KnowledgeGraph kg = resolve_data(base.data);
  prepare_out_dir(base.output.dir);
  write_json(base.output.dir / "config.resolved.json", to_json(base));

  std::vector<Cell> cells;
  if (a.cells == "all") {
    for (ReshapeKind r : {ReshapeKind::kStack, ReshapeKind::kAlternate, ReshapeKind::kChequer}) {
      for (PadMode m : {PadMode::kZero, PadMode::kCircular}) cells.push_back({r, m});
    }
  } else {
    for (const auto& w : parse_words(a.cells)) {
      const auto plus = w.find('+');
      if (plus == std::string::npos) throw ConfigError("--cells entries look like chequer+circular, got \"" + w + "\"");
      cells.push_back({parse_reshape_kind(w.substr(0, plus)), parse_pad_mode(w.substr(plus + 1))});
    }
  }

  struct Agg {
    std::vector<double> mrr, hits1, hits10;
  };
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto joined = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + num(v[i]);
    return s;
  };

  std::string runs = "experiment,reshape,conv_mode,t,seed,mrr,hits1,hits10,best_valid_mrr,best_epoch,seconds\n";
  auto run_one = [&](const std::string& exp, RunConfig cfg, std::size_t i, Agg& agg) {
    cfg.apply_seed(base.seed + i);
    const TrainOutcome t = dispatch_train(cfg, kg, std::nullopt, std::nullopt, false);
    agg.mrr.push_back(t.final_metrics.mrr);
    agg.hits1.push_back(t.final_metrics.hits1);
    agg.hits10.push_back(t.final_metrics.hits10);
    runs += exp + "," + std::string(to_string(cfg.model.reshape)) + "," + std::string(to_string(cfg.model.conv_mode)) +
            "," + std::to_string(cfg.model.t) + "," + std::to_string(cfg.seed) + "," + num(t.final_metrics.mrr) + "," +
            num(t.final_metrics.hits1) + "," + num(t.final_metrics.hits10) + "," + num(t.best_valid_mrr) + "," +
            std::to_string(t.best_epoch) + "," + num(t.seconds, 2) + "\n";
    std::cerr << exp << " " << to_string(cfg.model.reshape) << "+" << to_string(cfg.model.conv_mode) << " t=" << cfg.model.t
              << " seed " << cfg.seed << ": mrr " << num(t.final_metrics.mrr, 4) << " (" << num(t.seconds, 1) << " s)\n";
  };

  std::string grid = "reshape,conv_mode,seeds,mean_mrr,mean_hits1,mean_hits10,mrr_per_seed,is_default\n";
  for (const Cell& c : cells) {
    RunConfig cfg = base;
    cfg.model.reshape = c.reshape;
    cfg.model.conv_mode = c.conv;
    if (c.reshape == ReshapeKind::kAlternate && cfg.model.d_w % cfg.model.tau != 0) cfg.model.tau = 1;
    Agg agg;
    for (std::size_t i = 0; i < a.seeds; ++i) run_one("grid", cfg, i, agg);
    const bool is_default = c.reshape == ReshapeKind::kChequer && c.conv == PadMode::kCircular;
    grid += std::string(to_string(c.reshape)) + "," + std::string(to_string(c.conv)) + "," + std::to_string(a.seeds) +
            "," + num(mean(agg.mrr)) + "," + num(mean(agg.hits1)) + "," + num(mean(agg.hits10)) + "," + joined(agg.mrr) +
            "," + (is_default ? "1" : "0") + "\n";
    write_text(base.output.dir / "ablation.csv", grid);
  }

  if (!a.no_t_sweep) {
    std::string ts = "t,seeds,mean_mrr,mean_hits1,mean_hits10,mrr_per_seed\n";
    for (std::size_t t = 1; t <= a.t_max; ++t) {
      RunConfig cfg = base;
      cfg.model.t = t;
      Agg agg;
      for (std::size_t i = 0; i < a.seeds; ++i) run_one("t_sweep", cfg, i, agg);
      ts += std::to_string(t) + "," + std::to_string(a.seeds) + "," + num(mean(agg.mrr)) + "," + num(mean(agg.hits1)) +
            "," + num(mean(agg.hits10)) + "," + joined(agg.mrr) + "\n";
      write_text(base.output.dir / "t_sweep.csv", ts);
    }
  }
  write_text(base.output.dir / "ablation_runs.csv", runs);
  std::cout << grid;
  return kExitOk;
}

int cmd_gradcheck(const CommonOptions& o) {
  apply_threads(o.threads.value_or(0));
  const auto cases = run_gradcheck_suite(o.seed.value_or(0));
  bool ok = true;
  json j = json::array();
  for (const auto& c : cases) {
    if (c.report.skipped) {
      std::cout << c.name << ": " << c.report.status << "\n";
    } else {
      std::cout << c.name << ": max relative error " << c.report.max_rel_error << " (tolerance " << c.tolerance << ") "
                << (c.passed() ? "ok" : "FAILED") << "\n";
      ok = ok && c.passed();
    }
    json t = json::array();
    for (const auto& e : c.report.tensors) {
      t.push_back({{"name", e.name}, {"coords", e.coords_checked}, {"max_rel_error", e.max_rel_error}});
    }
    j.push_back({{"name", c.name},
                 {"skipped", c.report.skipped},
                 {"status", c.report.status},
                 {"tolerance", c.tolerance},
                 {"max_rel_error", c.report.max_rel_error},
                 {"passed", c.report.skipped || c.passed()},
                 {"tensors", t}});
  }
  if (!o.out.empty()) {
    prepare_out_dir(o.out);
    write_json(fs::path(o.out) / "config.resolved.json", {{"command", "gradcheck"}, {"seed", o.seed.value_or(0)}});
    write_json(fs::path(o.out) / "gradcheck.json", j);
  }
  return ok ? kExitOk : kExitVerification;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"InteractE link prediction and interaction counting toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string resume, checkpoint, split = "test";
  CountOptions count;
  std::size_t max_n = 24, max_k = 11;
  std::string taus = "1,2,4";
  AblateOptions ablate;

  auto* train = app.add_subcommand("train", "train a model and evaluate the best checkpoint");
  add_common(train, common);
  train->add_option("--resume", resume, "continue from a checkpoint's training state");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin from train")->required();
  eval->add_option("--split", split, "valid or test");

  auto* cnt = app.add_subcommand("count", "interaction counts over a sweep, brute force beside closed forms");
  add_common(cnt, common);
  cnt->add_option("--sizes", count.sizes, "grid sides n (even)");
  cnt->add_option("--kernels", count.kernels, "kernel sizes k");
  cnt->add_option("--kinds", count.kinds, "stack,alternate,chequer");
  cnt->add_option("--taus", count.taus, "alternate block heights");
  cnt->add_option("--pads", count.pads, "none,zero,circular (padded runs use p = k/2)");

  auto* verify = app.add_subcommand("verify-props", "check the interaction inequalities by brute force");
  add_common(verify, common);
  verify->add_option("--max-n", max_n, "largest grid side");
  verify->add_option("--max-k", max_k, "largest kernel size");
  verify->add_option("--taus", taus, "alternate block heights");

  auto* abl = app.add_subcommand("ablate", "reshaping x convolution grid and permutation-count sweep");
  add_common(abl, common);
  abl->add_option("--seeds", ablate.seeds, "runs per cell (seeds seed..seed+N-1)");
  abl->add_option("--cells", ablate.cells, "\"all\" or a list such as chequer+circular,stack+zero");
  abl->add_option("--t-max", ablate.t_max, "largest t in the permutation sweep");
  abl->add_flag("--no-t-sweep", ablate.no_t_sweep, "skip the permutation sweep");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(grad, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(common, resume);
    if (eval->parsed()) return cmd_eval(common, checkpoint, split);
    if (cnt->parsed()) return cmd_count(common, count);
    if (verify->parsed()) return cmd_verify_props(common, max_n, max_k, taus);
    if (abl->parsed()) return cmd_ablate(common, ablate);
    if (grad->parsed()) return cmd_gradcheck(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const VocabError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace interacte
