// curate: command-line front end for the curation stages.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "curate/analytics.hpp"
#include "curate/corpus.hpp"
#include "curate/error.hpp"
#include "curate/mixture.hpp"
#include "curate/pipeline.hpp"

namespace fs = std::filesystem;
using namespace curate;

namespace {

struct Globals {
  std::string config;
  std::string input;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string cache_dir;
  std::string replay;
  bool force = false;
};

RunConfig base_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = load_run_config(g.config);
  if (!g.input.empty()) cfg.input = g.input;
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = std::max<std::size_t>(1, *g.workers);
  if (!g.cache_dir.empty()) cfg.cache_dir = g.cache_dir;
  if (!g.replay.empty()) cfg.replay_dir = g.replay;
  return cfg;
}

// Params for `name` from the config file, if it lists that stage.
Json config_params(const RunConfig& cfg, const std::string& name) {
  for (const auto& s : cfg.stages) {
    if (s.name == name) return s.params;
  }
  return Json::object();
}

void log_manifest(const StageManifest& m, bool skipped) {
  if (skipped) {
    std::fprintf(stderr, "%-15s up to date (%zu records)\n", m.stage.c_str(), m.output_count);
    return;
  }
  std::fprintf(stderr, "%-15s %zu -> %zu (removed %zu) %.2fs\n", m.stage.c_str(), m.input_count,
               m.output_count, m.removed_count, m.duration_s);
}

int run_single(const Globals& g, const std::string& name, const Json& overrides) {
  RunConfig cfg = base_config(g);
  if (cfg.input.empty()) throw PreconditionError("--input is required");
  if (g.output.empty()) throw PreconditionError("--output is required");
  StageSpec spec{name, config_params(cfg, name)};
  for (const auto& [k, v] : overrides.items()) spec.params[k] = v;

  RunConfig one = cfg;
  one.stages = {spec};
  validate_run_config(one);

  const Json params = effective_params(spec, cfg.seed);
  fs::path input = cfg.input;
  if (name == "mix") input = params["plan"].get<std::string>();
  std::string reason;
  switch (resume_state(input, g.output, params, &reason)) {
    case ResumeState::up_to_date:
      if (!g.force) {
        log_manifest(*read_manifest(g.output), true);
        return 0;
      }
      break;
    case ResumeState::stale:
      if (!g.force) {
        throw DigestMismatch(g.output + ": " + reason + "; rerun with --force to overwrite");
      }
      break;
    case ResumeState::absent:
      break;
  }
  StageContext ctx(cfg);
  log_manifest(execute_stage(spec, input, g.output, ctx), false);
  return 0;
}

std::vector<double> parse_edges(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::map<std::string, double> parse_weights(const std::string& s) {
  std::map<std::string, double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("weight '" + item + "' is not metric=value");
    out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return out;
}

void emit(const OrderedJson& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    atomic_write(path, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset curation pipeline: dedup, decontamination, gating, pass-rate selection, "
               "distillation, verification and mixture building."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Run config (JSON)");
  app.add_option("--input", g.input, "Input JSONL");
  app.add_option("--output", g.output, "Output path");
  app.add_option("--seed", g.seed, "Seed");
  app.add_option("--workers", g.workers, "Worker threads");
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_option("--replay", g.replay, "Serve model calls from this store only");
  app.add_flag("--force", g.force, "Rebuild outputs that are stale or present");

  Json overrides = Json::object();
  std::string chosen;
  auto stage = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&chosen, name] { chosen = name; });
    return sub;
  };

  std::string source;
  bool strict = false;
  auto* ingest = stage("ingest", "Map raw JSONL into records");
  ingest->add_option("--source", source, "Source name (default: input file stem)");
  ingest->add_flag("--strict", strict, "Fail on the first malformed line");

  stage("dedup", "Drop exact duplicate questions after normalization");

  std::string benchmarks;
  std::optional<std::size_t> ngram_n;
  auto* decontam = stage("decontam", "Drop records sharing a word n-gram with benchmark items");
  decontam->add_option("--benchmarks", benchmarks, "Benchmark JSONL {name, question}");
  decontam->add_option("--n", ngram_n, "n-gram size");

  std::string gates;
  std::optional<std::size_t> tail;
  auto* filter = stage("filter", "Domain, validity and problem-type gates");
  filter->add_option("--gates", gates, "Comma-separated gate list");
  filter->add_option("--solution-tail", tail, "Characters of solution sent to the model (0 = all)");

  bool with_difficulty = false;
  auto* extract = stage("extract-answer", "Extract the canonical answer from each solution");
  extract->add_option("--solution-tail", tail, "Characters of solution sent to the model (0 = all)");
  extract->add_flag("--with-difficulty", with_difficulty, "Also score difficulty 1-10");

  std::optional<int> select_stage, k;
  std::string role;
  auto* select = stage("select", "Pass@k selection (stage 1 keeps unsolved, stage 2 keeps solved)");
  select->add_option("--stage", select_stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  select->add_option("--k", k, "Samples per problem");
  select->add_option("--role", role, "Solver role");

  auto* distill = stage("distill", "Sample k teacher traces per problem");
  distill->add_option("--k", k, "Traces per problem");
  distill->add_option("--role", role, "Teacher role");

  auto* verify = stage("verify", "Binary verification of every trace");
  verify->add_option("--role", role, "Verifier role");

  std::string policy;
  auto* finalize = stage("finalize", "Emit verified (question, trace) pairs");
  finalize->add_option("--policy", policy, "first_verified | all_verified");

  std::string plan;
  auto* mix = stage("mix", "Build an anchor-and-patch mixture");
  mix->add_option("--plan", plan, "Mixture plan (JSON)")->required();
  mix->add_option("--out", g.output, "Output JSONL (same as --output)");

  std::string bins, tokenizer = "whitespace", weights, report;
  auto* stats = stage("stats", "Length and distribution report; optional score aggregation");
  stats->add_option("--bins", bins, "Histogram edges, comma-separated");
  stats->add_option("--tokenizer", tokenizer, "whitespace | characters");
  stats->add_option("--weights", weights, "metric=weight,... ; writes aggregated records to --output");
  stats->add_option("--report", report, "Write the report here instead of stdout");

  std::string scores;
  auto* efficiency = stage("efficiency", "Data efficiency per 1000 samples from a score table");
  efficiency->add_option("--scores", scores, "CSV rows: name,size,s_base,s_sft")->required();

  stage("run", "Run the configured pipeline with resume");

  CLI11_PARSE(app, argc, argv);

  try {
    if (chosen == "run") {
      if (g.config.empty()) throw PreconditionError("run needs --config");
      RunConfig cfg = base_config(g);
      const auto result = run_pipeline(cfg, g.force);
      for (const auto& s : result.stages) log_manifest(s.manifest, s.skipped);
      std::fprintf(stderr, "%zu of %zu stages executed\n", result.executed, result.stages.size());
      return 0;
    }
    if (chosen == "stats") {
      RunConfig cfg = base_config(g);
      if (cfg.input.empty()) throw PreconditionError("--input is required");
      auto records = read_records(cfg.input).records;
      OrderedJson out;
      out["length"] = length_summary_to_json(
          length_stats(records, tokenizer_mode_from_name(tokenizer), parse_edges(bins)));
      for (const char* axis : {"source", "domain", "difficulty"}) {
        out["distribution"][axis] = distribution_to_json(distribution_report(records, axis_from_name(axis)));
      }
      if (!weights.empty()) {
        if (g.output.empty()) throw PreconditionError("--weights needs --output");
        auto agg = aggregate_scores(std::move(records), parse_weights(weights));
        write_records(agg.records, g.output);
        out["aggregate"] = {{"excluded", agg.excluded}, {"output", g.output}};
      }
      emit(out, report);
      return 0;
    }
    if (chosen == "efficiency") {
      OrderedJson rows = OrderedJson::array();
      for (const auto& e : read_efficiency_csv(scores)) rows.push_back(efficiency_to_json(e));
      emit(rows, g.output);
      return 0;
    }

    if (chosen == "ingest") {
      if (!source.empty()) overrides["source"] = source;
      if (strict) overrides["strict"] = true;
    } else if (chosen == "decontam") {
      if (!benchmarks.empty()) overrides["benchmarks"] = benchmarks;
      if (ngram_n) overrides["n"] = *ngram_n;
    } else if (chosen == "filter" || chosen == "extract-answer") {
      if (!gates.empty()) {
        Json list = Json::array();
        std::stringstream ss(gates);
        std::string item;
        while (std::getline(ss, item, ',')) list.push_back(item);
        overrides["gates"] = list;
      }
      if (with_difficulty) overrides["gates"] = Json::array({"answer_extraction", "difficulty"});
      if (tail) overrides["solution_tail_chars"] = *tail;
    } else if (chosen == "select" || chosen == "distill" || chosen == "verify") {
      if (select_stage) overrides["stage"] = *select_stage;
      if (k) overrides["k"] = *k;
      if (!role.empty()) overrides["role"] = role;
    } else if (chosen == "finalize") {
      if (!policy.empty()) overrides["policy"] = policy;
    } else if (chosen == "mix") {
      overrides["plan"] = plan;
      overrides["seed"] = g.seed ? *g.seed : load_plan(plan).seed;
      if (g.input.empty()) g.input = plan;
    }
    return run_single(g, chosen, overrides);
  } catch (const DigestMismatch& e) {
    std::fprintf(stderr, "refusing: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
