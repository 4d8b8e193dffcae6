#include "curate/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "curate/corpus.hpp"
#include "curate/dedup.hpp"
#include "curate/digest.hpp"
#include "curate/distill.hpp"
#include "curate/error.hpp"
#include "curate/gates.hpp"
#include "curate/mixture.hpp"
#include "curate/normalize.hpp"
#include "curate/parallel.hpp"
#include "curate/selection.hpp"

namespace curate {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> k_stages = {"ingest", "dedup",  "decontam", "filter",   "extract-answer",
                                           "select", "distill", "verify",  "finalize", "mix"};

std::string resolve_str(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

fs::path resolve_path(const fs::path& base, const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  return resolve_str(base, j[key].get<std::string>());
}

template <typename T>
T param(const Json& p, const char* key, T fallback) {
  if (!p.contains(key) || p[key].is_null()) return fallback;
  return p[key].get<T>();
}

std::string required_string(const Json& p, const std::string& stage, const char* key) {
  if (!p.contains(key) || !p[key].is_string() || p[key].get<std::string>().empty()) {
    throw PreconditionError("stage '" + stage + "' needs a '" + key + "' parameter");
  }
  return p[key].get<std::string>();
}

std::vector<Gate> gates_of(const Json& p) {
  std::vector<Gate> out;
  for (const auto& g : p.at("gates")) out.push_back(gate_from_name(g.get<std::string>()));
  return out;
}

std::string role_for_gate(Gate g) {
  const GateConfig defaults;
  switch (g) {
    case Gate::domain: return defaults.domain_role;
    case Gate::validity: return defaults.validity_role;
    case Gate::answer_extraction: return defaults.extraction_role;
    case Gate::difficulty: return defaults.difficulty_role;
    case Gate::problem_type: return {};
  }
  return {};
}

}  // namespace

bool is_known_stage(const std::string& name) {
  return std::find(k_stages.begin(), k_stages.end(), name) != k_stages.end();
}

Json effective_params(const StageSpec& spec, std::uint64_t seed) {
  if (!is_known_stage(spec.name)) throw ParseError("unknown stage '" + spec.name + "'");
  if (!spec.params.is_object()) throw ParseError("params of stage '" + spec.name + "' must be an object");
  Json p = spec.params;
  auto fill = [&](const char* key, Json v) {
    if (!p.contains(key) || p[key].is_null()) p[key] = std::move(v);
  };
  const auto& n = spec.name;
  if (n == "ingest") {
    fill("source", "");
    fill("strict", false);
    fill("id_field", "id");
    fill("source_field", "source");
    fill("question_field", "question");
    fill("solution_field", "solution");
    fill("answer_field", "answer");
  } else if (n == "decontam") {
    fill("n", 10);
    required_string(p, n, "benchmarks");
  } else if (n == "filter") {
    fill("gates", Json::array({"domain", "validity", "problem_type"}));
    fill("solution_tail_chars", 0);
  } else if (n == "extract-answer") {
    fill("gates", Json::array({"answer_extraction"}));
    fill("solution_tail_chars", 0);
  } else if (n == "select") {
    fill("stage", 1);
    const int stage = p["stage"].get<int>();
    if (stage != 1 && stage != 2) throw ParseError("select stage must be 1 or 2");
    const auto cfg = stage == 1 ? SelectionConfig::stage1() : SelectionConfig::stage2();
    fill("k", cfg.k);
    fill("role", cfg.preset.role);
  } else if (n == "distill") {
    fill("k", 5);
    fill("role", DistillConfig{}.teacher_role);
  } else if (n == "verify") {
    fill("role", DistillConfig{}.verifier_role);
  } else if (n == "finalize") {
    fill("policy", "first_verified");
  } else if (n == "mix") {
    required_string(p, n, "plan");
    fill("seed", seed);
  }
  if (p.contains("gates")) gates_of(p);  // validates names
  return p;
}

std::set<std::string> stage_roles(const StageSpec& spec) {
  const Json p = effective_params(spec, 0);
  std::set<std::string> roles;
  if (spec.name == "filter" || spec.name == "extract-answer") {
    for (Gate g : gates_of(p)) {
      if (auto r = role_for_gate(g); !r.empty()) roles.insert(r);
    }
  } else if (spec.name == "select" || spec.name == "distill" || spec.name == "verify") {
    roles.insert(p["role"].get<std::string>());
  } else if (spec.name == "mix") {
    const auto plan = load_plan(p["plan"].get<std::string>());
    for (const auto& patch : plan.patches) {
      if (!patch.embeddings && patch.budget > 0) roles.insert(plan.embed_role);
    }
  }
  return roles;
}

RunConfig run_config_from_json(const Json& j, const fs::path& base) {
  RunConfig cfg;
  try {
    cfg.input = resolve_path(base, j, "input");
    if (j.contains("work_dir")) cfg.work_dir = resolve_path(base, j, "work_dir");
    else if (!base.empty()) cfg.work_dir = base / "work";
    cfg.seed = param<std::uint64_t>(j, "seed", 0);
    cfg.workers = param<std::size_t>(j, "workers", 1);
    cfg.cache_dir = resolve_path(base, j, "cache_dir");
    cfg.replay_dir = resolve_path(base, j, "replay_dir");
    cfg.prompts_dir = resolve_path(base, j, "prompts_dir");
    const Json roles = j.value("roles", Json::object());
    for (const auto& [name, r] : roles.items()) {
      RoleEndpoint e;
      e.base_url = r.at("url").get<std::string>();
      e.model = r.at("model").get<std::string>();
      e.api_key_env = r.value("api_key_env", std::string());
      e.requests_per_second = r.value("requests_per_second", 0.0);
      cfg.roles[name] = e;
    }
    for (const auto& s : j.value("stages", Json::array())) {
      StageSpec spec;
      if (s.is_string()) {
        spec.name = s.get<std::string>();
      } else {
        spec.name = s.at("name").get<std::string>();
        spec.params = s.value("params", Json::object());
      }
      for (const char* key : {"benchmarks", "plan"}) {
        if (spec.params.contains(key) && spec.params[key].is_string()) {
          spec.params[key] = resolve_str(base, spec.params[key].get<std::string>());
        }
      }
      cfg.stages.push_back(std::move(spec));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed run config: ") + e.what());
  }
  if (cfg.workers == 0) cfg.workers = 1;
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.stages.empty()) throw PreconditionError("no stages configured");
  std::set<std::string> missing;
  for (const auto& s : cfg.stages) {
    if (!is_known_stage(s.name)) throw PreconditionError("unknown stage '" + s.name + "'");
    effective_params(s, cfg.seed);
    if (!cfg.replay_dir.empty()) continue;
    for (const auto& role : stage_roles(s)) {
      if (!cfg.roles.contains(role)) missing.insert(role);
    }
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw PreconditionError("no endpoint configured for role(s): " + names);
  }
}

StageContext::StageContext(const RunConfig& cfg) : StageContext(cfg, nullptr) {}

StageContext::StageContext(const RunConfig& cfg, std::shared_ptr<ModelClient> client)
    : cfg_(cfg),
      workers_(std::max<std::size_t>(1, cfg.workers)),
      seed_(cfg.seed),
      prompts_(cfg.prompts_dir.empty() ? PromptSet::defaults() : PromptSet::load(cfg.prompts_dir)),
      client_(std::move(client)) {}

ModelClient& StageContext::client() {
  if (!client_) {
    if (!cfg_.replay_dir.empty()) {
      client_ = ModelClient::replay(cfg_.replay_dir);
    } else {
      ClientOptions opts;
      opts.cache_dir = cfg_.cache_dir;
      client_ = std::make_shared<ModelClient>(opts, cfg_.roles, std::make_shared<HttpTransport>());
    }
  }
  return *client_;
}

fs::path sidecar_path(const fs::path& output, const std::string& tag) {
  fs::path p = output;
  p.replace_extension();
  return fs::path(p.string() + "." + tag + ".jsonl");
}

fs::path stage_output_path(const RunConfig& cfg, std::size_t index) {
  char prefix[8];
  std::snprintf(prefix, sizeof prefix, "%02zu-", index + 1);
  return cfg.work_dir / (prefix + cfg.stages.at(index).name + ".jsonl");
}

namespace {

template <typename T, typename Fn>
std::vector<OrderedJson> rows_of(const std::vector<T>& items, Fn fn) {
  std::vector<OrderedJson> rows;
  rows.reserve(items.size());
  for (const auto& it : items) rows.push_back(fn(it));
  return rows;
}

std::vector<Record> ingest(const fs::path& input, const Json& p, StageManifest& m) {
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input.string());
  const bool strict = p["strict"].get<bool>();
  std::string default_source = p["source"].get<std::string>();
  if (default_source.empty()) default_source = input.stem().string();
  const auto f = [&](const char* key) { return p[key].get<std::string>(); };
  const std::string id_f = f("id_field"), source_f = f("source_field"), q_f = f("question_field"),
                    sol_f = f("solution_field"), ans_f = f("answer_field");

  std::vector<Record> out;
  std::size_t skipped = 0, line_no = 0;
  std::string line;
  auto text_of = [](const Json& raw, const std::string& key) -> std::optional<std::string> {
    if (!raw.contains(key) || raw[key].is_null()) return std::nullopt;
    if (raw[key].is_string()) return raw[key].get<std::string>();
    if (raw[key].is_number()) return raw[key].dump();
    throw ParseError("field '" + key + "' is neither text nor a number");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (collapse_whitespace(line).empty()) continue;
    try {
      const Json raw = Json::parse(line);
      if (!raw.is_object()) throw ParseError("not a JSON object");
      Record rec;
      rec.source = text_of(raw, source_f).value_or(default_source);
      rec.id = text_of(raw, id_f).value_or(rec.source + "-" + std::to_string(line_no));
      auto q = text_of(raw, q_f);
      if (!q) throw ParseError("missing '" + q_f + "'");
      rec.question = *q;
      rec.solution = text_of(raw, sol_f);
      rec.answer = text_of(raw, ans_f);
      for (const auto& [key, value] : raw.items()) {
        if (key != id_f && key != source_f && key != q_f && key != sol_f && key != ans_f) {
          rec.meta[key] = value;
        }
      }
      validate_record(rec);
      out.push_back(std::move(rec));
    } catch (const std::exception& e) {
      if (strict) {
        throw ParseError(input.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      ++skipped;
    }
  }
  m.input_count = out.size() + skipped;
  m.removed_count = skipped;
  m.details["skipped_lines"] = skipped;
  return out;
}

GateConfig gate_config(const Json& p, const StageContext& ctx) {
  GateConfig cfg;
  cfg.prompts = ctx.prompts();
  cfg.solution_tail_chars = p["solution_tail_chars"].get<std::size_t>();
  return cfg;
}

void check_unique(const std::vector<Record>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw PreconditionError("duplicate record id '" + r.id + "'");
  }
}

}  // namespace

StageManifest execute_stage(const StageSpec& spec, const fs::path& input, const fs::path& output,
                            StageContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  const Json p = effective_params(spec, ctx.seed());
  const auto& name = spec.name;
  const std::size_t workers = ctx.workers();
  if (!output.parent_path().empty()) fs::create_directories(output.parent_path());

  StageManifest m;
  std::vector<Record> out;
  std::optional<std::string> final_bytes;
  std::vector<std::pair<std::string, std::vector<OrderedJson>>> sidecars;

  auto load = [&] { return read_records(input).records; };
  auto adopt = [&](StageManifest module) {
    m.input_count = module.input_count;
    m.removed_count = module.removed_count;
    m.details = module.details;
    if (!module.params.empty()) m.details["module_params"] = module.params;
  };

  if (name == "ingest") {
    out = ingest(input, p, m);
  } else if (name == "dedup") {
    auto r = exact_dedup(load());
    adopt(r.manifest);
    out = std::move(r.kept);
  } else if (name == "decontam") {
    const auto index = build_ngram_index(load_benchmarks(p["benchmarks"].get<std::string>()),
                                         p["n"].get<std::size_t>(), workers);
    auto r = decontaminate(load(), index, workers);
    adopt(r.manifest);
    sidecars.emplace_back("removed", rows_of(r.removals, removal_to_json));
    out = std::move(r.kept);
  } else if (name == "filter" || name == "extract-answer") {
    const auto gates = gates_of(p);
    const auto cfg = gate_config(p, ctx);
    bool needs_client = false;
    for (Gate g : gates) needs_client = needs_client || g != Gate::problem_type;
    auto r = run_gates(load(), gates, needs_client ? &ctx.client() : nullptr, cfg, workers);
    adopt(r.manifest);
    sidecars.emplace_back("decisions", rows_of(r.decisions, decision_to_json));
    sidecars.emplace_back("quarantine", rows_of(r.quarantined, quarantine_to_json));
    out = std::move(r.kept);
  } else if (name == "select") {
    SelectionConfig cfg = p["stage"].get<int>() == 1 ? SelectionConfig::stage1() : SelectionConfig::stage2();
    cfg.k = p["k"].get<int>();
    cfg.preset.role = p["role"].get<std::string>();
    cfg.preset.prompt_template = ctx.prompts().solver;
    auto r = select_by_pass_rate(load(), ctx.client(), cfg, workers);
    adopt(r.manifest);
    sidecars.emplace_back("passrate", rows_of(r.results, pass_rate_to_json));
    out = std::move(r.kept);
  } else if (name == "distill") {
    DistillConfig cfg;
    cfg.teacher_role = p["role"].get<std::string>();
    cfg.teacher_prompt = ctx.prompts().solver;
    const int k = p["k"].get<int>();
    out = load();
    auto& client = ctx.client();
    auto responses = parallel_map(out.size(), workers,
                                  [&](std::size_t i) { return synthesize(out[i], k, client, cfg); });
    std::size_t total = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      total += responses[i].size();
      out[i].responses = std::move(responses[i]);
    }
    m.input_count = out.size();
    m.details["responses"] = total;
  } else if (name == "verify") {
    DistillConfig cfg;
    cfg.verifier_role = p["role"].get<std::string>();
    cfg.verifier_prompt = ctx.prompts().verifier;
    out = load();
    auto& client = ctx.client();
    auto outcomes = parallel_map(out.size(), workers,
                                 [&](std::size_t i) { return verify(out[i], client, cfg); });
    std::size_t accepted = 0, rejected = 0, quarantined = 0;
    std::vector<OrderedJson> audit, quarantine;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (const auto& pair : outcomes[i].pairs) (pair.verdict ? accepted : rejected)++;
      for (const auto& q : outcomes[i].quarantined) {
        ++quarantined;
        OrderedJson row;
        row["record_id"] = q.record_id;
        row["response_index"] = q.response_index;
        row["raw_output"] = q.raw_output;
        quarantine.push_back(std::move(row));
      }
      audit.push_back(verify_audit_json(out[i]));
    }
    m.input_count = out.size();
    m.details["verdicts_true"] = accepted;
    m.details["verdicts_false"] = rejected;
    m.details["quarantined"] = quarantined;
    sidecars.emplace_back("verify", std::move(audit));
    sidecars.emplace_back("verify-quarantine", std::move(quarantine));
  } else if (name == "finalize") {
    auto r = build_final(load(), final_policy_from_name(p["policy"].get<std::string>()));
    adopt(r.manifest);
    out = std::move(r.records);
    final_bytes = final_dataset_jsonl(out);
  } else if (name == "mix") {
    MixturePlan plan = load_plan(p["plan"].get<std::string>());
    plan.seed = p["seed"].get<std::uint64_t>();
    const auto sources = load_sources(plan);
    bool needs_client = false;
    for (const auto& patch : plan.patches) needs_client = needs_client || (!patch.embeddings && patch.budget > 0);
    auto r = build_mixture(plan, sources, needs_client ? &ctx.client() : nullptr, workers);
    adopt(r.manifest);
    out = std::move(r.records);
  }

  for (const auto& [tag, rows] : sidecars) write_jsonl(sidecar_path(output, tag), rows);
  if (final_bytes) {
    check_unique(out);
    atomic_write(output, *final_bytes);
    m.output_digest = sha256_hex(*final_bytes);
  } else {
    m.output_digest = write_records(out, output).output_digest;
  }
  m.stage = name;
  m.params = p;
  m.output_count = out.size();
  if (name == "distill" || name == "verify") m.removed_count = m.input_count - m.output_count;
  m.input_digest = sha256_file(input);
  m.seed = ctx.seed();
  if (name == "mix") m.seed = p["seed"].get<std::uint64_t>();
  m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_manifest(output, m);
  return m;
}

ResumeState resume_state(const fs::path& input, const fs::path& output, const Json& params,
                         std::string* reason) {
  auto say = [&](std::string why) {
    if (reason != nullptr) *reason = std::move(why);
  };
  const auto m = read_manifest(output);
  if (!m) {
    say("no manifest");
    return ResumeState::absent;
  }
  if (!fs::exists(output)) {
    say("output missing");
    return ResumeState::stale;
  }
  if (m->params != params) {
    say("params changed");
    return ResumeState::stale;
  }
  if (m->input_digest != sha256_file(input)) {
    say("input digest changed");
    return ResumeState::stale;
  }
  if (m->output_digest != sha256_file(output)) {
    say("output digest does not match its manifest");
    return ResumeState::stale;
  }
  return ResumeState::up_to_date;
}

PipelineResult run_pipeline(const RunConfig& cfg, bool force, std::shared_ptr<ModelClient> client) {
  validate_run_config(cfg);
  if (cfg.input.empty() && cfg.stages.front().name != "mix") {
    throw PreconditionError("no input configured");
  }
  StageContext ctx(cfg, std::move(client));
  PipelineResult result;
  fs::path input = cfg.input;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& spec = cfg.stages[i];
    const Json params = effective_params(spec, cfg.seed);
    if (spec.name == "mix") input = params["plan"].get<std::string>();
    const fs::path output = stage_output_path(cfg, i);

    StageRun run;
    run.name = spec.name;
    run.output = output;
    std::string reason;
    switch (resume_state(input, output, params, &reason)) {
      case ResumeState::up_to_date:
        run.skipped = true;
        run.manifest = *read_manifest(output);
        break;
      case ResumeState::stale:
        if (!force) {
          throw DigestMismatch("stage " + std::to_string(i + 1) + " (" + spec.name + "): " + reason +
                               "; rerun with --force to rebuild " + output.string());
        }
        [[fallthrough]];
      case ResumeState::absent:
        run.manifest = execute_stage(spec, input, output, ctx);
        ++result.executed;
        break;
    }
    result.stages.push_back(std::move(run));
    input = output;
  }
  return result;
}

}  // namespace curate
