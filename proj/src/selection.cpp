#include "curate/selection.hpp"

#include "curate/answer_match.hpp"
#include "curate/error.hpp"
#include "curate/parallel.hpp"

namespace curate {

SolverPreset SolverPreset::for_mode(SolveMode mode) {
  if (mode == SolveMode::direct) {
    return SolverPreset{"stage1-solver", SamplingParams{0.7, 0.8, 20, 8192},
                        std::string(prompts::k_solver)};
  }
  return SolverPreset{"stage2-reasoner", SamplingParams{0.6, 0.95, 20, 32768},
                      std::string(prompts::k_solver)};
}

SelectionConfig SelectionConfig::stage1() {
  return SelectionConfig{1, 4, SolverPreset::for_mode(SolveMode::direct)};
}

SelectionConfig SelectionConfig::stage2() {
  return SelectionConfig{2, 5, SolverPreset::for_mode(SolveMode::thinking)};
}

OrderedJson pass_rate_to_json(const PassRateResult& r) {
  OrderedJson j = OrderedJson::object();
  j["record_id"] = r.record_id;
  j["k"] = r.k;
  j["correct"] = r.correct;
  j["pass_rate"] = r.pass_rate;
  j["stage"] = r.stage;
  j["matches"] = r.matches;
  return j;
}

ChatRequest solver_request(const Record& rec, int k, const SolverPreset& preset) {
  ChatRequest req;
  req.role_name = preset.role;
  req.messages.push_back(
      {"user", render_prompt(preset.prompt_template, {{"instruction", rec.question}})});
  req.sampling = preset.sampling;
  req.n_samples = k;
  return req;
}

PassRateResult pass_rate(const Record& rec, int k, const SolverPreset& preset, ModelClient& client,
                         int stage) {
  if (k < 1) throw PreconditionError("k must be >= 1");
  if (!rec.answer || rec.answer->empty()) {
    throw PreconditionError("record " + rec.id + " has no gold answer");
  }
  const auto samples = client.complete(solver_request(rec, k, preset));
  PassRateResult r;
  r.record_id = rec.id;
  r.k = k;
  r.stage = stage;
  for (const auto& s : samples) {
    const bool ok = match_answer(s, *rec.answer);
    r.matches.push_back(ok);
    r.correct += ok ? 1 : 0;
  }
  r.pass_rate = static_cast<double>(r.correct) / static_cast<double>(k);
  return r;
}

SelectionOutcome select_by_pass_rate(std::vector<Record> records, ModelClient& client,
                                     const SelectionConfig& cfg, std::size_t workers) {
  if (cfg.stage != 1 && cfg.stage != 2) throw PreconditionError("selection stage must be 1 or 2");
  if (cfg.k < 1) throw PreconditionError("k must be >= 1");
  std::vector<std::string> missing;
  for (const auto& rec : records) {
    if (!rec.answer || rec.answer->empty()) missing.push_back(rec.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) ids += (i ? ", " : "") + missing[i];
    throw PreconditionError(std::to_string(missing.size()) +
                            " record(s) lack a gold answer and cannot enter selection: " + ids);
  }

  SelectionOutcome out;
  out.results = parallel_map(records.size(), workers, [&](std::size_t i) {
    return pass_rate(records[i], cfg.k, cfg.preset, client, cfg.stage);
  });

  const std::string score_key = "pass_rate_stage" + std::to_string(cfg.stage);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = out.results[i];
    const bool keep = cfg.stage == 1 ? r.correct == 0 : r.correct > 0;
    if (!keep) continue;
    Record rec = std::move(records[i]);
    rec.pass_rate = r.pass_rate;
    rec.scores[score_key] = r.pass_rate;
    out.kept.push_back(std::move(rec));
  }

  auto& m = out.manifest;
  m.stage = "select" + std::to_string(cfg.stage);
  m.input_count = records.size();
  m.output_count = out.kept.size();
  m.removed_count = m.input_count - m.output_count;
  m.params = {{"stage", cfg.stage},
              {"k", cfg.k},
              {"role", cfg.preset.role},
              {"temperature", cfg.preset.sampling.temperature},
              {"top_p", cfg.preset.sampling.top_p},
              {"top_k", cfg.preset.sampling.top_k},
              {"max_tokens", cfg.preset.sampling.max_tokens},
              {"keep_rule", cfg.stage == 1 ? "pass@k == 0" : "pass@k > 0"}};
  return out;
}

SelectionOutcome stage1_filter(std::vector<Record> records, ModelClient& client,
                               std::size_t workers) {
  return select_by_pass_rate(std::move(records), client, SelectionConfig::stage1(), workers);
}

SelectionOutcome stage2_filter(std::vector<Record> records, ModelClient& client,
                               std::size_t workers) {
  return select_by_pass_rate(std::move(records), client, SelectionConfig::stage2(), workers);
}

}  // namespace curate
