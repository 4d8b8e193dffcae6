#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "curate/client.hpp"
#include "curate/manifest.hpp"
#include "curate/prompts.hpp"
#include "curate/record.hpp"

namespace curate {

enum class SolveMode { direct, thinking };

/// How a solver role is prompted and sampled. Direct and thinking modes
/// differ only in role name and sampling preset.
struct SolverPreset {
  std::string role;
  SamplingParams sampling;
  std::string prompt_template;

  static SolverPreset for_mode(SolveMode mode);
};

struct PassRateResult {
  std::string record_id;
  int k = 0;
  int correct = 0;
  double pass_rate = 0.0;  // correct / k
  int stage = 0;
  std::vector<bool> matches;
};

OrderedJson pass_rate_to_json(const PassRateResult& r);

ChatRequest solver_request(const Record& rec, int k, const SolverPreset& preset);

/// Samples k responses and counts those whose final answer matches the
/// record's gold answer.
PassRateResult pass_rate(const Record& rec, int k, const SolverPreset& preset, ModelClient& client,
                         int stage = 0);

struct SelectionConfig {
  int stage = 1;  // 1: keep iff no sample is correct; 2: keep iff any is
  int k = 4;
  SolverPreset preset = SolverPreset::for_mode(SolveMode::direct);

  static SelectionConfig stage1();
  static SelectionConfig stage2();
};

struct SelectionOutcome {
  std::vector<Record> kept;
  std::vector<PassRateResult> results;  // one per input record, input order
  StageManifest manifest;
};

/// Applies the stage's keep rule. Every record must carry a gold answer;
/// otherwise PreconditionError is thrown before any sampling happens.
SelectionOutcome select_by_pass_rate(std::vector<Record> records, ModelClient& client,
                                     const SelectionConfig& cfg, std::size_t workers = 1);

/// Keeps records with Pass@k == 0 under the direct (small) solver.
SelectionOutcome stage1_filter(std::vector<Record> records, ModelClient& client,
                               std::size_t workers = 1);
/// Keeps records with Pass@k > 0 under the thinking (strong) solver.
SelectionOutcome stage2_filter(std::vector<Record> records, ModelClient& client,
                               std::size_t workers = 1);

}  // namespace curate
