#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curate/client.hpp"
#include "curate/error.hpp"
#include "curate/manifest.hpp"
#include "curate/prompts.hpp"
#include "curate/record.hpp"

namespace curate {

enum class Gate { domain, validity, problem_type, answer_extraction, difficulty };
enum class Verdict { keep, drop, annotate };

std::string_view gate_name(Gate g);
Gate gate_from_name(std::string_view name);
std::string_view verdict_name(Verdict v);

struct GateDecision {
  std::string record_id;
  Gate gate = Gate::domain;
  Verdict verdict = Verdict::keep;
  std::optional<std::string> label;  // always set on drop
  std::optional<std::string> raw_model_output;
};

/// Model output that does not follow the expected tag contract. Records
/// hitting this are quarantined, never dropped.
class GateParseError : public ParseError {
 public:
  GateParseError(const std::string& what, std::string raw)
      : ParseError(what), raw_(std::move(raw)) {}
  const std::string& raw_output() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Returns the content of the single `<tag>...</tag>` in `output`. Zero or
/// several tags, or a close before the open, raise GateParseError.
std::string parse_single_tag(std::string_view output, std::string_view tag);

inline constexpr std::array<std::string_view, 7> k_domain_labels = {
    "Algebra", "Geometry",  "Calculus", "Discrete & Probability",
    "Number Theory", "Other", "Non-Math"};

/// Rule set for the problem-type gate, applied to normalized question text.
struct ProblemTypeRules {
  std::vector<std::string> proof_patterns;   // ECMAScript regexes
  std::vector<std::string> binary_patterns;  // ECMAScript regexes
  std::size_t min_choice_markers = 3;        // distinct (A)..(E) / A)..E) markers

  static ProblemTypeRules defaults();
};

struct GateConfig {
  PromptSet prompts = PromptSet::defaults();
  std::string domain_role = "domain-classifier";
  std::string validity_role = "problem-validator";
  std::string extraction_role = "answer-extractor";
  std::string difficulty_role = "difficulty-scorer";
  SamplingParams sampling{0.0, 1.0, -1, 1024};
  /// Keep only the last N characters of the solution in the extraction
  /// prompt; 0 sends the whole solution.
  std::size_t solution_tail_chars = 0;
  ProblemTypeRules problem_type_rules = ProblemTypeRules::defaults();
};

// Requests the prompted gates send; exposed so replay stores can be built.
ChatRequest domain_request(const Record& rec, const GateConfig& cfg);
ChatRequest validity_request(const Record& rec, const GateConfig& cfg);
ChatRequest extraction_request(const Record& rec, const GateConfig& cfg);
ChatRequest difficulty_request(const Record& rec, const GateConfig& cfg);

GateDecision classify_domain(const Record& rec, ModelClient& client, const GateConfig& cfg);
GateDecision validate_problem(const Record& rec, ModelClient& client, const GateConfig& cfg);
GateDecision classify_problem_type(const Record& rec,
                                   const ProblemTypeRules& rules = ProblemTypeRules::defaults());
GateDecision extract_answer(const Record& rec, ModelClient& client, const GateConfig& cfg);
GateDecision score_difficulty(const Record& rec, ModelClient& client, const GateConfig& cfg);

/// Writes an annotate decision's label into the matching record field.
void apply_decision(Record& rec, const GateDecision& d);

struct QuarantineEntry {
  std::string record_id;
  Gate gate = Gate::domain;
  std::string error;
  std::optional<std::string> raw_model_output;
  Record record;
};

OrderedJson quarantine_to_json(const QuarantineEntry& q);
OrderedJson decision_to_json(const GateDecision& d);

struct GateStageOutcome {
  std::vector<Record> kept;
  std::vector<GateDecision> decisions;
  std::vector<QuarantineEntry> quarantined;
  StageManifest manifest;
};

/// Runs `gates` (which must follow domain -> validity -> problem_type ->
/// answer_extraction -> difficulty order) over every record. A record stops
/// at its first drop or parse failure. Kept records keep input order and
/// kept + dropped + quarantined == input.
GateStageOutcome run_gates(std::vector<Record> records, const std::vector<Gate>& gates,
                           ModelClient* client, const GateConfig& cfg, std::size_t workers = 1);

}  // namespace curate
