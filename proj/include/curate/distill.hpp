#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curate/client.hpp"
#include "curate/manifest.hpp"
#include "curate/prompts.hpp"
#include "curate/record.hpp"

namespace curate {

struct DistillConfig {
  std::string teacher_role = "teacher";
  SamplingParams teacher_sampling{0.6, 0.95, 20, 32768};
  std::string teacher_prompt = std::string(prompts::k_solver);

  std::string verifier_role = "verifier";
  SamplingParams verifier_sampling{0.0, 1.0, -1, 2048};
  std::string verifier_prompt = std::string(prompts::k_verifier);
};

/// A (question, response) pair with the verifier's binary decision.
struct VerifiedPair {
  std::string record_id;
  std::size_t response_index = 0;
  std::string question;
  std::string response;
  std::string gold;
  bool verdict = false;
};

ChatRequest teacher_request(const Record& rec, int k, const DistillConfig& cfg);
ChatRequest verifier_request(const Record& rec, const GeneratedResponse& response,
                             const DistillConfig& cfg);

/// Draws k teacher traces for the record, in sample-index order.
std::vector<GeneratedResponse> synthesize(const Record& rec, int k, ModelClient& client,
                                          const DistillConfig& cfg = {});

/// Reads a binary verdict from the tail of verifier output. Accepts
/// 1/0/true/false/yes/no in any case; anything else yields nullopt.
std::optional<bool> parse_verdict(std::string_view output);

struct VerifyQuarantine {
  std::string record_id;
  std::size_t response_index = 0;
  std::string raw_output;
};

struct VerifyOutcome {
  std::vector<VerifiedPair> pairs;  // responses with a parsed verdict
  std::vector<VerifyQuarantine> quarantined;
};

/// One verifier call per response; sets `verified` on each response whose
/// verdict parses. Unparsable verdicts leave `verified` unset.
VerifyOutcome verify(Record& rec, ModelClient& client, const DistillConfig& cfg = {});

enum class FinalPolicy { first_verified, all_verified };
FinalPolicy final_policy_from_name(std::string_view name);

struct FinalOutcome {
  std::vector<Record> records;
  StageManifest manifest;
};

/// Emits verified pairs as records whose solution is the chosen response.
/// first_verified: lowest-index verified response per record.
/// all_verified: every verified response, ids suffixed with `#<index>`.
/// Records with no verified response are dropped.
FinalOutcome build_final(const std::vector<Record>& records,
                         FinalPolicy policy = FinalPolicy::first_verified);

/// `{"id","source","question","solution","answer"}` JSONL.
std::string final_dataset_jsonl(const std::vector<Record>& records);

OrderedJson verify_audit_json(const Record& rec);

}  // namespace curate
