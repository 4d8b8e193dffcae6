#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace curate {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// One sampled model output attached to a record.
struct GeneratedResponse {
  std::string text;
  std::optional<std::string> extracted_answer;
  std::optional<bool> verified;  // set only by the verify stage
  std::string sampler_params_digest;

  bool operator==(const GeneratedResponse&) const = default;
};

/// A problem/solution unit. Stages annotate records in place.
struct Record {
  std::string id;
  std::string source;
  std::string question;
  std::optional<std::string> solution;
  std::optional<std::string> answer;  // canonical gold answer
  std::optional<std::string> domain;
  std::optional<int> difficulty;  // 1..10
  std::vector<GeneratedResponse> responses;
  std::optional<double> pass_rate;  // [0, 1]
  std::map<std::string, double> scores;
  Json meta = Json::object();

  bool operator==(const Record&) const = default;
};

/// Serialized key order of a record; part of the file format.
inline constexpr const char* k_record_keys[] = {
    "id",     "source",     "question",  "solution", "answer", "domain",
    "difficulty", "responses", "pass_rate", "scores",   "meta"};

/// Canonical single-line JSON for a record (no trailing newline).
std::string to_canonical_json(const Record& rec);

/// Parses and validates one record. Throws ParseError on any violation.
Record record_from_json(const Json& j);

/// Checks the record invariants (id, question, difficulty, pass_rate).
/// Throws ParseError naming the first violation.
void validate_record(const Record& rec);

}  // namespace curate
