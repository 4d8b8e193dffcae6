#include "curate/distill.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "curate/answer_match.hpp"
#include "curate/error.hpp"

namespace curate {

ChatRequest teacher_request(const Record& rec, int k, const DistillConfig& cfg) {
  ChatRequest req;
  req.role_name = cfg.teacher_role;
  req.messages.push_back(
      {"user", render_prompt(cfg.teacher_prompt, {{"instruction", rec.question}})});
  req.sampling = cfg.teacher_sampling;
  req.n_samples = k;
  return req;
}

ChatRequest verifier_request(const Record& rec, const GeneratedResponse& response,
                             const DistillConfig& cfg) {
  ChatRequest req;
  req.role_name = cfg.verifier_role;
  req.messages.push_back({"user", render_prompt(cfg.verifier_prompt,
                                                {{"instruction", rec.question},
                                                 {"output_tail", response.text},
                                                 {"reference", rec.answer.value_or("")}})});
  req.sampling = cfg.verifier_sampling;
  req.n_samples = 1;
  return req;
}

std::vector<GeneratedResponse> synthesize(const Record& rec, int k, ModelClient& client,
                                          const DistillConfig& cfg) {
  if (k < 1) throw PreconditionError("k must be >= 1");
  if (!rec.answer) throw PreconditionError("record " + rec.id + " has no gold answer");
  const ChatRequest req = teacher_request(rec, k, cfg);
  std::vector<std::string> texts;
  try {
    texts = client.complete(req);
  } catch (const ReplayMiss&) {
    throw;
  } catch (const Error& e) {
    throw Error("synthesize failed for record " + rec.id + ": " + e.what());
  }
  const std::string digest = sampler_params_digest(req);
  std::vector<GeneratedResponse> out;
  out.reserve(texts.size());
  for (auto& t : texts) {
    GeneratedResponse r;
    r.extracted_answer = extract_final_answer(t);
    r.text = std::move(t);
    r.sampler_params_digest = digest;
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<bool> parse_verdict(std::string_view output) {
  auto end = output.find_last_not_of(" \t\r\n");
  if (end == std::string_view::npos) return std::nullopt;
  auto begin = output.find_last_of(" \t\r\n", end);
  begin = begin == std::string_view::npos ? 0 : begin + 1;
  std::string token(output.substr(begin, end - begin + 1));

  if (auto boxed = last_boxed(token)) token = *boxed;
  auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
  const auto first = std::find_if(token.begin(), token.end(), is_word);
  const auto last = std::find_if(token.rbegin(), token.rend(), is_word).base();
  if (first >= last) return std::nullopt;
  std::string word(first, last);
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (word == "1" || word == "true" || word == "yes") return true;
  if (word == "0" || word == "false" || word == "no") return false;
  return std::nullopt;
}

VerifyOutcome verify(Record& rec, ModelClient& client, const DistillConfig& cfg) {
  if (rec.responses.empty()) throw PreconditionError("record " + rec.id + " has no responses");
  if (!rec.answer) throw PreconditionError("record " + rec.id + " has no gold answer");
  VerifyOutcome out;
  for (std::size_t i = 0; i < rec.responses.size(); ++i) {
    auto& resp = rec.responses[i];
    const std::string raw = client.complete(verifier_request(rec, resp, cfg)).at(0);
    const auto verdict = parse_verdict(raw);
    if (!verdict) {
      resp.verified.reset();
      out.quarantined.push_back(VerifyQuarantine{rec.id, i, raw});
      continue;
    }
    resp.verified = *verdict;
    out.pairs.push_back(VerifiedPair{rec.id, i, rec.question, resp.text, *rec.answer, *verdict});
  }
  return out;
}

FinalPolicy final_policy_from_name(std::string_view name) {
  if (name == "first_verified") return FinalPolicy::first_verified;
  if (name == "all_verified") return FinalPolicy::all_verified;
  throw ParseError("unknown selection policy '" + std::string(name) + "'");
}

FinalOutcome build_final(const std::vector<Record>& records, FinalPolicy policy) {
  FinalOutcome out;
  std::size_t records_with_pair = 0;
  for (const auto& rec : records) {
    bool any = false;
    for (std::size_t i = 0; i < rec.responses.size(); ++i) {
      const auto& resp = rec.responses[i];
      if (resp.verified != true) continue;
      Record pair;
      pair.id = policy == FinalPolicy::all_verified ? rec.id + "#" + std::to_string(i) : rec.id;
      pair.source = rec.source;
      pair.question = rec.question;
      pair.solution = resp.text;
      pair.answer = rec.answer;
      pair.domain = rec.domain;
      pair.difficulty = rec.difficulty;
      pair.pass_rate = rec.pass_rate;
      pair.scores = rec.scores;
      pair.meta = rec.meta;
      pair.meta["response_index"] = i;
      out.records.push_back(std::move(pair));
      any = true;
      if (policy == FinalPolicy::first_verified) break;
    }
    records_with_pair += any ? 1 : 0;
  }
  auto& m = out.manifest;
  m.stage = "finalize";
  m.params["policy"] = policy == FinalPolicy::first_verified ? "first_verified" : "all_verified";
  m.input_count = records.size();
  m.output_count = out.records.size();
  m.removed_count = records.size() - records_with_pair;
  m.details["records_without_verified_response"] = m.removed_count;
  return out;
}

std::string final_dataset_jsonl(const std::vector<Record>& records) {
  std::string bytes;
  std::unordered_set<std::string_view> ids;
  for (const auto& rec : records) {
    if (!ids.insert(rec.id).second) throw PreconditionError("duplicate record id '" + rec.id + "'");
    OrderedJson j = OrderedJson::object();
    j["id"] = rec.id;
    j["source"] = rec.source;
    j["question"] = rec.question;
    j["solution"] = rec.solution ? OrderedJson(*rec.solution) : OrderedJson(nullptr);
    j["answer"] = rec.answer ? OrderedJson(*rec.answer) : OrderedJson(nullptr);
    bytes += j.dump(-1, ' ', false, OrderedJson::error_handler_t::replace);
    bytes += '\n';
  }
  return bytes;
}

OrderedJson verify_audit_json(const Record& rec) {
  OrderedJson j = OrderedJson::object();
  j["id"] = rec.id;
  OrderedJson verdicts = OrderedJson::array();
  for (const auto& r : rec.responses) {
    verdicts.push_back(r.verified ? OrderedJson(*r.verified) : OrderedJson(nullptr));
  }
  j["verdicts"] = std::move(verdicts);
  return j;
}

}  // namespace curate
