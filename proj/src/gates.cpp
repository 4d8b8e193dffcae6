#include "curate/gates.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <variant>

#include "curate/normalize.hpp"
#include "curate/parallel.hpp"

namespace curate {
namespace {

ChatRequest single_prompt(const std::string& role, std::string prompt, const GateConfig& cfg) {
  ChatRequest req;
  req.role_name = role;
  req.messages.push_back({"user", std::move(prompt)});
  req.sampling = cfg.sampling;
  req.n_samples = 1;
  return req;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Last `n` bytes of `s`, moved forward to a UTF-8 boundary.
std::string utf8_tail(const std::string& s, std::size_t n) {
  if (n == 0 || s.size() <= n) return s;
  std::size_t start = s.size() - n;
  while (start < s.size() && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) ++start;
  return s.substr(start);
}

std::string ask_one(ModelClient& client, const ChatRequest& req) {
  return client.complete(req).at(0);
}

GateDecision decision(const Record& rec, Gate g, Verdict v, std::optional<std::string> label,
                      std::optional<std::string> raw) {
  return GateDecision{rec.id, g, v, std::move(label), std::move(raw)};
}

bool any_match(const std::vector<std::string>& patterns, const std::string& text) {
  return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& p) {
    return std::regex_search(text, std::regex(p, std::regex::ECMAScript | std::regex::icase));
  });
}

std::size_t choice_markers(const std::string& text) {
  static const std::regex paren(R"((^|[^a-z0-9_\\])\(([a-e])\))", std::regex::icase);
  static const std::regex bare(R"((^|\s)([a-e])\))", std::regex::icase);
  std::set<char> seen;
  for (const auto* re : {&paren, &bare}) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), *re);
         it != std::sregex_iterator(); ++it) {
      seen.insert(static_cast<char>(std::tolower((*it)[2].str()[0])));
    }
  }
  return seen.size();
}

}  // namespace

std::string_view gate_name(Gate g) {
  switch (g) {
    case Gate::domain: return "domain";
    case Gate::validity: return "validity";
    case Gate::problem_type: return "problem_type";
    case Gate::answer_extraction: return "answer_extraction";
    case Gate::difficulty: return "difficulty";
  }
  return "unknown";
}

Gate gate_from_name(std::string_view name) {
  for (Gate g : {Gate::domain, Gate::validity, Gate::problem_type, Gate::answer_extraction,
                 Gate::difficulty}) {
    if (gate_name(g) == name) return g;
  }
  throw ParseError("unknown gate '" + std::string(name) + "'");
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::keep: return "keep";
    case Verdict::drop: return "drop";
    case Verdict::annotate: return "annotate";
  }
  return "unknown";
}

std::string parse_single_tag(std::string_view output, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = output.find(needle); pos != std::string_view::npos;
         pos = output.find(needle, pos + needle.size())) {
      ++n;
    }
    return n;
  };
  const std::size_t opens = count(open);
  const std::size_t closes = count(close);
  if (opens == 0 || closes == 0) {
    throw GateParseError("no " + open + " tag in model output", std::string(output));
  }
  if (opens > 1 || closes > 1) {
    throw GateParseError("more than one " + open + " tag in model output", std::string(output));
  }
  const auto b = output.find(open);
  const auto e = output.find(close);
  if (e < b) throw GateParseError(close + " before " + open, std::string(output));
  return std::string(output.substr(b + open.size(), e - b - open.size()));
}

ProblemTypeRules ProblemTypeRules::defaults() {
  ProblemTypeRules r;
  r.proof_patterns = {R"(^(prove|show that|demonstrate that)\b)"};
  r.binary_patterns = {R"(\btrue or false\b)", R"(\btrue/false\b)", R"(\byes or no\b)",
                       R"(\bdetermine whether\b.*\bis true\b)"};
  r.min_choice_markers = 3;
  return r;
}

ChatRequest domain_request(const Record& rec, const GateConfig& cfg) {
  return single_prompt(cfg.domain_role,
                       render_prompt(cfg.prompts.domain_classification,
                                     {{"instruction", rec.question}}),
                       cfg);
}

ChatRequest validity_request(const Record& rec, const GateConfig& cfg) {
  return single_prompt(cfg.validity_role,
                       render_prompt(cfg.prompts.problem_validation,
                                     {{"instruction", rec.question}}),
                       cfg);
}

ChatRequest extraction_request(const Record& rec, const GateConfig& cfg) {
  const std::string tail = utf8_tail(rec.solution.value_or(""), cfg.solution_tail_chars);
  return single_prompt(cfg.extraction_role,
                       render_prompt(cfg.prompts.answer_extraction,
                                     {{"instruction", rec.question}, {"output_tail", tail}}),
                       cfg);
}

ChatRequest difficulty_request(const Record& rec, const GateConfig& cfg) {
  return single_prompt(cfg.difficulty_role,
                       render_prompt(cfg.prompts.difficulty_scoring,
                                     {{"instruction", rec.question}}),
                       cfg);
}

GateDecision classify_domain(const Record& rec, ModelClient& client, const GateConfig& cfg) {
  const std::string raw = ask_one(client, domain_request(rec, cfg));
  const std::string label = trim(parse_single_tag(raw, "answer"));
  if (std::find(k_domain_labels.begin(), k_domain_labels.end(), label) == k_domain_labels.end()) {
    throw GateParseError("domain label '" + label + "' is not in the closed set", raw);
  }
  return decision(rec, Gate::domain, label == "Non-Math" ? Verdict::drop : Verdict::annotate,
                  label, raw);
}

GateDecision validate_problem(const Record& rec, ModelClient& client, const GateConfig& cfg) {
  const std::string raw = ask_one(client, validity_request(rec, cfg));
  const std::string label = trim(parse_single_tag(raw, "answer"));
  if (label == "YES") return decision(rec, Gate::validity, Verdict::keep, label, raw);
  if (label == "NO") return decision(rec, Gate::validity, Verdict::drop, "invalid", raw);
  throw GateParseError("validity answer '" + label + "' is neither YES nor NO", raw);
}

GateDecision classify_problem_type(const Record& rec, const ProblemTypeRules& rules) {
  const std::string text = normalize_text(rec.question);
  if (any_match(rules.proof_patterns, text)) {
    return decision(rec, Gate::problem_type, Verdict::drop, "proof", std::nullopt);
  }
  if (rules.min_choice_markers > 0 && choice_markers(text) >= rules.min_choice_markers) {
    return decision(rec, Gate::problem_type, Verdict::drop, "multiple_choice", std::nullopt);
  }
  if (any_match(rules.binary_patterns, text)) {
    return decision(rec, Gate::problem_type, Verdict::drop, "binary", std::nullopt);
  }
  return decision(rec, Gate::problem_type, Verdict::keep, "free_form", std::nullopt);
}

GateDecision extract_answer(const Record& rec, ModelClient& client, const GateConfig& cfg) {
  if (!rec.solution || rec.solution->empty()) {
    return decision(rec, Gate::answer_extraction, Verdict::drop, "missing_solution",
                    std::nullopt);
  }
  const std::string raw = ask_one(client, extraction_request(rec, cfg));
  const std::string answer = collapse_whitespace(parse_single_tag(raw, "answer"));
  if (answer.empty()) {
    return decision(rec, Gate::answer_extraction, Verdict::drop, "no_answer", raw);
  }
  return decision(rec, Gate::answer_extraction, Verdict::annotate, answer, raw);
}

GateDecision score_difficulty(const Record& rec, ModelClient& client, const GateConfig& cfg) {
  const std::string raw = ask_one(client, difficulty_request(rec, cfg));
  const std::string body = trim(parse_single_tag(raw, "score"));
  const bool digits = !body.empty() && body.size() <= 2 &&
                      std::all_of(body.begin(), body.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (!digits) throw GateParseError("difficulty score '" + body + "' is not an integer", raw);
  const int k = std::stoi(body);
  if (k < 1 || k > 10) throw GateParseError("difficulty score " + body + " outside 1..10", raw);
  return decision(rec, Gate::difficulty, Verdict::annotate, body, raw);
}

void apply_decision(Record& rec, const GateDecision& d) {
  if (d.verdict != Verdict::annotate || !d.label) return;
  switch (d.gate) {
    case Gate::domain: rec.domain = *d.label; break;
    case Gate::answer_extraction: rec.answer = *d.label; break;
    case Gate::difficulty: rec.difficulty = std::stoi(*d.label); break;
    default: break;
  }
}

OrderedJson quarantine_to_json(const QuarantineEntry& q) {
  OrderedJson j = OrderedJson::object();
  j["id"] = q.record_id;
  j["gate"] = gate_name(q.gate);
  j["error"] = q.error;
  j["raw_model_output"] = q.raw_model_output ? OrderedJson(*q.raw_model_output) : OrderedJson(nullptr);
  j["record"] = OrderedJson::parse(to_canonical_json(q.record));
  return j;
}

OrderedJson decision_to_json(const GateDecision& d) {
  OrderedJson j = OrderedJson::object();
  j["id"] = d.record_id;
  j["gate"] = gate_name(d.gate);
  j["verdict"] = verdict_name(d.verdict);
  j["label"] = d.label ? OrderedJson(*d.label) : OrderedJson(nullptr);
  j["raw_model_output"] = d.raw_model_output ? OrderedJson(*d.raw_model_output) : OrderedJson(nullptr);
  return j;
}

GateStageOutcome run_gates(std::vector<Record> records, const std::vector<Gate>& gates,
                           ModelClient* client, const GateConfig& cfg, std::size_t workers) {
  for (std::size_t i = 1; i < gates.size(); ++i) {
    if (static_cast<int>(gates[i]) <= static_cast<int>(gates[i - 1])) {
      throw PreconditionError("gates must run in order domain, validity, problem_type, "
                              "answer_extraction, difficulty");
    }
  }
  const bool needs_client = std::any_of(gates.begin(), gates.end(),
                                        [](Gate g) { return g != Gate::problem_type; });
  if (needs_client && client == nullptr) throw PreconditionError("prompted gates need a model client");

  struct PerRecord {
    std::vector<GateDecision> decisions;
    std::optional<QuarantineEntry> quarantine;
    bool kept = true;
  };

  auto results = parallel_map(records.size(), workers, [&](std::size_t i) {
    PerRecord out;
    Record& rec = records[i];
    for (Gate g : gates) {
      GateDecision d;
      try {
        switch (g) {
          case Gate::domain: d = classify_domain(rec, *client, cfg); break;
          case Gate::validity: d = validate_problem(rec, *client, cfg); break;
          case Gate::problem_type: d = classify_problem_type(rec, cfg.problem_type_rules); break;
          case Gate::answer_extraction: d = extract_answer(rec, *client, cfg); break;
          case Gate::difficulty: d = score_difficulty(rec, *client, cfg); break;
        }
      } catch (const GateParseError& e) {
        out.quarantine = QuarantineEntry{rec.id, g, e.what(), e.raw_output(), rec};
        out.kept = false;
        return out;
      }
      out.decisions.push_back(d);
      if (d.verdict == Verdict::drop) {
        out.kept = false;
        return out;
      }
      apply_decision(rec, d);
    }
    return out;
  });

  GateStageOutcome outcome;
  StageManifest& m = outcome.manifest;
  m.stage = "filter";
  m.input_count = records.size();
  std::vector<std::string> names;
  for (Gate g : gates) names.emplace_back(gate_name(g));
  m.params["gates"] = names;

  Json per_gate = Json::object();
  for (Gate g : gates) {
    per_gate[std::string(gate_name(g))] =
        Json{{"input", 0}, {"dropped", 0}, {"quarantined", 0}, {"dropped_by_label", Json::object()}};
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = results[i];
    for (const auto& d : r.decisions) {
      auto& slot = per_gate[std::string(gate_name(d.gate))];
      slot["input"] = slot["input"].get<std::size_t>() + 1;
      if (d.verdict == Verdict::drop) {
        slot["dropped"] = slot["dropped"].get<std::size_t>() + 1;
        auto& by = slot["dropped_by_label"][*d.label];
        by = by.is_null() ? 1 : by.get<std::size_t>() + 1;
      }
    }
    if (r.quarantine) {
      auto& slot = per_gate[std::string(gate_name(r.quarantine->gate))];
      slot["input"] = slot["input"].get<std::size_t>() + 1;
      slot["quarantined"] = slot["quarantined"].get<std::size_t>() + 1;
      outcome.quarantined.push_back(std::move(*r.quarantine));
    }
    for (auto& d : r.decisions) outcome.decisions.push_back(std::move(d));
    if (r.kept) outcome.kept.push_back(std::move(records[i]));
  }
  m.output_count = outcome.kept.size();
  m.removed_count = m.input_count - m.output_count;
  m.details["gates"] = per_gate;
  m.details["quarantined"] = outcome.quarantined.size();
  m.details["dropped"] = m.removed_count - outcome.quarantined.size();
  return outcome;
}

}  // namespace curate
