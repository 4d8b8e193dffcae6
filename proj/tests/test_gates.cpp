#include <gtest/gtest.h>

#include <random>

#include "curate/gates.hpp"
#include "fixtures.hpp"

using namespace curate;
using fixtures::make_record;
using fixtures::TempDir;

namespace {

struct ReplayGates {
  TempDir dir;
  ResponseCache store{dir.path()};
  GateConfig cfg;
  std::shared_ptr<ModelClient> client() { return ModelClient::replay(dir.path()); }
};

Record with_solution(const std::string& id, const std::string& q, const std::string& sol) {
  Record r = make_record(id, q);
  r.solution = sol;
  return r;
}

}  // namespace

TEST(TagParsing, FuzzedAgainstCountingOracle) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> pieces = {"<answer>", "</answer>", "x", " ", "<answer", "answer>",
                                           "</ans>",   "\n",        "42", "<score>"};
  for (int t = 0; t < 2000; ++t) {
    std::string s;
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    std::size_t opens = 0, closes = 0, open_pos = 0, close_pos = 0;
    for (std::size_t p = s.find("<answer>"); p != std::string::npos; p = s.find("<answer>", p + 1)) {
      ++opens;
      open_pos = p;
    }
    for (std::size_t p = s.find("</answer>"); p != std::string::npos; p = s.find("</answer>", p + 1)) {
      ++closes;
      close_pos = p;
    }
    const bool ok = opens == 1 && closes == 1 && open_pos < close_pos;
    if (ok) {
      EXPECT_EQ(parse_single_tag(s, "answer"), s.substr(open_pos + 8, close_pos - open_pos - 8)) << s;
    } else {
      EXPECT_THROW(parse_single_tag(s, "answer"), GateParseError) << s;
    }
  }
}

TEST(TagParsing, KeepsRawOutputOnFailure) {
  try {
    parse_single_tag("no tags", "answer");
    FAIL();
  } catch (const GateParseError& e) {
    EXPECT_EQ(e.raw_output(), "no tags");
  }
}

TEST(Gates, PromptThreeExamplesByteExact) {
  ReplayGates g;
  const std::vector<std::tuple<std::string, std::string, std::string>> cases = {
      {"...blah blah... The answer is $\\boxed{10}$.", "<answer>10</answer>", "10"},
      {"...so the value is $\\boxed{\\frac{\\sqrt{3}}{2}}$.", "<answer>\\frac{\\sqrt{3}}{2}</answer>",
       "\\frac{\\sqrt{3}}{2}"},
      {"...the final area is $\\boxed{24 \\text{ cm}^2}$.", "<answer>$24 \\text{cm}^2$</answer>",
       "$24 \\text{cm}^2$"},
      {"...Therefore, the length is 40 meters.", "<answer>40</answer>", "40"},
      {"...The total increase was 15.5%.", "<answer>15.5%</answer>", "15.5%"},
      {"...the roots of the equation are $x = -2$ or $x = 5$.", "<answer>-2, 5</answer>", "-2, 5"},
      {"...we can conclude that the statement is False.", "<answer>False</answer>", "False"},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto rec = with_solution("e" + std::to_string(i), "Question " + std::to_string(i), std::get<0>(cases[i]));
    g.store.put_chat(extraction_request(rec, g.cfg), 0, std::get<1>(cases[i]));
  }
  const auto proof = with_solution("proof", "Show the claim", "...this completes the proof by induction.");
  g.store.put_chat(extraction_request(proof, g.cfg), 0, "<answer></answer>");

  auto client = g.client();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto rec = with_solution("e" + std::to_string(i), "Question " + std::to_string(i), std::get<0>(cases[i]));
    const auto d = extract_answer(rec, *client, g.cfg);
    EXPECT_EQ(d.verdict, Verdict::annotate);
    EXPECT_EQ(d.label.value(), std::get<2>(cases[i]));
    apply_decision(rec, d);
    EXPECT_EQ(rec.answer.value(), std::get<2>(cases[i]));
  }
  const auto d = extract_answer(proof, *client, g.cfg);
  EXPECT_EQ(d.verdict, Verdict::drop);
  EXPECT_EQ(d.label.value(), "no_answer");
}

TEST(Gates, ExtractionWithoutSolutionDropsWithoutCalling) {
  ReplayGates g;
  auto client = g.client();
  const auto d = extract_answer(make_record("a", "q"), *client, g.cfg);
  EXPECT_EQ(d.verdict, Verdict::drop);
  EXPECT_EQ(d.label.value(), "missing_solution");
}

TEST(Gates, SolutionTailIsUtf8Safe) {
  GateConfig cfg;
  cfg.solution_tail_chars = 4;
  const auto rec = with_solution("a", "q", "abc\xC3\xA9xyz");
  const auto req = extraction_request(rec, cfg);
  const std::string& text = req.messages.at(0).text;
  EXPECT_NE(text.find("Solution: xyz"), std::string::npos);
  cfg.solution_tail_chars = 0;
  EXPECT_NE(extraction_request(rec, cfg).messages.at(0).text.find("abc\xC3\xA9xyz"), std::string::npos);
}

TEST(Gates, DomainValidityAndDifficulty) {
  ReplayGates g;
  const auto a = make_record("a", "Find x if 2x=4");
  const auto b = make_record("b", "Write a poem");
  const auto c = make_record("c", "Odd one");
  g.store.put_chat(domain_request(a, g.cfg), 0, "Reasoning...\n<answer>Algebra</answer>");
  g.store.put_chat(domain_request(b, g.cfg), 0, "<answer>Non-Math</answer>");
  g.store.put_chat(domain_request(c, g.cfg), 0, "<answer>Topology</answer>");
  g.store.put_chat(validity_request(a, g.cfg), 0, "<answer>YES</answer>");
  g.store.put_chat(validity_request(b, g.cfg), 0, "<answer>NO</answer>");
  g.store.put_chat(validity_request(c, g.cfg), 0, "<answer>maybe</answer>");
  g.store.put_chat(difficulty_request(a, g.cfg), 0, "<score>3</score>");
  g.store.put_chat(difficulty_request(b, g.cfg), 0, "<score>11</score>");
  g.store.put_chat(difficulty_request(c, g.cfg), 0, "<score>3.5</score>");
  auto client = g.client();

  auto da = classify_domain(a, *client, g.cfg);
  EXPECT_EQ(da.verdict, Verdict::annotate);
  EXPECT_EQ(da.label.value(), "Algebra");
  EXPECT_EQ(classify_domain(b, *client, g.cfg).verdict, Verdict::drop);
  EXPECT_THROW(classify_domain(c, *client, g.cfg), GateParseError);

  EXPECT_EQ(validate_problem(a, *client, g.cfg).verdict, Verdict::keep);
  const auto vb = validate_problem(b, *client, g.cfg);
  EXPECT_EQ(vb.verdict, Verdict::drop);
  EXPECT_EQ(vb.label.value(), "invalid");
  EXPECT_THROW(validate_problem(c, *client, g.cfg), GateParseError);

  Record ra = a;
  apply_decision(ra, score_difficulty(a, *client, g.cfg));
  EXPECT_EQ(ra.difficulty.value(), 3);
  EXPECT_THROW(score_difficulty(b, *client, g.cfg), GateParseError);
  EXPECT_THROW(score_difficulty(c, *client, g.cfg), GateParseError);
}

TEST(Gates, ProblemTypeRules) {
  auto type = [](const std::string& q) { return classify_problem_type(make_record("x", q)); };
  EXPECT_EQ(type("Prove that there are infinitely many primes.").label.value(), "proof");
  EXPECT_EQ(type("Show that 2 divides n(n+1).").label.value(), "proof");
  EXPECT_EQ(type("Which is largest? (A) 1 (B) 2 (C) 3 (D) 4").label.value(), "multiple_choice");
  EXPECT_EQ(type("Pick one: A) 1  B) 2  C) 3").label.value(), "multiple_choice");
  EXPECT_EQ(type("True or false: 7 is prime.").label.value(), "binary");
  EXPECT_EQ(type("Determine whether the statement is true.").label.value(), "binary");
  EXPECT_EQ(type("Answer yes or no: is 9 a square?").label.value(), "binary");
  const auto keep = type("Let f(a) + f(b) + f(c) = 3. Find f(2). We approve of this.");
  EXPECT_EQ(keep.verdict, Verdict::keep);
  EXPECT_EQ(keep.label.value(), "free_form");
  EXPECT_EQ(type("Compute (a)(b) for a=2, b=3").verdict, Verdict::keep);
}

TEST(Gates, RunGatesAccountsForEveryRecord) {
  ReplayGates g;
  std::vector<Record> recs = {make_record("ok", "Find x: x+1=2"), make_record("nonmath", "Cook pasta"),
                              make_record("bad", "Find y"), make_record("proof", "Prove that 1+1=2"),
                              make_record("garbled", "Find z")};
  for (const auto& r : recs) {
    std::string dom = r.id == "nonmath" ? "<answer>Non-Math</answer>" : "<answer>Algebra</answer>";
    if (r.id == "garbled") dom = "Algebra";
    g.store.put_chat(domain_request(r, g.cfg), 0, dom);
    g.store.put_chat(validity_request(r, g.cfg), 0, r.id == "bad" ? "<answer>NO</answer>" : "<answer>YES</answer>");
  }
  auto client = g.client();
  const auto out = run_gates(recs, {Gate::domain, Gate::validity, Gate::problem_type}, client.get(), g.cfg, 3);
  ASSERT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.kept[0].id, "ok");
  EXPECT_EQ(out.kept[0].domain.value(), "Algebra");
  ASSERT_EQ(out.quarantined.size(), 1u);
  EXPECT_EQ(out.quarantined[0].record_id, "garbled");
  EXPECT_EQ(out.quarantined[0].raw_model_output.value(), "Algebra");
  EXPECT_EQ(out.manifest.input_count, 5u);
  EXPECT_EQ(out.manifest.output_count, 1u);
  EXPECT_EQ(out.manifest.removed_count, 4u);
  EXPECT_EQ(out.manifest.details["gates"]["validity"]["dropped"], 1);
  EXPECT_EQ(out.manifest.details["gates"]["problem_type"]["dropped_by_label"]["proof"], 1);
  const auto q = quarantine_to_json(out.quarantined[0]);
  EXPECT_EQ(q["gate"], "domain");
  EXPECT_EQ(q["record"]["id"], "garbled");
}

TEST(Gates, OrderIsEnforced) {
  GateConfig cfg;
  EXPECT_THROW(run_gates({}, {Gate::validity, Gate::domain}, nullptr, cfg), PreconditionError);
  EXPECT_THROW(run_gates({make_record("a", "q")}, {Gate::domain}, nullptr, cfg), PreconditionError);
  const auto out = run_gates({make_record("a", "Find q")}, {Gate::problem_type}, nullptr, cfg);
  EXPECT_EQ(out.kept.size(), 1u);
}

TEST(Prompts, RenderIsSinglePass) {
  EXPECT_EQ(render_prompt("Q: {instruction} {other}", {{"instruction", "{output_tail}"}, {"output_tail", "X"}}),
            "Q: {output_tail} {other}");
  const auto p = PromptSet::defaults();
  EXPECT_NE(p.answer_extraction.find("{output_tail}"), std::string::npos);
  EXPECT_NE(p.domain_classification.find("{instruction}"), std::string::npos);
  EXPECT_NE(p.verifier.find("{reference}"), std::string::npos);
}
