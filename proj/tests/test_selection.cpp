#include <gtest/gtest.h>

#include <random>
#include <set>

#include "curate/error.hpp"
#include "curate/selection.hpp"
#include "fixtures.hpp"

using namespace curate;
using fixtures::make_record;
using fixtures::TempDir;

namespace {

// Replies for one record: which samples are correct is decided up front, and
// correct ones use a varying surface form of the gold answer.
std::string reply(std::mt19937_64& rng, const std::string& gold_form, bool correct, int wrong) {
  if (correct) {
    switch (rng() % 3) {
      case 0: return "Thus \\boxed{" + gold_form + "}.";
      case 1: return "<answer>" + gold_form + "</answer>";
      default: return "Reasoning... final answer " + gold_form;
    }
  }
  return "I get \\boxed{" + std::to_string(wrong) + "}.";
}

}  // namespace

TEST(Selection, LiteralKeepRulesOverRandomReplayStore) {
  TempDir dir;
  ResponseCache store(dir.path());
  std::mt19937_64 rng(123);
  std::vector<Record> recs;
  std::set<std::string> oracle1, oracle2;
  const std::vector<std::pair<std::string, std::string>> forms = {
      {"\\frac{1}{2}", "0.5"}, {"12", "12.0"}, {"3, -1", "-1, 3"}, {"25%", "0.25"}, {"7", "7"}};
  for (int i = 0; i < 50; ++i) {
    auto [gold, alt] = forms[static_cast<std::size_t>(i) % forms.size()];
    Record r = make_record("p" + std::to_string(i), "Problem number " + std::to_string(i));
    r.answer = gold;
    int c1 = 0, c2 = 0;
    const auto req1 = solver_request(r, 4, SolverPreset::for_mode(SolveMode::direct));
    for (int j = 0; j < 4; ++j) {
      const bool ok = rng() % 4 == 0;
      c1 += ok;
      store.put_chat(req1, static_cast<std::size_t>(j), reply(rng, alt, ok, 1000 + i));
    }
    const auto req2 = solver_request(r, 5, SolverPreset::for_mode(SolveMode::thinking));
    for (int j = 0; j < 5; ++j) {
      const bool ok = rng() % 3 == 0;
      c2 += ok;
      store.put_chat(req2, static_cast<std::size_t>(j), reply(rng, alt, ok, 2000 + i));
    }
    if (c1 == 0) oracle1.insert(r.id);
    if (c2 > 0) oracle2.insert(r.id);
    recs.push_back(r);
  }
  auto client = ModelClient::replay(dir.path());
  const auto s1 = stage1_filter(recs, *client, 3);
  const auto s2 = stage2_filter(recs, *client, 2);
  std::set<std::string> got1, got2;
  for (const auto& r : s1.kept) got1.insert(r.id);
  for (const auto& r : s2.kept) got2.insert(r.id);
  EXPECT_EQ(got1, oracle1);
  EXPECT_EQ(got2, oracle2);
  EXPECT_GT(oracle1.size(), 0u);
  EXPECT_LT(oracle1.size(), 50u);
  for (const auto& r : s1.kept) {
    EXPECT_EQ(r.pass_rate.value(), 0.0);
    EXPECT_EQ(r.scores.at("pass_rate_stage1"), 0.0);
  }
  for (const auto& r : s2.kept) EXPECT_GT(r.pass_rate.value(), 0.0);
  EXPECT_EQ(s1.results.size(), 50u);
  EXPECT_EQ(s1.manifest.removed_count, 50u - got1.size());
  EXPECT_EQ(s1.manifest.stage, "select1");
}

TEST(Selection, PassRateCountsMatches) {
  TempDir dir;
  ResponseCache store(dir.path());
  Record r = make_record("x", "What is 1+1?");
  r.answer = "2";
  const auto preset = SolverPreset::for_mode(SolveMode::direct);
  const auto req = solver_request(r, 4, preset);
  const std::vector<std::string> replies = {"\\boxed{2}", "\\boxed{3}", "2", "\\boxed{2.0}"};
  for (std::size_t j = 0; j < 4; ++j) store.put_chat(req, j, replies[j]);
  auto client = ModelClient::replay(dir.path());
  const auto res = pass_rate(r, 4, preset, *client, 1);
  EXPECT_EQ(res.correct, 3);
  EXPECT_DOUBLE_EQ(res.pass_rate, 0.75);
  EXPECT_EQ(res.matches, (std::vector<bool>{true, false, true, true}));
}

TEST(Selection, MissingGoldFailsBeforeSampling) {
  TempDir dir;
  auto client = ModelClient::replay(dir.path());
  Record ok = make_record("a", "q");
  ok.answer = "1";
  std::vector<Record> recs = {ok, make_record("b", "q2")};
  EXPECT_THROW(stage1_filter(recs, *client), PreconditionError);
  EXPECT_EQ(client->stats().cache_hits, 0u);
  auto cfg = SelectionConfig::stage1();
  cfg.k = 0;
  EXPECT_THROW(select_by_pass_rate({ok}, *client, cfg), PreconditionError);
}

TEST(Selection, Presets) {
  const auto s1 = SelectionConfig::stage1();
  const auto s2 = SelectionConfig::stage2();
  EXPECT_EQ(s1.k, 4);
  EXPECT_EQ(s2.k, 5);
  EXPECT_EQ(s1.preset.role, "stage1-solver");
  EXPECT_EQ(s2.preset.role, "stage2-reasoner");
  EXPECT_NE(s1.preset.sampling.max_tokens, s2.preset.sampling.max_tokens);
}
