#include "fixtures.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <unistd.h>

#include "curate/client.hpp"
#include "curate/corpus.hpp"
#include "curate/distill.hpp"
#include "curate/gates.hpp"
#include "curate/selection.hpp"

namespace fs = std::filesystem;
using namespace curate;

namespace fixtures {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
           std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Record make_record(const std::string& id, const std::string& question, const std::string& source) {
  Record r;
  r.id = id;
  r.source = source;
  r.question = question;
  return r;
}

std::string random_words(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> len(3, 8);
  std::uniform_int_distribution<int> letter(0, 25);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    const int l = len(rng);
    for (int j = 0; j < l; ++j) out += static_cast<char>('a' + letter(rng));
  }
  return out;
}

namespace {

void write_lines(const fs::path& path, const std::vector<Json>& rows) {
  std::ofstream out(path);
  for (const auto& r : rows) out << r.dump() << "\n";
}

const std::vector<std::string> k_benchmark_items = {
    "a circle of radius seven is inscribed in a square find the area of the region outside the circle",
    "how many positive divisors does the product of the first five primes have when squared twice",
    "the sum of three consecutive odd integers equals one hundred and five what is the largest integer",
    "a train leaves the station at noon traveling east at sixty miles per hour toward a distant city",
    "find the remainder when two raised to the power one hundred is divided by seven in modular arithmetic",
    "triangle abc has sides thirteen fourteen and fifteen compute the radius of its inscribed circle exactly",
};

}  // namespace

EndToEnd build_end_to_end(const fs::path& dir) {
  EndToEnd e;
  fs::create_directories(dir);
  const fs::path replay = dir / "replay";
  ResponseCache store(replay);

  // Question text per raw line (0-based index i, id "synth-<i+1>").
  auto clean_question = [](int i) {
    const int a = 3 + i, b = 7 + 2 * i, c = i % 9 + 1;
    return "Let n equal " + std::to_string(a) + " and m equal " + std::to_string(b) +
           ". Compute n times m plus " + std::to_string(c) + " for case " + std::to_string(i) + ".";
  };
  auto gold_of = [](int i) { return std::to_string((3 + i) * (7 + 2 * i) + i % 9 + 1); };
  auto wrong_of = [](int i) { return std::to_string((3 + i) * (7 + 2 * i) + i % 9 + 2); };

  std::vector<Json> raw;
  std::vector<std::string> questions(200);
  for (int i = 0; i < 200; ++i) {
    std::string q = clean_question(i);
    if (i >= 16 && i < 20) q = "Prove that for case " + std::to_string(i) + " the value of n times m is even.";
    if (i >= 20 && i < 23) {
      q = "Which value does case " + std::to_string(i) + " give? (A) 1 (B) 2 (C) 3 (D) 4";
    }
    if (i >= 23 && i < 25) q = "True or false: case " + std::to_string(i) + " gives an odd product.";
    if (i >= 180 && i < 190) {
      q = "Case " + std::to_string(i) + ": " + k_benchmark_items[static_cast<std::size_t>(i) % k_benchmark_items.size()];
    }
    if (i >= 190) {
      // Case and whitespace variants of lines 0..9.
      std::string v = "  " + questions[static_cast<std::size_t>(i - 190)] + "  ";
      for (auto& ch : v) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      q = v;
    }
    questions[static_cast<std::size_t>(i)] = q;
    raw.push_back({{"question", q},
                   {"solution", "We multiply and add, so the result is \\boxed{" + gold_of(i) + "}."}});
  }
  write_lines(dir / "raw.jsonl", raw);

  std::vector<Json> bench;
  for (const auto& item : k_benchmark_items) bench.push_back({{"name", "synthbench"}, {"question", item}});
  write_lines(dir / "benchmarks.jsonl", bench);

  auto id_of = [](int i) { return "synth-" + std::to_string(i + 1); };
  auto range_ids = [&](int lo, int hi) {
    std::set<std::string> s;
    for (int i = lo; i < hi; ++i) s.insert(id_of(i));
    return s;
  };

  // Model replies, built against the records as each stage sees them.
  GateConfig gate_cfg;
  for (int i = 0; i < 180; ++i) {
    Record rec = make_record(id_of(i), questions[static_cast<std::size_t>(i)], "synth");
    rec.solution = raw[static_cast<std::size_t>(i)]["solution"].get<std::string>();
    std::string domain = "<answer>Algebra</answer>";
    if (i < 8) domain = "<answer>Non-Math</answer>";
    if (i == 8 || i == 9) domain = "The domain is Algebra.";
    store.put_chat(domain_request(rec, gate_cfg), 0, domain);
    if (i < 10) continue;
    store.put_chat(validity_request(rec, gate_cfg), 0,
                   i < 16 ? "<answer>NO</answer>" : "<answer>YES</answer>");
    if (i < 25) continue;
    store.put_chat(extraction_request(rec, gate_cfg), 0,
                   i < 30 ? "<answer></answer>" : "<answer>" + gold_of(i) + "</answer>");
    if (i < 30) continue;
    rec.answer = gold_of(i);

    const auto s1 = solver_request(rec, 4, SolverPreset::for_mode(SolveMode::direct));
    for (int j = 0; j < 4; ++j) {
      const bool correct = i < 70 && j == (i % 4);
      store.put_chat(s1, static_cast<std::size_t>(j),
                     "Working it out, the answer is \\boxed{" + (correct ? gold_of(i) : wrong_of(i)) + "}.");
    }
    if (i < 70) continue;
    const auto s2 = solver_request(rec, 5, SolverPreset::for_mode(SolveMode::thinking));
    for (int j = 0; j < 5; ++j) {
      const bool correct = i >= 90 && j == (i % 5);
      // Correct replies vary in form: plain, decimal, answer tag.
      std::string reply = "So the answer is \\boxed{" + wrong_of(i) + "}.";
      if (correct) {
        if (i % 3 == 0) reply = "Thus \\boxed{" + gold_of(i) + "}";
        if (i % 3 == 1) reply = "Thus \\boxed{" + gold_of(i) + ".0}";
        if (i % 3 == 2) reply = "Final: <answer>" + gold_of(i) + "</answer>";
      }
      store.put_chat(s2, static_cast<std::size_t>(j), reply);
    }
    if (i < 90) continue;

    DistillConfig dcfg;
    const auto teacher = teacher_request(rec, 5, dcfg);
    std::vector<std::string> traces;
    for (int j = 0; j < 5; ++j) {
      traces.push_back("Trace " + std::to_string(j) + " for " + id_of(i) + ": step by step, \\boxed{" +
                       gold_of(i) + "}");
      store.put_chat(teacher, static_cast<std::size_t>(j), traces.back());
    }
    // Verdicts: 90..99 all rejected; otherwise the first accepted index is
    // i % 5, with an unparsable reply just before it when there is room.
    const int first = i % 5;
    for (int j = 0; j < 5; ++j) {
      GeneratedResponse resp;
      resp.text = traces[static_cast<std::size_t>(j)];
      std::string verdict;
      if (i < 100) {
        verdict = "The final answer differs.\n0";
      } else if (j < first) {
        verdict = (j == first - 1 && i % 2 == 0) ? "I am not sure." : "Mismatch.\n0";
        if (j == first - 1 && i % 2 == 0) ++e.verify_quarantined;
      } else if (j == first) {
        verdict = "Equivalent.\n1";
      } else {
        verdict = (i + j) % 2 ? "yes" : "no";
      }
      store.put_chat(verifier_request(rec, resp, dcfg), 0, verdict);
    }
    if (i >= 100) e.final_solution[id_of(i)] = traces[static_cast<std::size_t>(first)];
  }
  e.filter_quarantined = 2;

  const Json config = {
      {"input", "raw.jsonl"},
      {"work_dir", "work"},
      {"replay_dir", "replay"},
      {"workers", 2},
      {"seed", 7},
      {"stages",
       Json::array({Json{{"name", "ingest"}, {"params", {{"source", "synth"}}}},
                    Json{{"name", "dedup"}},
                    Json{{"name", "decontam"}, {"params", {{"benchmarks", "benchmarks.jsonl"}}}},
                    Json{{"name", "filter"}},
                    Json{{"name", "extract-answer"}},
                    Json{{"name", "select"}, {"params", {{"stage", 1}}}},
                    Json{{"name", "select"}, {"params", {{"stage", 2}}}},
                    Json{{"name", "distill"}},
                    Json{{"name", "verify"}},
                    Json{{"name", "finalize"}}})}};
  e.config = dir / "run.json";
  std::ofstream(e.config) << config.dump(2);
  e.work_dir = dir / "work";

  e.stage_names = {"ingest", "dedup", "decontam", "filter", "extract-answer",
                   "select", "select", "distill", "verify", "finalize"};
  const auto ingest = range_ids(0, 200);
  const auto dedup = range_ids(0, 190);
  const auto decontam = range_ids(0, 180);
  const auto filter = range_ids(25, 180);
  const auto extract = range_ids(30, 180);
  const auto select1 = range_ids(70, 180);
  const auto select2 = range_ids(90, 180);
  const auto final_ids = range_ids(100, 180);
  e.survivors = {ingest, dedup, decontam, filter, extract, select1, select2, select2, select2, final_ids};
  return e;
}

fs::path build_mixture_pools(const fs::path& dir, std::size_t anchor, std::size_t math_pool,
                             std::size_t math_budget, std::size_t code_pool, std::size_t code_budget,
                             std::uint64_t seed) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> tokens(50, 5000);

  auto write_pool = [&](const std::string& source, std::size_t n, bool sidecars) {
    std::string records, embeddings, counts;
    for (std::size_t i = 0; i < n; ++i) {
      Record r = make_record(source + "-" + std::to_string(i),
                             "Problem " + std::to_string(i) + " from " + source + ": evaluate item " +
                                 std::to_string(i * 31 + 7),
                             source);
      r.solution = "Solution text " + std::to_string(i);
      records += to_canonical_json(r) + "\n";
      if (sidecars) {
        Json vec = Json::array();
        const double centre = static_cast<double>(i % 6);
        for (int d = 0; d < 4; ++d) vec.push_back(centre * (d + 1) + 0.1 * noise(rng));
        embeddings += Json{{"id", r.id}, {"vector", vec}}.dump() + "\n";
        counts += Json{{"id", r.id}, {"tokens", tokens(rng)}}.dump() + "\n";
      }
    }
    std::ofstream(dir / (source + ".jsonl")) << records;
    if (sidecars) {
      std::ofstream(dir / (source + ".emb.jsonl")) << embeddings;
      std::ofstream(dir / (source + ".tokens.jsonl")) << counts;
    }
  };
  write_pool("limo", anchor, false);
  write_pool("am-math", math_pool, true);
  write_pool("am-code", code_pool, true);

  const Json plan = {
      {"anchor", {{"source", "limo"}, {"path", "limo.jsonl"}, {"take_all", true}}},
      {"patches",
       Json::array({Json{{"source", "am-math"},
                         {"path", "am-math.jsonl"},
                         {"budget", math_budget},
                         {"embeddings", "am-math.emb.jsonl"},
                         {"token_counts", "am-math.tokens.jsonl"}},
                    Json{{"source", "am-code"},
                         {"path", "am-code.jsonl"},
                         {"budget", code_budget},
                         {"embeddings", "am-code.emb.jsonl"},
                         {"token_counts", "am-code.tokens.jsonl"}}})},
      {"n_clusters", 24},
      {"max_iters", 30},
      {"sampling", "difficulty_priority"},
      {"seed", seed},
      {"target_size", anchor + math_budget + code_budget}};
  const fs::path path = dir / "plan.json";
  std::ofstream(path) << plan.dump(2);
  return path;
}

}  // namespace fixtures
