#include "curate/dedup.hpp"

#include <optional>
#include <unordered_map>

#include "curate/corpus.hpp"
#include "curate/digest.hpp"
#include "curate/error.hpp"
#include "curate/normalize.hpp"
#include "curate/parallel.hpp"

namespace curate {
namespace {

std::string join_window(const std::vector<std::string_view>& tokens, std::size_t begin,
                        std::size_t n) {
  std::string s;
  for (std::size_t i = begin; i < begin + n; ++i) {
    if (i > begin) s.push_back(' ');
    s.append(tokens[i]);
  }
  return s;
}

struct ShardIndex {
  std::unordered_set<std::uint64_t> grams;
  std::unordered_set<std::uint64_t> short_items;
};

ShardIndex index_set(const BenchmarkSet& set, std::size_t n) {
  ShardIndex shard;
  for (const auto& item : set.items) {
    const std::string norm = normalize_text(item);
    const auto tokens = split_tokens(norm);
    if (tokens.empty()) continue;
    if (tokens.size() < n) {
      shard.short_items.insert(fnv1a64(norm));
      continue;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      shard.grams.insert(gram_hash(tokens, i, n));
    }
  }
  return shard;
}

}  // namespace

std::vector<BenchmarkSet> load_benchmarks(const std::filesystem::path& path) {
  std::vector<BenchmarkSet> sets;
  std::unordered_map<std::string, std::size_t> by_name;
  for (const auto& row : read_jsonl(path)) {
    if (!row.is_object() || !row.contains("question") || !row["question"].is_string()) {
      throw ParseError(path.string() + ": benchmark row without string 'question'");
    }
    const std::string name = row.value("name", std::string("benchmark"));
    auto [it, inserted] = by_name.try_emplace(name, sets.size());
    if (inserted) sets.push_back(BenchmarkSet{name, {}});
    sets[it->second].items.push_back(normalize_text(row["question"].get<std::string>()));
  }
  return sets;
}

std::uint64_t gram_hash(const std::vector<std::string_view>& tokens, std::size_t begin,
                        std::size_t n) {
  return fnv1a64(join_window(tokens, begin, n));
}

NGramIndex build_ngram_index(const std::vector<BenchmarkSet>& benchmarks, std::size_t n,
                             std::size_t workers) {
  if (n == 0) throw PreconditionError("n-gram size must be >= 1");
  std::size_t total_items = 0;
  for (const auto& b : benchmarks) total_items += b.items.size();
  if (total_items == 0) throw PreconditionError("benchmark set is empty");

  auto shards = parallel_map(benchmarks.size(), workers,
                             [&](std::size_t i) { return index_set(benchmarks[i], n); });
  NGramIndex index;
  index.n = n;
  for (std::size_t i = 0; i < benchmarks.size(); ++i) {
    index.grams.merge(shards[i].grams);
    index.short_items.merge(shards[i].short_items);
    index.source_names.push_back(benchmarks[i].name);
  }
  return index;
}

FilterOutcome exact_dedup(std::vector<Record> records) {
  FilterOutcome out;
  out.manifest.stage = "dedup";
  out.manifest.input_count = records.size();
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  for (auto& rec : records) {
    if (seen.insert(normalize_text(rec.question)).second) out.kept.push_back(std::move(rec));
  }
  out.manifest.output_count = out.kept.size();
  out.manifest.removed_count = out.manifest.input_count - out.manifest.output_count;
  out.manifest.details["duplicates"] = out.manifest.removed_count;
  return out;
}

DecontamOutcome decontaminate(std::vector<Record> records, const NGramIndex& index,
                              std::size_t workers) {
  auto hits = parallel_map(records.size(), workers, [&](std::size_t i) -> std::optional<Removal> {
    const std::string norm = normalize_text(records[i].question);
    if (index.short_items.contains(fnv1a64(norm))) {
      return Removal{records[i].id, "short_match", norm};
    }
    const auto tokens = split_tokens(norm);
    for (std::size_t t = 0; t + index.n <= tokens.size(); ++t) {
      if (index.grams.contains(gram_hash(tokens, t, index.n))) {
        return Removal{records[i].id, "ngram", join_window(tokens, t, index.n)};
      }
    }
    return std::nullopt;
  });

  DecontamOutcome out;
  out.manifest.stage = "decontam";
  out.manifest.input_count = records.size();
  std::size_t ngram = 0;
  std::size_t short_match = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (hits[i]) {
      (hits[i]->reason == "ngram" ? ngram : short_match)++;
      out.removals.push_back(std::move(*hits[i]));
    } else {
      out.kept.push_back(std::move(records[i]));
    }
  }
  out.manifest.output_count = out.kept.size();
  out.manifest.removed_count = out.removals.size();
  out.manifest.params["n"] = index.n;
  out.manifest.params["benchmarks"] = index.source_names;
  out.manifest.details["removed_ngram"] = ngram;
  out.manifest.details["removed_short_match"] = short_match;
  out.manifest.details["index_grams"] = index.grams.size();
  out.manifest.details["index_short_items"] = index.short_items.size();
  return out;
}

OrderedJson removal_to_json(const Removal& r) {
  OrderedJson j = OrderedJson::object();
  j["id"] = r.id;
  j["reason"] = r.reason;
  j["matched_span"] = r.matched_span;
  return j;
}

}  // namespace curate
