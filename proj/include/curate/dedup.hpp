#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "curate/manifest.hpp"
#include "curate/record.hpp"

namespace curate {

/// Held-out questions used as the contamination reference.
struct BenchmarkSet {
  std::string name;
  std::vector<std::string> items;  // normalized question texts
};

/// Loads `{"name": ..., "question": ...}` JSONL into one set per name, in
/// first-seen order. Questions are normalized on load.
std::vector<BenchmarkSet> load_benchmarks(const std::filesystem::path& path);

/// Hashed word n-grams of a collection of benchmark sets.
struct NGramIndex {
  std::size_t n = 0;
  std::unordered_set<std::uint64_t> grams;
  /// Whole-question hashes of items with fewer than n tokens.
  std::unordered_set<std::uint64_t> short_items;
  std::vector<std::string> source_names;
};

/// Hash of a token window, joined by single spaces.
std::uint64_t gram_hash(const std::vector<std::string_view>& tokens, std::size_t begin,
                        std::size_t n);

/// Builds the index over every normalized item. Items are re-normalized, so
/// raw text is accepted as well. Throws PreconditionError when n == 0 or no
/// benchmark items are given.
NGramIndex build_ngram_index(const std::vector<BenchmarkSet>& benchmarks, std::size_t n,
                             std::size_t workers = 1);

struct FilterOutcome {
  std::vector<Record> kept;
  StageManifest manifest;
};

/// Keeps the first record (input order) of each normalized question.
FilterOutcome exact_dedup(std::vector<Record> records);

struct Removal {
  std::string id;
  std::string reason;  // "ngram" | "short_match"
  std::string matched_span;
};

struct DecontamOutcome {
  std::vector<Record> kept;
  std::vector<Removal> removals;
  StageManifest manifest;
};

/// Drops every record whose normalized question shares a word n-gram with
/// the index, or equals a short benchmark item outright.
DecontamOutcome decontaminate(std::vector<Record> records, const NGramIndex& index,
                              std::size_t workers = 1);

OrderedJson removal_to_json(const Removal& r);

}  // namespace curate
