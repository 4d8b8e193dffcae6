#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "curate/record.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "curate");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

curate::Record make_record(const std::string& id, const std::string& question,
                           const std::string& source = "test");

/// Space-separated random lowercase words.
std::string random_words(std::mt19937_64& rng, std::size_t n);

/// The 200-record replay demo: raw input, benchmarks, replay store and run
/// config, with the ids expected to survive each stage.
struct EndToEnd {
  std::filesystem::path config;
  std::filesystem::path work_dir;
  std::vector<std::string> stage_names;
  std::vector<std::set<std::string>> survivors;  // per stage, in config order
  /// For each finally kept record, the teacher response it must carry.
  std::map<std::string, std::string> final_solution;
  std::size_t verify_quarantined = 0;
  std::size_t filter_quarantined = 0;
};

EndToEnd build_end_to_end(const std::filesystem::path& dir);

/// Mixture pools sized for the efficiency-track plan: anchor of 817, math
/// and code pools larger than their budgets, with embedding and token-count
/// sidecars. Returns the plan path.
std::filesystem::path build_mixture_pools(const std::filesystem::path& dir, std::size_t anchor,
                                          std::size_t math_pool, std::size_t math_budget,
                                          std::size_t code_pool, std::size_t code_budget,
                                          std::uint64_t seed);

}  // namespace fixtures
