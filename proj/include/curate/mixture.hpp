#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "curate/client.hpp"
#include "curate/kmeans.hpp"
#include "curate/manifest.hpp"
#include "curate/record.hpp"

namespace curate {

struct Cluster {
  std::size_t id = 0;
  Vector centroid;
  std::vector<std::string> member_ids;  // pool order
  std::size_t budget = 0;
};

/// Groups kmeans output into clusters; `ids[i]` names point i.
std::vector<Cluster> make_clusters(const KMeansResult& km, const std::vector<std::string>& ids);

/// Splits `total` across clusters in proportion to their sizes by largest
/// remainder. Ties on the remainder go to the smaller cluster, then the
/// lower id. No budget exceeds its cluster; any excess from a capped cluster
/// is re-split among the others. Budgets always sum to `total`.
/// Throws InfeasibleBudget if total exceeds the combined size.
std::vector<std::size_t> allocate_budget(const std::vector<std::size_t>& sizes, std::size_t total);
void allocate_budget(std::vector<Cluster>& clusters, std::size_t total);

/// Longest members first (ties: lower id), `budget` of them.
std::vector<std::string> sample_difficulty_priority(
    const Cluster& cluster, const std::unordered_map<std::string, std::size_t>& token_counts,
    std::size_t budget);

/// Uniform sample without replacement, seeded by (seed, cluster id). The
/// result lists members in cluster order.
std::vector<std::string> sample_random(const Cluster& cluster, std::size_t budget,
                                       std::uint64_t seed);

enum class SamplingRegime { difficulty_priority, random };

struct PatchSpec {
  std::string source;
  std::filesystem::path path;
  std::size_t budget = 0;
  std::optional<std::filesystem::path> embeddings;    // JSONL {"id","vector"}
  std::optional<std::filesystem::path> token_counts;  // JSONL {"id","tokens"}
};

struct MixturePlan {
  std::string anchor_source;
  std::filesystem::path anchor_path;
  bool anchor_take_all = true;
  std::vector<PatchSpec> patches;
  std::optional<std::size_t> n_clusters;  // default ceil(sqrt(N / 2)) per source
  SamplingRegime sampling = SamplingRegime::difficulty_priority;
  std::uint64_t seed = 0;
  std::string difficulty_proxy = "token_count";
  std::optional<std::size_t> target_size;
  std::optional<std::filesystem::path> benchmarks;
  std::size_t ngram_n = 10;
  std::string embed_role = "embedder";
  std::size_t embed_dim = 0;
  std::size_t max_iters = 100;
  double tol = 1e-9;
};

/// Reads a JSON plan; relative paths resolve against the plan's directory.
MixturePlan load_plan(const std::filesystem::path& path);
Json plan_to_json(const MixturePlan& plan);

/// In-memory contents of one source.
struct SourceData {
  std::vector<Record> records;
  std::unordered_map<std::string, Vector> embeddings;
  std::unordered_map<std::string, std::size_t> token_counts;
};

/// Loads every source named by the plan, including sidecars.
std::map<std::string, SourceData> load_sources(const MixturePlan& plan);

std::unordered_map<std::string, Vector> read_embedding_sidecar(const std::filesystem::path& path);

std::size_t default_cluster_count(std::size_t pool_size);

struct MixtureOutcome {
  std::vector<Record> records;
  StageManifest manifest;
};

/// Anchor in full, then for each patch: exact dedup, decontamination (when
/// the plan names benchmarks), embedding, kmeans, budget allocation and
/// per-cluster sampling. Selected records keep pool order.
MixtureOutcome build_mixture(const MixturePlan& plan, const std::map<std::string, SourceData>& sources,
                             ModelClient* client = nullptr, std::size_t workers = 1);

}  // namespace curate
