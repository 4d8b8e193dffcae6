#include "curate/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "curate/corpus.hpp"
#include "curate/dedup.hpp"
#include "curate/digest.hpp"
#include "curate/error.hpp"
#include "curate/normalize.hpp"
#include "curate/parallel.hpp"

namespace curate {

std::vector<Cluster> make_clusters(const KMeansResult& km, const std::vector<std::string>& ids) {
  std::vector<Cluster> clusters(km.centroids.size());
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    clusters[j].id = j;
    clusters[j].centroid = km.centroids[j];
  }
  for (std::size_t i = 0; i < ids.size(); ++i) clusters[km.assignments[i]].member_ids.push_back(ids[i]);
  return clusters;
}

std::vector<std::size_t> allocate_budget(const std::vector<std::size_t>& sizes, std::size_t total) {
  const std::size_t capacity = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > capacity) {
    throw InfeasibleBudget("budget " + std::to_string(total) + " exceeds pool size " +
                               std::to_string(capacity),
                           capacity);
  }
  std::vector<std::size_t> budgets(sizes.size(), 0);
  std::vector<bool> capped(sizes.size(), false);
  std::size_t remaining = total;

  for (;;) {
    std::uint64_t weight = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (!capped[i]) weight += sizes[i];
    }
    if (weight == 0 || remaining == 0) break;

    // quota_i = remaining * size_i / weight, kept as floor + remainder numerator.
    std::vector<std::size_t> share(sizes.size(), 0);
    std::vector<std::uint64_t> rem(sizes.size(), 0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (capped[i]) continue;
      const std::uint64_t num = static_cast<std::uint64_t>(remaining) * sizes[i];
      share[i] = static_cast<std::size_t>(num / weight);
      rem[i] = num % weight;
      assigned += share[i];
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (!capped[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rem[a] != rem[b]) return rem[a] > rem[b];
      if (sizes[a] != sizes[b]) return sizes[a] < sizes[b];
      return a < b;
    });
    for (std::size_t r = 0; r < remaining - assigned; ++r) ++share[order[r % order.size()]];

    bool overflow = false;
    for (std::size_t i : order) {
      if (budgets[i] + share[i] > sizes[i]) {
        remaining -= sizes[i] - budgets[i];
        budgets[i] = sizes[i];
        capped[i] = true;
        overflow = true;
      }
    }
    if (!overflow) {
      for (std::size_t i : order) budgets[i] += share[i];
      break;
    }
  }
  return budgets;
}

void allocate_budget(std::vector<Cluster>& clusters, std::size_t total) {
  std::vector<std::size_t> sizes;
  for (const auto& c : clusters) sizes.push_back(c.member_ids.size());
  const auto budgets = allocate_budget(sizes, total);
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].budget = budgets[i];
}

std::vector<std::string> sample_difficulty_priority(
    const Cluster& cluster, const std::unordered_map<std::string, std::size_t>& token_counts,
    std::size_t budget) {
  if (budget > cluster.member_ids.size()) {
    throw PreconditionError("budget exceeds cluster size");
  }
  auto tokens = [&](const std::string& id) {
    auto it = token_counts.find(id);
    if (it == token_counts.end()) throw PreconditionError("no token count for record " + id);
    return it->second;
  };
  std::vector<std::pair<std::size_t, const std::string*>> ranked;
  ranked.reserve(cluster.member_ids.size());
  for (const auto& id : cluster.member_ids) ranked.emplace_back(tokens(id), &id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  out.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) out.push_back(*ranked[i].second);
  return out;
}

std::vector<std::string> sample_random(const Cluster& cluster, std::size_t budget,
                                       std::uint64_t seed) {
  const std::size_t m = cluster.member_ids.size();
  if (budget > m) throw PreconditionError("budget exceeds cluster size");
  std::mt19937_64 rng(mix64(seed ^ mix64(cluster.id)));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < budget; ++i) {
    std::size_t j = i + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(m - i));
    if (j >= m) j = m - 1;
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(budget));
  std::vector<std::string> out;
  out.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) out.push_back(cluster.member_ids[idx[i]]);
  return out;
}

std::size_t default_cluster_count(std::size_t pool_size) {
  if (pool_size == 0) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pool_size) / 2.0)));
  return std::clamp<std::size_t>(k, 1, pool_size);
}

// --- plan files ------------------------------------------------------------

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SamplingRegime regime_from_name(const std::string& s) {
  if (s == "difficulty_priority") return SamplingRegime::difficulty_priority;
  if (s == "random") return SamplingRegime::random;
  throw ParseError("unknown sampling regime '" + s + "'");
}

std::unordered_map<std::string, std::size_t> read_token_sidecar(const std::filesystem::path& path) {
  std::unordered_map<std::string, std::size_t> out;
  for (const auto& row : read_jsonl(path)) {
    out[row.at("id").get<std::string>()] = row.at("tokens").get<std::size_t>();
  }
  return out;
}

}  // namespace

MixturePlan load_plan(const std::filesystem::path& path) {
  const Json j = Json::parse(read_file(path));
  const auto base = path.parent_path();
  MixturePlan plan;
  try {
    if (j.contains("anchor") && !j["anchor"].is_null()) {
      const auto& a = j["anchor"];
      plan.anchor_source = a.at("source").get<std::string>();
      plan.anchor_path = resolve(base, a.at("path").get<std::string>());
      plan.anchor_take_all = a.value("take_all", true);
    }
    for (const auto& p : j.value("patches", Json::array())) {
      PatchSpec spec;
      spec.source = p.at("source").get<std::string>();
      spec.path = resolve(base, p.at("path").get<std::string>());
      spec.budget = p.at("budget").get<std::size_t>();
      if (p.contains("embeddings")) spec.embeddings = resolve(base, p["embeddings"].get<std::string>());
      if (p.contains("token_counts")) {
        spec.token_counts = resolve(base, p["token_counts"].get<std::string>());
      }
      plan.patches.push_back(std::move(spec));
    }
    if (j.contains("n_clusters") && !j["n_clusters"].is_null()) {
      plan.n_clusters = j["n_clusters"].get<std::size_t>();
    }
    plan.sampling = regime_from_name(j.value("sampling", std::string("difficulty_priority")));
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.difficulty_proxy = j.value("difficulty_proxy", std::string("token_count"));
    if (j.contains("target_size") && !j["target_size"].is_null()) {
      plan.target_size = j["target_size"].get<std::size_t>();
    }
    if (j.contains("benchmarks") && !j["benchmarks"].is_null()) {
      plan.benchmarks = resolve(base, j["benchmarks"].get<std::string>());
    }
    plan.ngram_n = j.value("ngram_n", std::size_t{10});
    plan.embed_role = j.value("embed_role", std::string("embedder"));
    plan.embed_dim = j.value("embed_dim", std::size_t{0});
    plan.max_iters = j.value("max_iters", std::size_t{100});
    plan.tol = j.value("tol", 1e-9);
  } catch (const Json::exception& e) {
    throw ParseError("malformed plan " + path.string() + ": " + e.what());
  }
  if (plan.difficulty_proxy != "token_count") {
    throw ParseError("unsupported difficulty_proxy '" + plan.difficulty_proxy + "'");
  }
  return plan;
}

Json plan_to_json(const MixturePlan& plan) {
  Json j;
  if (!plan.anchor_source.empty()) {
    j["anchor"] = {{"source", plan.anchor_source}, {"take_all", plan.anchor_take_all}};
  }
  j["patches"] = Json::array();
  for (const auto& p : plan.patches) j["patches"].push_back({{"source", p.source}, {"budget", p.budget}});
  j["n_clusters"] = plan.n_clusters ? Json(*plan.n_clusters) : Json(nullptr);
  j["sampling"] = plan.sampling == SamplingRegime::random ? "random" : "difficulty_priority";
  j["seed"] = plan.seed;
  j["difficulty_proxy"] = plan.difficulty_proxy;
  j["target_size"] = plan.target_size ? Json(*plan.target_size) : Json(nullptr);
  j["decontaminate"] = plan.benchmarks.has_value();
  j["ngram_n"] = plan.ngram_n;
  j["max_iters"] = plan.max_iters;
  j["tol"] = plan.tol;
  return j;
}

std::unordered_map<std::string, Vector> read_embedding_sidecar(const std::filesystem::path& path) {
  std::unordered_map<std::string, Vector> out;
  for (const auto& row : read_jsonl(path)) {
    out[row.at("id").get<std::string>()] = row.at("vector").get<Vector>();
  }
  return out;
}

std::map<std::string, SourceData> load_sources(const MixturePlan& plan) {
  std::map<std::string, SourceData> sources;
  if (!plan.anchor_source.empty()) {
    sources[plan.anchor_source].records = read_records(plan.anchor_path).records;
  }
  for (const auto& p : plan.patches) {
    auto& s = sources[p.source];
    s.records = read_records(p.path).records;
    if (p.embeddings) s.embeddings = read_embedding_sidecar(*p.embeddings);
    if (p.token_counts) s.token_counts = read_token_sidecar(*p.token_counts);
  }
  return sources;
}

// --- build -----------------------------------------------------------------

namespace {

struct PatchResult {
  std::vector<Record> selected;
  Json details;
};

PatchResult build_patch(const MixturePlan& plan, const PatchSpec& spec, const SourceData& data,
                        const NGramIndex* index, ModelClient* client, std::size_t workers) {
  PatchResult out;
  out.details["raw"] = data.records.size();

  auto deduped = exact_dedup(data.records);
  out.details["after_dedup"] = deduped.kept.size();
  std::vector<Record> pool = std::move(deduped.kept);
  if (index != nullptr) {
    auto clean = decontaminate(std::move(pool), *index, workers);
    pool = std::move(clean.kept);
  }
  out.details["after_decontam"] = pool.size();
  out.details["budget"] = spec.budget;

  if (spec.budget > pool.size()) {
    throw InfeasibleBudget("source '" + spec.source + "': budget " + std::to_string(spec.budget) +
                               " exceeds the " + std::to_string(pool.size()) +
                               " records left after dedup/decontamination",
                           pool.size());
  }
  if (spec.budget == 0) {
    out.details["selected"] = 0;
    return out;
  }

  std::vector<std::string> ids;
  std::vector<Vector> vectors;
  ids.reserve(pool.size());
  vectors.reserve(pool.size());
  std::size_t embedded_via_client = 0;
  for (const auto& rec : pool) {
    ids.push_back(rec.id);
    if (auto it = data.embeddings.find(rec.id); it != data.embeddings.end()) {
      vectors.push_back(it->second);
      continue;
    }
    if (client == nullptr || plan.embed_dim == 0) {
      throw PreconditionError("source '" + spec.source + "': no embedding for record " + rec.id +
                              " and no embedder configured");
    }
    vectors.push_back(client->embed(EmbedRequest{plan.embed_role, rec.question, plan.embed_dim}));
    ++embedded_via_client;
  }

  const std::size_t k = std::min(pool.size(), plan.n_clusters.value_or(default_cluster_count(pool.size())));
  KMeansOptions opts;
  opts.k = k;
  opts.seed = mix64(plan.seed ^ fnv1a64(spec.source));
  opts.max_iters = plan.max_iters;
  opts.tol = plan.tol;
  opts.workers = workers;
  const KMeansResult km = kmeans(vectors, opts);
  auto clusters = make_clusters(km, ids);
  allocate_budget(clusters, spec.budget);

  std::unordered_map<std::string, std::size_t> token_counts;
  if (plan.sampling == SamplingRegime::difficulty_priority) {
    for (const auto& rec : pool) {
      auto it = data.token_counts.find(rec.id);
      token_counts[rec.id] = it != data.token_counts.end()
                                 ? it->second
                                 : whitespace_token_count(rec.question + " " + rec.solution.value_or(""));
    }
  }

  std::unordered_set<std::string> chosen;
  Json cluster_info = Json::array();
  for (const auto& c : clusters) {
    const auto picked = plan.sampling == SamplingRegime::difficulty_priority
                            ? sample_difficulty_priority(c, token_counts, c.budget)
                            : sample_random(c, c.budget, plan.seed ^ fnv1a64(spec.source));
    chosen.insert(picked.begin(), picked.end());
    cluster_info.push_back({{"id", c.id}, {"size", c.member_ids.size()}, {"budget", c.budget}});
  }
  for (auto& rec : pool) {
    if (chosen.contains(rec.id)) out.selected.push_back(std::move(rec));
  }
  out.details["n_clusters"] = k;
  out.details["kmeans_iterations"] = km.iterations;
  out.details["kmeans_converged"] = km.converged;
  out.details["embedded_via_client"] = embedded_via_client;
  out.details["selected"] = out.selected.size();
  out.details["clusters"] = std::move(cluster_info);
  return out;
}

}  // namespace

MixtureOutcome build_mixture(const MixturePlan& plan, const std::map<std::string, SourceData>& sources,
                             ModelClient* client, std::size_t workers) {
  if (!plan.anchor_source.empty() && !plan.anchor_take_all) {
    throw PreconditionError("the anchor source is always taken whole; set take_all to true");
  }
  std::size_t planned = 0;
  for (const auto& p : plan.patches) planned += p.budget;

  auto source = [&](const std::string& name) -> const SourceData& {
    auto it = sources.find(name);
    if (it == sources.end()) throw PreconditionError("source '" + name + "' is not loaded");
    return it->second;
  };

  std::optional<NGramIndex> index;
  if (plan.benchmarks) index = build_ngram_index(load_benchmarks(*plan.benchmarks), plan.ngram_n, workers);

  MixtureOutcome out;
  auto& m = out.manifest;
  m.stage = "mix";
  m.params = plan_to_json(plan);
  m.seed = plan.seed;

  std::size_t anchor_count = 0;
  if (!plan.anchor_source.empty()) {
    const auto& anchor = source(plan.anchor_source).records;
    anchor_count = anchor.size();
    m.input_count += anchor.size();
    out.records = anchor;
    m.details["per_source"][plan.anchor_source] = {{"raw", anchor.size()}, {"selected", anchor.size()},
                                                   {"anchor", true}};
  }
  if (plan.target_size && *plan.target_size != planned + anchor_count) {
    throw PreconditionError("plan budgets (" + std::to_string(planned) + ") plus anchor (" +
                            std::to_string(anchor_count) + ") do not equal target_size " +
                            std::to_string(*plan.target_size));
  }

  // Sources run independently; each one's kmeans gets the remaining workers.
  auto results = parallel_map(plan.patches.size(), std::min(workers, plan.patches.size()),
                              [&](std::size_t i) {
                                const auto& spec = plan.patches[i];
                                return build_patch(plan, spec, source(spec.source),
                                                   index ? &*index : nullptr, client,
                                                   std::max<std::size_t>(1, workers / std::max<std::size_t>(1, plan.patches.size())));
                              });
  for (std::size_t i = 0; i < plan.patches.size(); ++i) {
    m.input_count += source(plan.patches[i].source).records.size();
    m.details["per_source"][plan.patches[i].source] = results[i].details;
    for (auto& rec : results[i].selected) out.records.push_back(std::move(rec));
  }
  m.output_count = out.records.size();
  m.removed_count = m.input_count - m.output_count;
  return out;
}

}  // namespace curate
