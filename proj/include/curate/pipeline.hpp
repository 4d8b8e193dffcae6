#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "curate/client.hpp"
#include "curate/manifest.hpp"
#include "curate/prompts.hpp"
#include "curate/record.hpp"

namespace curate {

struct StageSpec {
  std::string name;  // ingest, dedup, decontam, filter, extract-answer, select, distill, verify, finalize, mix
  Json params = Json::object();
};

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path work_dir = "work";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path cache_dir;
  std::filesystem::path replay_dir;  // non-empty: replay mode
  std::filesystem::path prompts_dir;
  std::map<std::string, RoleEndpoint> roles;
  std::vector<StageSpec> stages;
};

/// Parses a run config. Relative paths resolve against `base`.
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);

bool is_known_stage(const std::string& name);

/// Model roles a stage will call with its (defaulted) params.
std::set<std::string> stage_roles(const StageSpec& spec);

/// Every role a stage needs must have an endpoint unless running in replay
/// mode. Throws PreconditionError naming the missing roles.
void validate_run_config(const RunConfig& cfg);

/// Shared state for executing stages: worker count, seed, prompts and a
/// lazily constructed model client.
class StageContext {
 public:
  explicit StageContext(const RunConfig& cfg);
  StageContext(const RunConfig& cfg, std::shared_ptr<ModelClient> client);

  ModelClient& client();
  std::size_t workers() const noexcept { return workers_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const PromptSet& prompts() const noexcept { return prompts_; }

 private:
  RunConfig cfg_;
  std::size_t workers_;
  std::uint64_t seed_;
  PromptSet prompts_;
  std::shared_ptr<ModelClient> client_;
};

/// Runs one stage from `input` to `output`, writing sidecars next to the
/// output and the manifest last. Params are completed with defaults and the
/// effective set is recorded in the manifest.
StageManifest execute_stage(const StageSpec& spec, const std::filesystem::path& input,
                            const std::filesystem::path& output, StageContext& ctx);

/// `<output stem>.<tag>.jsonl` next to the output.
std::filesystem::path sidecar_path(const std::filesystem::path& output, const std::string& tag);

/// `work_dir/NN-name.jsonl`
std::filesystem::path stage_output_path(const RunConfig& cfg, std::size_t index);

enum class ResumeState { absent, up_to_date, stale };

/// up_to_date iff the output and its manifest exist, the manifest's params
/// equal `effective_params`, its input digest matches `input`, and its
/// output digest matches the file. Anything else with a manifest present is
/// stale.
ResumeState resume_state(const std::filesystem::path& input, const std::filesystem::path& output,
                         const Json& effective_params, std::string* reason = nullptr);

/// Params after defaults are filled in, as they land in the manifest.
Json effective_params(const StageSpec& spec, std::uint64_t seed);

struct StageRun {
  std::string name;
  std::filesystem::path output;
  bool skipped = false;
  StageManifest manifest;
};

struct PipelineResult {
  std::vector<StageRun> stages;
  std::size_t executed = 0;
};

/// Runs the stages in order, each reading the previous one's output. Up to
/// date stages are skipped. A stale stage throws DigestMismatch unless
/// `force`. A supplied client overrides the one built from the config.
PipelineResult run_pipeline(const RunConfig& cfg, bool force = false,
                            std::shared_ptr<ModelClient> client = nullptr);

}  // namespace curate
