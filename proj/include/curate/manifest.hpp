#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "curate/record.hpp"

namespace curate {

/// Audit record of one pipeline stage.
struct StageManifest {
  std::string stage;
  Json params = Json::object();
  std::size_t input_count = 0;
  std::size_t output_count = 0;
  std::size_t removed_count = 0;
  std::string input_digest;
  std::string output_digest;
  std::optional<std::uint64_t> seed;
  double duration_s = 0.0;
  /// Stage-specific breakdowns: removals by reason, per-source counts, ...
  Json details = Json::object();
};

/// `<output>.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

OrderedJson manifest_to_json(const StageManifest& m);
StageManifest manifest_from_json(const Json& j);

void write_manifest(const std::filesystem::path& output, const StageManifest& m);
std::optional<StageManifest> read_manifest(const std::filesystem::path& output);

}  // namespace curate
