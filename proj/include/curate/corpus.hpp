#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "curate/manifest.hpp"
#include "curate/record.hpp"

namespace curate {

/// Streams records from a JSONL file in file order.
///
/// Strict mode throws ParseError on the first bad line. Lenient mode skips
/// bad lines (malformed JSON, missing `question`, invariant violations) and
/// counts them. Blank lines are ignored in both modes.
class RecordReader {
 public:
  RecordReader(const std::filesystem::path& path, bool strict);

  std::optional<Record> next();

  std::size_t skipped() const noexcept { return skipped_; }
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  bool strict_;
  std::size_t skipped_ = 0;
  std::size_t line_no_ = 0;
};

struct ReadResult {
  std::vector<Record> records;
  std::size_t skipped = 0;
};

ReadResult read_records(const std::filesystem::path& path, bool strict = true);

/// Writes records as canonical JSONL, atomically (temp file then rename).
/// Throws PreconditionError on a duplicate id; nothing is written then.
/// The returned manifest carries output_count and output_digest only.
StageManifest write_records(const std::vector<Record>& records,
                            const std::filesystem::path& path);

/// Canonical JSONL bytes for `records`, exactly what write_records emits.
std::string records_to_jsonl(const std::vector<Record>& records);

/// Generic JSONL helpers for sidecar files.
void write_jsonl(const std::filesystem::path& path, const std::vector<OrderedJson>& rows);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// Writes `bytes` to `path` via a sibling temp file and rename.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace curate
