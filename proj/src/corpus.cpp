#include "curate/corpus.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "curate/digest.hpp"
#include "curate/error.hpp"
#include "curate/normalize.hpp"

namespace curate {
namespace {

template <typename T>
OrderedJson opt(const std::optional<T>& v) {
  return v ? OrderedJson(*v) : OrderedJson(nullptr);
}

OrderedJson response_to_json(const GeneratedResponse& r) {
  OrderedJson j = OrderedJson::object();
  j["text"] = r.text;
  j["extracted_answer"] = opt(r.extracted_answer);
  j["verified"] = opt(r.verified);
  j["sampler_params_digest"] = r.sampler_params_digest;
  return j;
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::string required_string(const Json& j, const char* key) {
  auto v = opt_string(j, key);
  if (!v) throw ParseError(std::string("missing required field '") + key + "'");
  return *v;
}

GeneratedResponse response_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("response must be an object");
  GeneratedResponse r;
  r.text = required_string(j, "text");
  r.extracted_answer = opt_string(j, "extracted_answer");
  if (auto it = j.find("verified"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError("response.verified must be a boolean");
    r.verified = it->get<bool>();
  }
  r.sampler_params_digest = opt_string(j, "sampler_params_digest").value_or("");
  return r;
}

std::string temp_sibling(const std::filesystem::path& path) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream name;
  name << path.string() << ".tmp." << std::chrono::steady_clock::now().time_since_epoch().count()
       << "." << counter++;
  return name.str();
}

}  // namespace

std::string to_canonical_json(const Record& rec) {
  OrderedJson j = OrderedJson::object();
  j["id"] = rec.id;
  j["source"] = rec.source;
  j["question"] = rec.question;
  j["solution"] = opt(rec.solution);
  j["answer"] = opt(rec.answer);
  j["domain"] = opt(rec.domain);
  j["difficulty"] = opt(rec.difficulty);
  OrderedJson responses = OrderedJson::array();
  for (const auto& r : rec.responses) responses.push_back(response_to_json(r));
  j["responses"] = std::move(responses);
  j["pass_rate"] = opt(rec.pass_rate);
  OrderedJson scores = OrderedJson::object();
  for (const auto& [k, v] : rec.scores) scores[k] = v;
  j["scores"] = std::move(scores);
  // Json objects keep keys sorted, so meta is canonical already.
  j["meta"] = OrderedJson::parse(rec.meta.dump());
  return j.dump(-1, ' ', false, OrderedJson::error_handler_t::replace);
}

void validate_record(const Record& rec) {
  if (rec.id.empty()) throw ParseError("record id is empty");
  if (normalize_text(rec.question).empty()) {
    throw ParseError("record " + rec.id + ": question is empty after normalization");
  }
  if (rec.difficulty && (*rec.difficulty < 1 || *rec.difficulty > 10)) {
    throw ParseError("record " + rec.id + ": difficulty outside 1..10");
  }
  if (rec.pass_rate && !(*rec.pass_rate >= 0.0 && *rec.pass_rate <= 1.0)) {
    throw ParseError("record " + rec.id + ": pass_rate outside [0,1]");
  }
}

Record record_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("record line is not a JSON object");
  Record rec;
  rec.question = required_string(j, "question");
  rec.id = required_string(j, "id");
  rec.source = opt_string(j, "source").value_or("");
  rec.solution = opt_string(j, "solution");
  rec.answer = opt_string(j, "answer");
  rec.domain = opt_string(j, "domain");
  if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ParseError("difficulty must be an integer");
    rec.difficulty = it->get<int>();
  }
  if (auto it = j.find("responses"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("responses must be an array");
    for (const auto& r : *it) rec.responses.push_back(response_from_json(r));
  }
  if (auto it = j.find("pass_rate"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ParseError("pass_rate must be a number");
    rec.pass_rate = it->get<double>();
  }
  if (auto it = j.find("scores"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("scores must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number()) throw ParseError("score '" + k + "' must be a number");
      rec.scores[k] = v.get<double>();
    }
  }
  if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("meta must be an object");
    rec.meta = *it;
  }
  validate_record(rec);
  return rec;
}

RecordReader::RecordReader(const std::filesystem::path& path, bool strict)
    : path_(path), in_(path, std::ios::binary), strict_(strict) {
  if (!in_) throw IoError("cannot open " + path.string());
}

std::optional<Record> RecordReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      return record_from_json(Json::parse(line));
    } catch (const Json::exception& e) {
      if (strict_) {
        throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + e.what());
      }
    } catch (const ParseError& e) {
      if (strict_) {
        throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + e.what());
      }
    }
    ++skipped_;
  }
  return std::nullopt;
}

ReadResult read_records(const std::filesystem::path& path, bool strict) {
  RecordReader reader(path, strict);
  ReadResult out;
  while (auto rec = reader.next()) out.records.push_back(std::move(*rec));
  out.skipped = reader.skipped();
  return out;
}

std::string records_to_jsonl(const std::vector<Record>& records) {
  std::string bytes;
  std::unordered_set<std::string_view> ids;
  ids.reserve(records.size());
  for (const auto& rec : records) {
    if (!ids.insert(rec.id).second) {
      throw PreconditionError("duplicate record id '" + rec.id + "'");
    }
    bytes += to_canonical_json(rec);
    bytes += '\n';
  }
  return bytes;
}

StageManifest write_records(const std::vector<Record>& records,
                            const std::filesystem::path& path) {
  const std::string bytes = records_to_jsonl(records);
  atomic_write(path, bytes);
  StageManifest m;
  m.stage = "write";
  m.output_count = records.size();
  m.output_digest = sha256_hex(bytes);
  return m;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<OrderedJson>& rows) {
  std::string bytes;
  for (const auto& row : rows) {
    bytes += row.dump(-1, ' ', false, OrderedJson::error_handler_t::replace);
    bytes += '\n';
  }
  atomic_write(path, bytes);
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- manifests -------------------------------------------------------------

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

OrderedJson manifest_to_json(const StageManifest& m) {
  OrderedJson j = OrderedJson::object();
  j["stage"] = m.stage;
  j["params"] = OrderedJson::parse(m.params.dump());
  j["input_count"] = m.input_count;
  j["output_count"] = m.output_count;
  j["removed_count"] = m.removed_count;
  j["input_digest"] = m.input_digest;
  j["output_digest"] = m.output_digest;
  j["seed"] = m.seed ? OrderedJson(*m.seed) : OrderedJson(nullptr);
  j["duration_s"] = m.duration_s;
  j["details"] = OrderedJson::parse(m.details.dump());
  return j;
}

StageManifest manifest_from_json(const Json& j) {
  try {
    StageManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.params = j.value("params", Json::object());
    m.input_count = j.at("input_count").get<std::size_t>();
    m.output_count = j.at("output_count").get<std::size_t>();
    m.removed_count = j.at("removed_count").get<std::size_t>();
    m.input_digest = j.at("input_digest").get<std::string>();
    m.output_digest = j.at("output_digest").get<std::string>();
    if (auto it = j.find("seed"); it != j.end() && !it->is_null()) m.seed = it->get<std::uint64_t>();
    m.duration_s = j.value("duration_s", 0.0);
    m.details = j.value("details", Json::object());
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& output, const StageManifest& m) {
  atomic_write(manifest_path_for(output), manifest_to_json(m).dump(2) + "\n");
}

std::optional<StageManifest> read_manifest(const std::filesystem::path& output) {
  const auto path = manifest_path_for(output);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return manifest_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw ParseError("malformed manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace curate
