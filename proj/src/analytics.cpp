#include "curate/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "curate/error.hpp"
#include "curate/normalize.hpp"

namespace curate {

EfficiencyRecord data_efficiency(std::string name, double size, double s_base, double s_sft) {
  if (!(size > 0)) throw PreconditionError("dataset size must be positive for " + name);
  EfficiencyRecord e;
  e.dataset_name = std::move(name);
  e.size = size;
  e.s_base = s_base;
  e.s_sft = s_sft;
  e.efficiency = (s_sft - s_base) / size * 1000.0;
  return e;
}

double parse_size(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c != ',' && c != '_' && !std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  if (s.empty()) throw ParseError("empty size");
  double scale = 1;
  switch (std::tolower(static_cast<unsigned char>(s.back()))) {
    case 'k': scale = 1e3; s.pop_back(); break;
    case 'm': scale = 1e6; s.pop_back(); break;
    case 'b': scale = 1e9; s.pop_back(); break;
    default: break;
  }
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("bad size '" + std::string(text) + "'");
  }
  if (used != s.size()) throw ParseError("bad size '" + std::string(text) + "'");
  return v * scale;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote in CSV line: " + line);
  return fields;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  const std::string t = collapse_whitespace(s);
  double v = std::stod(t, &used);
  if (used != t.size()) throw ParseError("bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<EfficiencyRecord> read_efficiency_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<EfficiencyRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (collapse_whitespace(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    }
    double size = 0;
    try {
      size = parse_size(f[1]);
    } catch (const ParseError&) {
      if (out.empty() && line_no == 1) continue;  // header
      throw;
    }
    try {
      out.push_back(data_efficiency(collapse_whitespace(f[0]), size, parse_number(f[2]),
                                    parse_number(f[3])));
    } catch (const std::invalid_argument&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad score");
    }
  }
  return out;
}

OrderedJson efficiency_to_json(const EfficiencyRecord& e) {
  OrderedJson j;
  j["dataset"] = e.dataset_name;
  j["size"] = e.size;
  j["s_base"] = e.s_base;
  j["s_sft"] = e.s_sft;
  j["efficiency"] = e.efficiency;
  j["efficiency_display"] = std::round(e.efficiency * 1000.0) / 1000.0;
  return j;
}

TokenizerMode tokenizer_mode_from_name(std::string_view name) {
  if (name == "whitespace") return TokenizerMode::whitespace;
  if (name == "characters") return TokenizerMode::characters;
  throw ParseError("unknown tokenizer mode '" + std::string(name) + "'");
}

std::size_t token_count(const Record& rec, TokenizerMode mode) {
  const std::string text = rec.question + " " + rec.solution.value_or("");
  if (mode == TokenizerMode::whitespace) return whitespace_token_count(text);
  // Code points, not bytes.
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  const double h = (static_cast<double>(sorted.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

LengthSummary summarize_lengths(std::vector<double> lengths, const std::vector<double>& bin_edges) {
  LengthSummary s;
  std::sort(lengths.begin(), lengths.end());
  s.count = lengths.size();
  if (!lengths.empty()) {
    s.min = lengths.front();
    s.max = lengths.back();
    s.p25 = quantile_sorted(lengths, 0.25);
    s.median = quantile_sorted(lengths, 0.5);
    s.p75 = quantile_sorted(lengths, 0.75);
    s.p95 = quantile_sorted(lengths, 0.95);
    s.mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(s.count);
  }
  if (bin_edges.size() >= 2) {
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end())) {
      throw PreconditionError("histogram edges must be ascending");
    }
    auto& h = s.histogram;
    h.edges = bin_edges;
    h.counts.assign(bin_edges.size() - 1, 0);
    for (double x : lengths) {
      if (x < bin_edges.front()) {
        ++h.below;
      } else if (x > bin_edges.back()) {
        ++h.above;
      } else {
        auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), x);
        auto bin = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
        ++h.counts[std::min(bin, h.counts.size() - 1)];
      }
    }
  }
  return s;
}

LengthSummary length_stats(const std::vector<Record>& records, TokenizerMode mode,
                           const std::vector<double>& bin_edges) {
  std::vector<double> lengths;
  lengths.reserve(records.size());
  for (const auto& r : records) lengths.push_back(static_cast<double>(token_count(r, mode)));
  return summarize_lengths(std::move(lengths), bin_edges);
}

OrderedJson length_summary_to_json(const LengthSummary& s) {
  OrderedJson j;
  j["count"] = s.count;
  j["min"] = s.min;
  j["p25"] = s.p25;
  j["median"] = s.median;
  j["p75"] = s.p75;
  j["p95"] = s.p95;
  j["max"] = s.max;
  j["mean"] = s.mean;
  if (!s.histogram.edges.empty()) {
    j["histogram"] = {{"edges", s.histogram.edges},
                      {"counts", s.histogram.counts},
                      {"below", s.histogram.below},
                      {"above", s.histogram.above}};
  }
  return j;
}

Axis axis_from_name(std::string_view name) {
  if (name == "domain") return Axis::domain;
  if (name == "difficulty") return Axis::difficulty;
  if (name == "source") return Axis::source;
  throw ParseError("unknown axis '" + std::string(name) + "'");
}

std::map<std::string, Share> distribution_report(const std::vector<Record>& records, Axis axis) {
  std::map<std::string, Share> out;
  for (const auto& r : records) {
    std::string label = "unlabeled";
    switch (axis) {
      case Axis::domain:
        if (r.domain) label = *r.domain;
        break;
      case Axis::difficulty:
        if (r.difficulty) label = std::to_string(*r.difficulty);
        break;
      case Axis::source:
        if (!r.source.empty()) label = r.source;
        break;
    }
    ++out[label].count;
  }
  for (auto& [label, share] : out) {
    share.fraction = static_cast<double>(share.count) / static_cast<double>(records.size());
  }
  return out;
}

OrderedJson distribution_to_json(const std::map<std::string, Share>& report) {
  OrderedJson j = OrderedJson::object();
  for (const auto& [label, share] : report) {
    j[label] = {{"count", share.count}, {"fraction", share.fraction}};
  }
  return j;
}

AggregateOutcome aggregate_scores(std::vector<Record> records,
                                  const std::map<std::string, double>& weights) {
  double total = 0;
  for (const auto& [metric, w] : weights) {
    if (w < 0) throw PreconditionError("negative weight for " + metric);
    total += w;
  }
  if (weights.empty() || !(total > 0)) throw PreconditionError("weights must sum to a positive value");

  AggregateOutcome out;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool complete = std::all_of(weights.begin(), weights.end(), [&](const auto& kv) {
      return records[i].scores.contains(kv.first);
    });
    if (complete) {
      eligible.push_back(i);
    } else {
      ++out.excluded;
    }
  }

  std::map<std::string, std::pair<double, double>> range;
  for (const auto& [metric, w] : weights) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i : eligible) {
      const double v = records[i].scores.at(metric);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    range[metric] = {lo, hi};
  }
  for (std::size_t i : eligible) {
    double acc = 0;
    for (const auto& [metric, w] : weights) {
      const auto [lo, hi] = range[metric];
      const double norm = hi > lo ? (records[i].scores.at(metric) - lo) / (hi - lo) : 0.5;
      acc += (w / total) * norm;
    }
    records[i].scores["aggregate"] = acc;
  }
  out.records = std::move(records);
  return out;
}

}  // namespace curate
