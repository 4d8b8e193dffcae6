#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curate/record.hpp"

namespace curate {

struct EfficiencyRecord {
  std::string dataset_name;
  double size = 0;  // samples
  double s_base = 0;
  double s_sft = 0;
  double efficiency = 0;  // benchmark points per 1000 samples
};

/// (s_sft - s_base) / size * 1000. Throws PreconditionError if size <= 0.
EfficiencyRecord data_efficiency(std::string name, double size, double s_base, double s_sft);

/// "817", "105,000", "719k", "1.2M" -> sample count.
double parse_size(std::string_view text);

/// Rows of (name, size, s_base, s_sft); a header row is skipped when its
/// size column does not parse. Quoted fields are supported.
std::vector<EfficiencyRecord> read_efficiency_csv(const std::filesystem::path& path);

OrderedJson efficiency_to_json(const EfficiencyRecord& e);

enum class TokenizerMode { whitespace, characters };
TokenizerMode tokenizer_mode_from_name(std::string_view name);

std::size_t token_count(const Record& rec, TokenizerMode mode);

struct Histogram {
  std::vector<double> edges;         // bins are [e_i, e_{i+1}); the last is closed
  std::vector<std::size_t> counts;   // edges.size() - 1 entries
  std::size_t below = 0;
  std::size_t above = 0;
};

struct LengthSummary {
  std::size_t count = 0;
  double min = 0, p25 = 0, median = 0, p75 = 0, p95 = 0, max = 0, mean = 0;
  Histogram histogram;
};

/// Linear-interpolation quantile of sorted data (q in [0,1]).
double quantile_sorted(const std::vector<double>& sorted, double q);

LengthSummary summarize_lengths(std::vector<double> lengths, const std::vector<double>& bin_edges = {});
LengthSummary length_stats(const std::vector<Record>& records, TokenizerMode mode,
                           const std::vector<double>& bin_edges = {});
OrderedJson length_summary_to_json(const LengthSummary& s);

enum class Axis { domain, difficulty, source };
Axis axis_from_name(std::string_view name);

struct Share {
  std::size_t count = 0;
  double fraction = 0;
};

/// Label -> share; records lacking the annotation count under "unlabeled".
std::map<std::string, Share> distribution_report(const std::vector<Record>& records, Axis axis);
OrderedJson distribution_to_json(const std::map<std::string, Share>& report);

struct AggregateOutcome {
  std::vector<Record> records;  // input order; only eligible ones carry scores["aggregate"]
  std::size_t excluded = 0;     // records missing a weighted metric
};

/// Min-max normalizes each weighted metric over the eligible records (a
/// constant metric maps to 0.5), then takes the weighted mean with weights
/// rescaled to sum 1. Throws PreconditionError on empty or non-positive
/// total weight, or a negative weight.
AggregateOutcome aggregate_scores(std::vector<Record> records,
                                  const std::map<std::string, double>& weights);

}  // namespace curate
