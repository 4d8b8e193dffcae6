#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curate {

/// Inner text of the last `\boxed{...}` (brace-balanced), if any.
std::optional<std::string> last_boxed(std::string_view text);

/// Final answer of a free-form model response: last `\boxed{}` content,
/// else the last `<answer>` tag, else the trailing comma-separated run of
/// number-like tokens.
std::optional<std::string> extract_final_answer(std::string_view response);

/// Comparison form: unicode minus folded, math delimiters and spacing
/// commands removed, `\dfrac`/`\tfrac` folded to `\frac`, a leading
/// single-letter `x=` dropped, whitespace removed, lowercased.
std::string normalize_answer(std::string_view answer);

/// Numeric readings of an answer: integers, decimals, `a/b`, `\frac{a}{b}`
/// and percentages (read both as x/100 and as x). Empty if not numeric.
std::vector<double> numeric_values(std::string_view answer);

/// Splits on commas that are not nested in (), [] or {}.
std::vector<std::string> split_top_level_commas(std::string_view s);

/// Equivalence of two extracted answers: normalized string equality, or
/// numeric equality within relative tolerance, or (for comma lists) a
/// one-to-one pairing of parts under the same rules.
bool answers_equivalent(std::string_view a, std::string_view b, double rel_tol = 1e-9);

/// Whether a model response's final answer matches the gold answer.
bool match_answer(std::string_view predicted, std::string_view gold, double rel_tol = 1e-9);

}  // namespace curate
