#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace curate {

namespace prompts {
// Compiled in from prompts/*.txt.
extern const std::string_view k_domain_classification;
extern const std::string_view k_problem_validation;
extern const std::string_view k_answer_extraction;
extern const std::string_view k_difficulty_scoring;
extern const std::string_view k_solver;
extern const std::string_view k_verifier;
}  // namespace prompts

/// Prompt templates for every model role. Placeholders: `{instruction}`,
/// `{output_tail}`, `{reference}`.
struct PromptSet {
  std::string domain_classification;
  std::string problem_validation;
  std::string answer_extraction;
  std::string difficulty_scoring;
  std::string solver;
  std::string verifier;

  static PromptSet defaults();
  /// Defaults, with any `<name>.txt` found in `dir` taking precedence.
  static PromptSet load(const std::filesystem::path& dir);
};

/// Substitutes `{name}` placeholders in one left-to-right pass; substituted
/// text is never rescanned and unknown `{...}` groups are left as is.
std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace curate
