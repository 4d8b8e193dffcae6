#include "curate/prompts.hpp"

#include "curate/corpus.hpp"

namespace curate {

PromptSet PromptSet::defaults() {
  return PromptSet{std::string(prompts::k_domain_classification),
                   std::string(prompts::k_problem_validation),
                   std::string(prompts::k_answer_extraction),
                   std::string(prompts::k_difficulty_scoring),
                   std::string(prompts::k_solver),
                   std::string(prompts::k_verifier)};
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  PromptSet set = defaults();
  auto override_from = [&](const char* name, std::string& slot) {
    const auto path = dir / (std::string(name) + ".txt");
    if (std::filesystem::exists(path)) slot = read_file(path);
  };
  override_from("domain_classification", set.domain_classification);
  override_from("problem_validation", set.problem_validation);
  override_from("answer_extraction", set.answer_extraction);
  override_from("difficulty_scoring", set.difficulty_scoring);
  override_from("solver", set.solver);
  override_from("verifier", set.verifier);
  return set;
}

std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace curate
