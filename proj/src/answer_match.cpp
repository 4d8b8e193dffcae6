#include "curate/answer_match.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <regex>

namespace curate {
namespace {

constexpr std::string_view k_unicode_minus = "\xE2\x88\x92";  // U+2212

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool strip_wrapper(std::string& s, std::string_view open, std::string_view close) {
  if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
    s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
    return true;
  }
  return false;
}

std::optional<double> parse_plain(const std::string& s) {
  static const std::regex number(R"(^[+-]?(\d+(\.\d*)?|\.\d+)$)");
  if (!std::regex_match(s, number)) return std::nullopt;
  return std::stod(s);
}

std::optional<double> parse_ratio(const std::string& s) {
  static const std::regex frac(R"(^([+-]?)\\frac\{([^{}]+)\}\{([^{}]+)\}$)");
  static const std::regex slash(R"(^([+-]?[0-9.]+)/([+-]?[0-9.]+)$)");
  std::smatch m;
  if (std::regex_match(s, m, frac)) {
    auto num = parse_plain(m[2].str());
    auto den = parse_plain(m[3].str());
    if (!num || !den || *den == 0) return std::nullopt;
    return (m[1].str() == "-" ? -1.0 : 1.0) * *num / *den;
  }
  if (std::regex_match(s, m, slash)) {
    auto num = parse_plain(m[1].str());
    auto den = parse_plain(m[2].str());
    if (!num || !den || *den == 0) return std::nullopt;
    return *num / *den;
  }
  return parse_plain(s);
}

bool numbers_close(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= rel_tol * std::max(std::fabs(a), std::fabs(b));
}

bool atoms_equivalent(std::string_view a, std::string_view b, double rel_tol) {
  const std::string na = normalize_answer(a);
  const std::string nb = normalize_answer(b);
  if (na.empty() || nb.empty()) return false;
  if (na == nb) return true;
  const auto va = numeric_values(a);
  const auto vb = numeric_values(b);
  for (double x : va) {
    for (double y : vb) {
      if (numbers_close(x, y, rel_tol)) return true;
    }
  }
  return false;
}

/// Perfect matching between two part lists by backtracking; lists are short.
bool parts_match(const std::vector<std::string>& a, const std::vector<std::string>& b,
                 double rel_tol) {
  if (a.size() != b.size()) return false;
  std::vector<bool> used(b.size(), false);
  std::function<bool(std::size_t)> assign = [&](std::size_t i) {
    if (i == a.size()) return true;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j] || !atoms_equivalent(a[i], b[j], rel_tol)) continue;
      used[j] = true;
      if (assign(i + 1)) return true;
      used[j] = false;
    }
    return false;
  };
  return assign(0);
}

}  // namespace

std::optional<std::string> last_boxed(std::string_view text) {
  const std::string_view marker = "\\boxed";
  for (auto pos = text.rfind(marker); pos != std::string_view::npos;
       pos = pos == 0 ? std::string_view::npos : text.rfind(marker, pos - 1)) {
    std::size_t i = pos + marker.size();
    while (i < text.size() && text[i] == ' ') ++i;
    if (i >= text.size() || text[i] != '{') continue;
    int depth = 0;
    for (std::size_t j = i; j < text.size(); ++j) {
      if (text[j] == '{') {
        ++depth;
      } else if (text[j] == '}') {
        if (--depth == 0) return std::string(text.substr(i + 1, j - i - 1));
      }
    }
    // Unbalanced: try an earlier box.
  }
  return std::nullopt;
}

std::optional<std::string> extract_final_answer(std::string_view response) {
  if (auto boxed = last_boxed(response)) return trim(*boxed);

  const std::string_view open = "<answer>";
  const std::string_view close = "</answer>";
  if (auto e = response.rfind(close); e != std::string_view::npos) {
    if (auto b = response.rfind(open, e); b != std::string_view::npos) {
      return trim(response.substr(b + open.size(), e - b - open.size()));
    }
  }

  const std::string text = replace_all(std::string(response), k_unicode_minus, "-");
  static const std::regex number(R"(-?(\d+(\.\d+)?|\.\d+)(/\d+)?%?)");
  static const std::regex list_gap(R"(^\s*,\s*$)");
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number);
       it != std::sregex_iterator(); ++it) {
    spans.emplace_back(static_cast<std::size_t>(it->position()), static_cast<std::size_t>(it->length()));
  }
  if (spans.empty()) return std::nullopt;

  std::size_t first = spans.size() - 1;
  while (first > 0) {
    const auto& prev = spans[first - 1];
    const std::size_t gap_begin = prev.first + prev.second;
    const std::string gap = text.substr(gap_begin, spans[first].first - gap_begin);
    if (!std::regex_match(gap, list_gap)) break;
    --first;
  }
  std::string out;
  for (std::size_t i = first; i < spans.size(); ++i) {
    if (!out.empty()) out += ", ";
    out += text.substr(spans[i].first, spans[i].second);
  }
  return out;
}

std::string normalize_answer(std::string_view answer) {
  std::string s = replace_all(std::string(answer), k_unicode_minus, "-");
  s = trim(s);
  while (strip_wrapper(s, "$$", "$$") || strip_wrapper(s, "$", "$") ||
         strip_wrapper(s, "\\(", "\\)") || strip_wrapper(s, "\\[", "\\]")) {
  }
  for (std::string_view cmd : {"\\left", "\\right", "\\!", "\\,", "\\;","\\:", "\\ "}) {
    s = replace_all(s, cmd, "");
  }
  s = replace_all(s, "\\dfrac", "\\frac");
  s = replace_all(s, "\\tfrac", "\\frac");
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  while (!s.empty() && s.back() == '.') s.pop_back();
  if (s.size() > 2 && std::isalpha(static_cast<unsigned char>(s[0])) && s[1] == '=') {
    s = s.substr(2);
  }
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<double> numeric_values(std::string_view answer) {
  std::string s = normalize_answer(answer);
  bool percent = false;
  if (s.ends_with("\\%")) {
    s.resize(s.size() - 2);
    percent = true;
  } else if (s.ends_with("%")) {
    s.pop_back();
    percent = true;
  }
  auto v = parse_ratio(s);
  if (!v) return {};
  if (percent) return {*v / 100.0, *v};
  return {*v};
}

std::vector<std::string> split_top_level_commas(std::string_view s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      depth = std::max(0, depth - 1);
    } else if (c == ',' && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  return parts;
}

bool answers_equivalent(std::string_view a, std::string_view b, double rel_tol) {
  if (atoms_equivalent(a, b, rel_tol)) return true;
  const auto pa = split_top_level_commas(a);
  const auto pb = split_top_level_commas(b);
  if (pa.size() < 2 && pb.size() < 2) return false;
  return parts_match(pa, pb, rel_tol);
}

bool match_answer(std::string_view predicted, std::string_view gold, double rel_tol) {
  if (trim(gold).empty()) return false;
  const auto extracted = extract_final_answer(predicted);
  if (!extracted) return false;
  return answers_equivalent(*extracted, gold, rel_tol);
}

}  // namespace curate
