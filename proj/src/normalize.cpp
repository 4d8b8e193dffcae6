#include "curate/normalize.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "curate/error.hpp"

namespace curate {
namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

bool is_kept_symbol(UChar32 c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '=': case '^':
    case '(': case ')': case '{': case '}': case '\\': case '.':
    case ',': case '%':
      return true;
    default:
      return false;
  }
}

bool is_kept(UChar32 c) {
  if (is_kept_symbol(c)) return true;
  const auto cat = U_GET_GC_MASK(c);
  return (cat & (U_GC_L_MASK | U_GC_N_MASK)) != 0;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  const auto& norm = nfc();
  UErrorCode status = U_ZERO_ERROR;

  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  icu::UnicodeString composed = norm.normalize(text, status);
  if (U_FAILURE(status)) return {};
  composed.toLower(icu::Locale::getRoot());

  icu::UnicodeString filtered;
  bool pending_space = false;
  for (int32_t i = 0; i < composed.length();) {
    const UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !filtered.isEmpty();
      continue;
    }
    if (!is_kept(c)) continue;
    if (pending_space) {
      filtered.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    filtered.append(c);
  }

  // Dropping characters can leave newly adjacent composable letters (Hangul
  // jamo), so compose once more to reach the fixed point.
  icu::UnicodeString result = norm.normalize(filtered, status);
  if (U_FAILURE(status)) return {};
  std::string out;
  result.toUTF8String(out);
  return out;
}

std::vector<std::string_view> split_tokens(std::string_view normalized) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < normalized.size()) {
    std::size_t end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) out.push_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace curate
