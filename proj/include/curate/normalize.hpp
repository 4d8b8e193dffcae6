#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace curate {

/// Canonical form used for dedup and decontamination.
///
/// NFC, lowercase, whitespace runs collapsed to one space, ends trimmed, and
/// every character dropped unless it is a letter, a digit, or one of
/// `+ - * / = ^ ( ) { } \ . , %`. Total and idempotent. Invalid UTF-8 bytes
/// are replaced with U+FFFD before normalizing (and then dropped).
std::string normalize_text(std::string_view raw);

/// Splits already-normalized text on single spaces.
std::vector<std::string_view> split_tokens(std::string_view normalized);

/// Whitespace-delimited token count of arbitrary text.
std::size_t whitespace_token_count(std::string_view text);

/// Trims ASCII whitespace at both ends and collapses inner whitespace runs to
/// one space. Does not touch anything else.
std::string collapse_whitespace(std::string_view text);

}  // namespace curate
