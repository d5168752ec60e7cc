#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codemix::utf8 {

/// Byte offset of the first invalid sequence, or nullopt if `text` is valid
/// UTF-8 (overlongs, surrogates and code points above U+10FFFF are invalid).
std::optional<std::size_t> find_invalid(std::string_view text);

/// Throws Error(InvalidUtf8, offset + base_offset) on the first bad byte.
void require_valid(std::string_view text, std::size_t base_offset = 0);

/// Decodes valid UTF-8 into code points. Behavior on invalid input is
/// unspecified; validate first.
std::vector<char32_t> decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(char32_t cp);

/// Length in bytes of the sequence starting with lead byte `lead`.
std::size_t sequence_length(unsigned char lead);

/// Splits valid UTF-8 into one string per code point.
std::vector<std::string> split_chars(std::string_view text);

/// Number of code points in valid UTF-8.
std::size_t length(std::string_view text);

/// Simple case folding for the scripts that carry case (Latin, Greek,
/// Cyrillic, Armenian, fullwidth Latin). Brahmic scripts are caseless and pass
/// through unchanged. Idempotent.
char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view text);

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

/// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view text);

}  // namespace codemix::utf8
