#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gazefit::text {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at a time.
std::vector<char32_t> decode_utf8(std::string_view s);

// Splits a UTF-8 string into one std::string per code point.
std::vector<std::string> split_chars(std::string_view s);

void append_utf8(std::string& out, char32_t cp);

std::size_t char_count(std::string_view s);

bool is_punctuation(char32_t cp);
bool is_decimal_digit(char32_t cp);

// True if any code point is Unicode punctuation (P*) or a decimal digit (Nd).
bool has_punct_or_digit(std::string_view s);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// Splits on a single delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

std::string_view trim(std::string_view s);

}  // namespace gazefit::text
