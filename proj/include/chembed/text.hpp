#pragma once

#include <string>
#include <vector>

namespace chembed {

// Splits a UTF-8 string into codepoint substrings. Invalid bytes are kept
// as single-byte units.
std::vector<std::string> utf8_codepoints(const std::string& text);

// Uncased-BERT style normalization: lowercase, fold common Latin accented
// letters to their base letter, drop combining marks.
std::string normalize_text(const std::string& text);

// Whitespace word splitting (space, tab, newline, carriage return).
std::vector<std::string> whitespace_words(const std::string& text);

std::string to_lower_ascii(const std::string& text);

}  // namespace chembed
