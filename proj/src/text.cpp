#include "chembed/text.hpp"

#include <cctype>
#include <unordered_map>

namespace chembed {

std::vector<std::string> utf8_codepoints(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    if (i + len > text.size()) len = 1;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

std::uint32_t decode_cp(const std::string& unit) {
  const unsigned char* b = reinterpret_cast<const unsigned char*>(unit.data());
  switch (unit.size()) {
    case 1: return b[0];
    case 2: return ((b[0] & 0x1Fu) << 6) | (b[1] & 0x3Fu);
    case 3: return ((b[0] & 0x0Fu) << 12) | ((b[1] & 0x3Fu) << 6) | (b[2] & 0x3Fu);
    case 4:
      return ((b[0] & 0x07u) << 18) | ((b[1] & 0x3Fu) << 12) |
             ((b[2] & 0x3Fu) << 6) | (b[3] & 0x3Fu);
    default: return b[0];
  }
}

// Accent folding for Latin-1 Supplement and Latin Extended-A. Returns the
// base ASCII letter(s), or empty when the codepoint has no mapping.
const char* accent_fold(std::uint32_t cp) {
  static const std::unordered_map<std::uint32_t, const char*> kMap = {
      {0xC0, "a"}, {0xC1, "a"}, {0xC2, "a"}, {0xC3, "a"}, {0xC4, "a"}, {0xC5, "a"},
      {0xC7, "c"}, {0xC8, "e"}, {0xC9, "e"}, {0xCA, "e"}, {0xCB, "e"},
      {0xCC, "i"}, {0xCD, "i"}, {0xCE, "i"}, {0xCF, "i"}, {0xD1, "n"},
      {0xD2, "o"}, {0xD3, "o"}, {0xD4, "o"}, {0xD5, "o"}, {0xD6, "o"},
      {0xD9, "u"}, {0xDA, "u"}, {0xDB, "u"}, {0xDC, "u"}, {0xDD, "y"},
      {0xE0, "a"}, {0xE1, "a"}, {0xE2, "a"}, {0xE3, "a"}, {0xE4, "a"}, {0xE5, "a"},
      {0xE7, "c"}, {0xE8, "e"}, {0xE9, "e"}, {0xEA, "e"}, {0xEB, "e"},
      {0xEC, "i"}, {0xED, "i"}, {0xEE, "i"}, {0xEF, "i"}, {0xF1, "n"},
      {0xF2, "o"}, {0xF3, "o"}, {0xF4, "o"}, {0xF5, "o"}, {0xF6, "o"},
      {0xF9, "u"}, {0xFA, "u"}, {0xFB, "u"}, {0xFC, "u"}, {0xFD, "y"}, {0xFF, "y"},
      {0x101, "a"}, {0x103, "a"}, {0x105, "a"}, {0x107, "c"}, {0x109, "c"},
      {0x10B, "c"}, {0x10D, "c"}, {0x10F, "d"}, {0x111, "d"}, {0x113, "e"},
      {0x115, "e"}, {0x117, "e"}, {0x119, "e"}, {0x11B, "e"}, {0x11D, "g"},
      {0x11F, "g"}, {0x121, "g"}, {0x123, "g"}, {0x125, "h"}, {0x127, "h"},
      {0x129, "i"}, {0x12B, "i"}, {0x12D, "i"}, {0x12F, "i"}, {0x131, "i"},
      {0x135, "j"}, {0x137, "k"}, {0x13A, "l"}, {0x13C, "l"}, {0x13E, "l"},
      {0x142, "l"}, {0x144, "n"}, {0x146, "n"}, {0x148, "n"}, {0x14D, "o"},
      {0x14F, "o"}, {0x151, "o"}, {0x155, "r"}, {0x157, "r"}, {0x159, "r"},
      {0x15B, "s"}, {0x15D, "s"}, {0x15F, "s"}, {0x161, "s"}, {0x163, "t"},
      {0x165, "t"}, {0x167, "t"}, {0x169, "u"}, {0x16B, "u"}, {0x16D, "u"},
      {0x16F, "u"}, {0x171, "u"}, {0x173, "u"}, {0x175, "w"}, {0x177, "y"},
      {0x17A, "z"}, {0x17C, "z"}, {0x17E, "z"},
  };
  auto it = kMap.find(cp);
  return it == kMap.end() ? nullptr : it->second;
}

}  // namespace

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const auto& unit : utf8_codepoints(text)) {
    const std::uint32_t cp = decode_cp(unit);
    if (cp < 0x80) {
      out.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(unit[0]))));
      continue;
    }
    // Combining marks (NFD residue) are dropped.
    if (cp >= 0x300 && cp <= 0x36F) continue;
    if (const char* folded = accent_fold(cp)) {
      // Uppercase accented letters fold to lowercase base letters too.
      out += folded;
      continue;
    }
    const std::uint32_t upper_offset =
        (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) ? 0x20 : 0;
    if (upper_offset != 0) {
      // Latin-1 uppercase without a fold entry: shift to lowercase form.
      out += static_cast<char>(0xC3);
      out += static_cast<char>(0x80 + (cp + upper_offset - 0xC0));
      continue;
    }
    out += unit;
  }
  return out;
}

std::vector<std::string> whitespace_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

std::string to_lower_ascii(const std::string& text) {
  std::string out = text;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace chembed
