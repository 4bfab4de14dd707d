#pragma once

#include <cstdint>
#include <string_view>

namespace dimabsa {

/// Number of Unicode codepoints in a UTF-8 string (continuation bytes are
/// skipped; malformed bytes each count as one codepoint).
inline size_t codepoint_count(std::string_view s) {
  size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

/// Decodes the codepoint starting at byte offset i and advances i past it.
/// Malformed sequences decode as U+FFFD one byte at a time.
inline uint32_t next_codepoint(std::string_view s, size_t& i) {
  const unsigned char c0 = static_cast<unsigned char>(s[i]);
  size_t len = 1;
  uint32_t cp = 0xFFFD;
  if (c0 < 0x80) {
    cp = c0;
  } else if ((c0 & 0xE0) == 0xC0) {
    len = 2;
    cp = c0 & 0x1F;
  } else if ((c0 & 0xF0) == 0xE0) {
    len = 3;
    cp = c0 & 0x0F;
  } else if ((c0 & 0xF8) == 0xF0) {
    len = 4;
    cp = c0 & 0x07;
  } else {
    ++i;
    return cp;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (size_t k = 1; k < len; ++k) {
    const unsigned char ck = static_cast<unsigned char>(s[i + k]);
    if ((ck & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (ck & 0x3F);
  }
  i += len;
  return cp;
}

}  // namespace dimabsa
