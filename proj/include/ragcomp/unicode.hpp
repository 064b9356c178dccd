#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ragcomp {

// Minimal UTF-8 handling. Invalid bytes are passed through as single
// code points with their byte value (latin-1 fallback) so that malformed
// input degrades without throwing.
std::vector<uint32_t> utf8_decode(std::string_view text);
std::string utf8_encode(const std::vector<uint32_t>& codepoints);

// Append one code point to a UTF-8 string.
void utf8_append(std::string& out, uint32_t cp);

// Byte offset of the code point at `cp_offset` (clamped to text size).
// SQuAD answer offsets are code-point offsets, not byte offsets.
size_t utf8_byte_offset(std::string_view text, size_t cp_offset);

// Lowercase mapping for ASCII, Latin-1 and Latin Extended-A; other scripts
// pass through unchanged.
uint32_t lower_codepoint(uint32_t cp);

}  // namespace ragcomp
