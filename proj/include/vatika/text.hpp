#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vatika {

// --- UTF-8 ---------------------------------------------------------------

// Decodes UTF-8 into codepoints. Malformed byte sequences decode to U+FFFD
// (one replacement per offending byte) instead of throwing; file-level UTF-8
// validity is enforced by the JSON layer at ingest time.
std::vector<uint32_t> utf8_decode(std::string_view s);
std::string utf8_encode(const std::vector<uint32_t>& cps);

bool is_unicode_whitespace(uint32_t cp);
bool is_ascii_punct(uint32_t cp);
bool is_devanagari(uint32_t cp);

constexpr uint32_t kDanda = 0x0964;
constexpr uint32_t kDoubleDanda = 0x0965;

// --- Normalization -------------------------------------------------------

// Canonical (NFC) normalization targeted at the scripts this toolkit
// processes: the 11 precomposed Devanagari nukta letters are canonically
// decomposed (they are composition exclusions, so NFC keeps them decomposed)
// and combining marks are put in canonical order. Codepoints outside the
// Devanagari block pass through unchanged; ASCII is NFC-stable by definition.
std::string nfc_normalize(std::string_view s);

// --- Word splitting ------------------------------------------------------

// Trims and splits on Unicode whitespace. Punctuation is kept attached; this
// is the word-length rule used for dataset statistics.
std::vector<std::string> whitespace_words(std::string_view s);

// Returns s with leading/trailing Unicode whitespace removed.
std::string trim(std::string_view s);

}  // namespace vatika
