#include "vatika/text.hpp"

#include <algorithm>

namespace vatika {

std::vector<uint32_t> utf8_decode(std::string_view s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  const auto byte = [&](size_t k) { return uint8_t(s[k]); };
  while (i < s.size()) {
    const uint8_t b0 = byte(i);
    uint32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      if ((byte(i + k) & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
    // Reject overlong encodings and surrogate/out-of-range values.
    if (ok) {
      if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
          cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ok = false;
      }
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(char(cp));
    } else if (cp < 0x800) {
      out.push_back(char(0xC0 | (cp >> 6)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(char(0xE0 | (cp >> 12)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(char(0xF0 | (cp >> 18)));
      out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(char(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

bool is_unicode_whitespace(uint32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(uint32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
         (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
}

bool is_devanagari(uint32_t cp) { return cp >= 0x0900 && cp <= 0x097F; }

namespace {

// Canonical combining class for the marks this normalizer reorders.
int combining_class(uint32_t cp) {
  switch (cp) {
    case 0x093C:
      return 7;  // nukta
    case 0x094D:
      return 9;  // virama
    case 0x0952:
      return 220;  // anudatta
    case 0x0951:
    case 0x0953:
    case 0x0954:
      return 230;  // udatta / grave / acute
    default:
      return 0;
  }
}

// The Devanagari block's canonical decompositions (UnicodeData): precomposed
// nukta letters. All are composition exclusions, so NFC keeps the decomposed
// form.
bool nukta_decomposition(uint32_t cp, uint32_t& base) {
  switch (cp) {
    case 0x0929: base = 0x0928; return true;
    case 0x0931: base = 0x0930; return true;
    case 0x0934: base = 0x0933; return true;
    case 0x0958: base = 0x0915; return true;
    case 0x0959: base = 0x0916; return true;
    case 0x095A: base = 0x0917; return true;
    case 0x095B: base = 0x091C; return true;
    case 0x095C: base = 0x0921; return true;
    case 0x095D: base = 0x0922; return true;
    case 0x095E: base = 0x092B; return true;
    case 0x095F: base = 0x092F; return true;
    default:
      return false;
  }
}

}  // namespace

std::string nfc_normalize(std::string_view s) {
  std::vector<uint32_t> cps = utf8_decode(s);

  std::vector<uint32_t> decomposed;
  decomposed.reserve(cps.size() + 4);
  for (uint32_t cp : cps) {
    uint32_t base;
    if (nukta_decomposition(cp, base)) {
      decomposed.push_back(base);
      decomposed.push_back(0x093C);
    } else {
      decomposed.push_back(cp);
    }
  }

  // Canonical ordering: stable-sort maximal runs of nonzero-ccc marks.
  size_t i = 0;
  while (i < decomposed.size()) {
    if (combining_class(decomposed[i]) == 0) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < decomposed.size() && combining_class(decomposed[j]) != 0) ++j;
    std::stable_sort(decomposed.begin() + i, decomposed.begin() + j,
                     [](uint32_t a, uint32_t b) { return combining_class(a) < combining_class(b); });
    i = j;
  }

  return utf8_encode(decomposed);
}

std::vector<std::string> whitespace_words(std::string_view s) {
  std::vector<std::string> words;
  std::vector<uint32_t> current;
  for (uint32_t cp : utf8_decode(s)) {
    if (is_unicode_whitespace(cp)) {
      if (!current.empty()) {
        words.push_back(utf8_encode(current));
        current.clear();
      }
    } else {
      current.push_back(cp);
    }
  }
  if (!current.empty()) words.push_back(utf8_encode(current));
  return words;
}

std::string trim(std::string_view s) {
  std::vector<uint32_t> cps = utf8_decode(s);
  size_t b = 0, e = cps.size();
  while (b < e && is_unicode_whitespace(cps[b])) ++b;
  while (e > b && is_unicode_whitespace(cps[e - 1])) --e;
  return utf8_encode(std::vector<uint32_t>(cps.begin() + b, cps.begin() + e));
}

}  // namespace vatika
