#pragma once

// UTF-8 codepoint iteration and NFC normalization (ICU backed).

#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "diacritize/error.hpp"

namespace diacritize::unicode {

using Codepoint = char32_t;

inline constexpr Codepoint kReplacementChar = U'�';

/// Decodes UTF-8 into scalar values. Throws InputError on ill-formed input.
inline std::vector<Codepoint> decode(std::string_view text) {
  std::vector<Codepoint> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) {
      throw InputError("ill-formed UTF-8 at byte " + std::to_string(at));
    }
    out.push_back(static_cast<Codepoint>(c));
  }
  return out;
}

inline void append(std::string& out, Codepoint cp) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(cp));
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::string encode(const std::vector<Codepoint>& cps) {
  std::string out;
  out.reserve(cps.size() * 2);
  for (Codepoint cp : cps) append(out, cp);
  return out;
}

inline std::string encode(Codepoint cp) {
  std::string out;
  append(out, cp);
  return out;
}

inline bool is_valid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

/// Canonical composition (NFC). Input must be well-formed UTF-8.
inline std::string nfc(std::string_view text) {
  if (!is_valid_utf8(text)) throw InputError("ill-formed UTF-8 input to NFC");
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC instance unavailable");
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (norm->isNormalized(src, status) && U_SUCCESS(status)) return std::string(text);
  status = U_ZERO_ERROR;
  const icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

/// Number of scalar values in well-formed UTF-8.
inline std::size_t length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0u) != 0x80u) ++n;
  }
  return n;
}

}  // namespace diacritize::unicode
