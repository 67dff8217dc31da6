#pragma once

// Parallel corpus construction: ingestion, diacritic stripping, splitting,
// chunking and the character-token dataset format.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <expat.h>
#include <unicode/uchar.h>

#include "diacritize/checksum.hpp"
#include "diacritize/error.hpp"
#include "diacritize/random.hpp"
#include "diacritize/unicode.hpp"

namespace diacritize {

// ---------------------------------------------------------------------------
// Diacritic set

/// Arabic combining marks removed by stripping.
///
/// The default covers tanwin, the short vowels, shadda, sukun (U+064B..U+0652)
/// and the superscript alef U+0670. The maddah/hamza marks U+0653..U+0655 are
/// an optional extension.
class DiacriticSet {
public:
  DiacriticSet() : DiacriticSet(false) {}

  explicit DiacriticSet(bool extended) {
    for (unicode::Codepoint cp = 0x064B; cp <= 0x0652; ++cp) members_.insert(cp);
    members_.insert(0x0670);
    if (extended) {
      for (unicode::Codepoint cp = 0x0653; cp <= 0x0655; ++cp) members_.insert(cp);
    }
  }

  /// Custom set; every member must be a combining mark in the Arabic block.
  explicit DiacriticSet(std::set<unicode::Codepoint> members) : members_(std::move(members)) {
    if (members_.empty()) throw InputError("diacritic set must not be empty");
    for (unicode::Codepoint cp : members_) {
      if (!is_arabic_combining_mark(cp)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
        throw InputError(std::string("not an Arabic combining mark: ") + buf);
      }
    }
  }

  bool contains(unicode::Codepoint cp) const { return members_.count(cp) != 0; }
  const std::set<unicode::Codepoint>& members() const { return members_; }
  bool extended() const { return contains(0x0653) || contains(0x0654) || contains(0x0655); }

  /// Comma-separated hex codepoints, e.g. "064B,064C,...,0670".
  std::string describe() const {
    std::string out;
    char buf[8];
    for (unicode::Codepoint cp : members_) {
      if (!out.empty()) out += ',';
      std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(cp));
      out += buf;
    }
    return out;
  }

  static bool is_arabic_combining_mark(unicode::Codepoint cp) {
    if (cp < 0x0600 || cp > 0x06FF) return false;
    const auto type = u_charType(static_cast<UChar32>(cp));
    return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK ||
           type == U_ENCLOSING_MARK;
  }

private:
  std::set<unicode::Codepoint> members_;
};

// ---------------------------------------------------------------------------
// Text helpers

inline bool is_space_codepoint(unicode::Codepoint cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
         cp == U'\f' || u_isUWhiteSpace(static_cast<UChar32>(cp));
}

/// Collapses every whitespace run to one ASCII space and trims both ends.
inline std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unicode::Codepoint cp : unicode::decode(text)) {
    if (is_space_codepoint(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    unicode::append(out, cp);
  }
  return out;
}

/// Splits on single ASCII spaces. Input is expected to be whitespace-collapsed.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(' ', start);
    const auto stop = end == std::string_view::npos ? text.size() : end;
    if (stop > start) words.emplace_back(text.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return words;
}

inline std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                              std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  return join_words(words, 0, words.size());
}

/// Ingestion normalization applied to every sentence: NFC, then whitespace collapse.
inline std::string normalize_sentence(std::string_view text) {
  return collapse_whitespace(unicode::nfc(text));
}

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

struct XmlExtractState {
  std::vector<std::string> path;      // selector split on '/'
  std::vector<std::string> stack;     // open element names
  std::size_t capture_depth = 0;      // stack depth of the matched element, 0 = none
  std::string buffer;
  std::vector<std::string> out;
  std::size_t matches = 0;

  bool matches_selector() const {
    if (path.size() > stack.size()) return false;
    return std::equal(path.rbegin(), path.rend(), stack.rbegin());
  }
};

inline void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char**) {
  auto& st = *static_cast<XmlExtractState*>(data);
  st.stack.emplace_back(name);
  if (st.capture_depth == 0 && st.matches_selector()) {
    st.capture_depth = st.stack.size();
    st.buffer.clear();
  }
}

inline void XMLCALL on_end(void* data, const XML_Char*) {
  auto& st = *static_cast<XmlExtractState*>(data);
  if (st.capture_depth != 0 && st.capture_depth == st.stack.size()) {
    ++st.matches;
    std::string text = collapse_whitespace(st.buffer);
    if (!text.empty()) st.out.push_back(std::move(text));
    st.capture_depth = 0;
  }
  st.stack.pop_back();
}

inline void XMLCALL on_text(void* data, const XML_Char* s, int len) {
  auto& st = *static_cast<XmlExtractState*>(data);
  if (st.capture_depth != 0) st.buffer.append(s, static_cast<std::size_t>(len));
}

}  // namespace detail

/// Text content of every element matching `selector`, in document order.
///
/// The selector is an element name or a '/'-separated suffix of the element
/// path ("entry/def"). Nested matches inside a matched element are folded
/// into the outer one. Fields are whitespace-collapsed; empty ones dropped.
inline std::vector<std::string> extract_sentences_xml(std::string_view document,
                                                      std::string_view selector) {
  detail::XmlExtractState st;
  st.path = [&] {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : selector) {
      if (c == '/') {
        if (!cur.empty()) parts.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
  }();
  if (st.path.empty()) throw InputError("empty element selector");

  XML_Parser parser = XML_ParserCreate("UTF-8");
  if (parser == nullptr) throw std::runtime_error("cannot create XML parser");
  XML_SetUserData(parser, &st);
  XML_SetElementHandler(parser, detail::on_start, detail::on_end);
  XML_SetCharacterDataHandler(parser, detail::on_text);
  const auto status =
      XML_Parse(parser, document.data(), static_cast<int>(document.size()), XML_TRUE);
  if (status != XML_STATUS_OK) {
    const std::string msg = XML_ErrorString(XML_GetErrorCode(parser));
    const auto offset = static_cast<std::size_t>(XML_GetCurrentByteIndex(parser));
    XML_ParserFree(parser);
    throw ParseError("malformed XML: " + msg, offset);
  }
  XML_ParserFree(parser);
  if (st.matches == 0) {
    throw InputError("no matches for selector '" + std::string(selector) + "'");
  }
  return std::move(st.out);
}

/// One sentence per line; blank lines dropped, whitespace collapsed.
inline std::vector<std::string> extract_sentences_plaintext(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line = collapse_whitespace(text.substr(start, end - start));
    if (!line.empty()) out.push_back(std::move(line));
    start = end + 1;
  }
  return out;
}

/// Reads a local file: XML when a selector is given, plaintext otherwise.
inline std::vector<std::string> extract_sentences(const std::string& path,
                                                  std::optional<std::string> selector) {
  if (!std::filesystem::exists(path)) throw InputError("input not found: " + path);
  const std::string doc = read_file(path);
  if (!unicode::is_valid_utf8(doc)) throw InputError("input is not valid UTF-8: " + path);
  if (selector) return extract_sentences_xml(doc, *selector);
  return extract_sentences_plaintext(doc);
}

// ---------------------------------------------------------------------------
// Stripping and pairing

/// Deletes every codepoint of `set`; all other codepoints kept in order.
inline std::string strip_diacritics(std::string_view text, const DiacriticSet& set) {
  std::string out;
  out.reserve(text.size());
  for (unicode::Codepoint cp : unicode::decode(text)) {
    if (!set.contains(cp)) unicode::append(out, cp);
  }
  return out;
}

inline bool has_diacritics(std::string_view text, const DiacriticSet& set) {
  const auto cps = unicode::decode(text);
  return std::any_of(cps.begin(), cps.end(), [&](auto cp) { return set.contains(cp); });
}

struct SentencePair {
  std::string src;  // undiacritized
  std::string tgt;  // diacritized
  std::size_t id = 0;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

/// The source side a diacritized sentence maps to.
inline std::string make_source(std::string_view tgt, const DiacriticSet& set) {
  return collapse_whitespace(strip_diacritics(tgt, set));
}

inline bool pair_is_consistent(const SentencePair& p, const DiacriticSet& set) {
  return make_source(p.tgt, set) == p.src && !has_diacritics(p.src, set);
}

struct PairBuildResult {
  std::vector<SentencePair> pairs;
  std::size_t dropped_empty = 0;
};

/// Normalizes each sentence and pairs it with its stripped form. Sentence ids
/// are input ordinals; sentences that strip to nothing are dropped and counted.
inline PairBuildResult build_pairs(const std::vector<std::string>& sentences,
                                   const DiacriticSet& set = DiacriticSet()) {
  PairBuildResult result;
  result.pairs.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::string tgt = normalize_sentence(sentences[i]);
    std::string src = make_source(tgt, set);
    if (src.empty()) {
      ++result.dropped_empty;
      continue;
    }
    result.pairs.push_back({std::move(src), std::move(tgt), i});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Splitting

struct CorpusSplit {
  std::vector<SentencePair> train;
  std::vector<SentencePair> valid;
  std::vector<SentencePair> test;
  uint64_t seed = 0;

  static constexpr double kTrainRatio = 0.70;
  static constexpr double kValidRatio = 0.15;
  static constexpr double kTestRatio = 0.15;
};

/// Shuffles with Rng(seed) and cuts 70/15/15 (train/valid rounded to nearest,
/// test takes the remainder).
inline CorpusSplit split_corpus(std::vector<SentencePair> pairs, uint64_t seed) {
  if (pairs.size() < 10) {
    throw InputError("need at least 10 sentence pairs to split, got " +
                     std::to_string(pairs.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span<SentencePair>(pairs));
  const std::size_t n = pairs.size();
  const std::size_t n_train = (70 * n + 50) / 100;
  const std::size_t n_valid = (15 * n + 50) / 100;

  CorpusSplit split;
  split.seed = seed;
  auto begin = std::make_move_iterator(pairs.begin());
  split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  split.valid.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                     begin + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_valid),
                    std::make_move_iterator(pairs.end()));
  return split;
}

// ---------------------------------------------------------------------------
// Chunking and character tokens

/// Words per chunk: 1..10, or the whole sentence.
class ChunkSize {
public:
  static constexpr int kMaxWords = 10;

  static ChunkSize words(int n) {
    if (n < 1 || n > kMaxWords) {
      throw InputError("chunk size must be 1..10 or 'sentence', got " + std::to_string(n));
    }
    return ChunkSize(n);
  }
  static ChunkSize sentence() { return ChunkSize(0); }

  static ChunkSize parse(std::string_view text) {
    if (text == "sentence" || text == "SENTENCE") return sentence();
    int n = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (ec != std::errc{} || p != text.data() + text.size()) {
      throw InputError("invalid chunk size '" + std::string(text) + "'");
    }
    return words(n);
  }

  bool is_sentence() const { return words_ == 0; }
  int word_count() const { return words_; }
  std::string str() const { return is_sentence() ? "sentence" : std::to_string(words_); }

  friend bool operator==(ChunkSize, ChunkSize) = default;

private:
  explicit ChunkSize(int n) : words_(n) {}
  int words_;
};

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kBoundaryToken = "_";

/// One codepoint per token; each inter-word space becomes "_".
inline Tokens tokenize_chars(std::string_view chunk) {
  Tokens out;
  const auto cps = unicode::decode(chunk);
  out.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto cp = cps[i];
    if (cp == U'_') throw InputError("chunk contains reserved boundary token '_'");
    if (cp == U' ') {
      if (i == 0 || i + 1 == cps.size() || cps[i + 1] == U' ') {
        throw InputError("chunk has leading, trailing or repeated spaces");
      }
      out.emplace_back(kBoundaryToken);
      continue;
    }
    if (is_space_codepoint(cp)) throw InputError("chunk contains non-space whitespace");
    out.push_back(unicode::encode(cp));
  }
  return out;
}

inline std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t == kBoundaryToken) {
      out += ' ';
    } else {
      out += t;
    }
  }
  return out;
}

struct ChunkOrigin {
  std::size_t sentence_id = 0;
  std::size_t chunk_index = 0;
  friend bool operator==(const ChunkOrigin&, const ChunkOrigin&) = default;
};

struct ChunkPair {
  Tokens src_tokens;
  Tokens tgt_tokens;
  ChunkSize chunk_size = ChunkSize::sentence();
  ChunkOrigin origin;

  friend bool operator==(const ChunkPair&, const ChunkPair&) = default;
};

/// Consecutive non-overlapping windows of `n` words (the last may be short).
/// Returns the window texts, or one window for SENTENCE.
inline std::vector<std::string> chunk_words(const std::vector<std::string>& words, ChunkSize n) {
  std::vector<std::string> out;
  const std::size_t step = n.is_sentence() ? std::max<std::size_t>(words.size(), 1)
                                           : static_cast<std::size_t>(n.word_count());
  for (std::size_t i = 0; i < words.size(); i += step) {
    out.push_back(join_words(words, i, std::min(words.size(), i + step)));
  }
  return out;
}

/// Chunks one pair; nullopt when the two sides disagree on word count.
inline std::optional<std::vector<ChunkPair>> chunk_pair(const SentencePair& pair, ChunkSize n) {
  const auto src_words = split_words(pair.src);
  const auto tgt_words = split_words(pair.tgt);
  if (src_words.size() != tgt_words.size()) return std::nullopt;
  const auto src_chunks = chunk_words(src_words, n);
  const auto tgt_chunks = chunk_words(tgt_words, n);
  std::vector<ChunkPair> out;
  out.reserve(src_chunks.size());
  for (std::size_t i = 0; i < src_chunks.size(); ++i) {
    out.push_back({tokenize_chars(src_chunks[i]), tokenize_chars(tgt_chunks[i]), n,
                   {pair.id, i}});
  }
  return out;
}

struct ChunkingResult {
  std::vector<ChunkPair> chunks;
  std::vector<std::size_t> skipped_ids;  // word-count mismatches
};

inline ChunkingResult chunk_pairs(const std::vector<SentencePair>& pairs, ChunkSize n,
                                  std::ostream* log = nullptr) {
  ChunkingResult result;
  for (const auto& p : pairs) {
    auto chunks = chunk_pair(p, n);
    if (!chunks) {
      result.skipped_ids.push_back(p.id);
      if (log) *log << "skipping sentence " << p.id << ": source/target word counts differ\n";
      continue;
    }
    for (auto& c : *chunks) result.chunks.push_back(std::move(c));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Line-oriented files

/// Writes UTF-8 lines, each terminated by LF.
inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  for (const auto& l : lines) {
    out.write(l.data(), static_cast<std::streamsize>(l.size()));
    out.put('\n');
  }
  if (!out) throw InputError("write failed: " + path);
}

/// Reads LF-terminated lines. CR anywhere or a missing final LF is a format error.
inline std::vector<std::string> read_lines(const std::string& path) {
  const std::string data = read_file(path);
  if (!unicode::is_valid_utf8(data)) throw FormatError(path + ": not valid UTF-8");
  std::vector<std::string> lines;
  std::size_t start = 0;
  std::size_t line_no = 1;
  while (start < data.size()) {
    const auto end = data.find('\n', start);
    if (end == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": missing final LF");
    }
    std::string line = data.substr(start, end - start);
    if (line.find('\r') != std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": CR line ending");
    }
    lines.push_back(std::move(line));
    start = end + 1;
    ++line_no;
  }
  return lines;
}

namespace detail {

inline std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline Tokens parse_token_line(const std::string& line, const std::string& where) {
  if (line.empty()) throw FormatError(where + ": empty chunk line");
  if (line.find('\t') != std::string::npos) throw FormatError(where + ": tab character");
  Tokens tokens;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(' ', start);
    const auto stop = end == std::string::npos ? line.size() : end;
    if (stop == start) throw FormatError(where + ": tokens must be separated by exactly one space");
    tokens.push_back(line.substr(start, stop - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return tokens;
}

}  // namespace detail

struct DatasetPaths {
  std::string src, tgt, ids;

  static DatasetPaths from_prefix(const std::string& prefix) {
    return {prefix + ".src", prefix + ".tgt", prefix + ".ids"};
  }
};

/// Writes `<prefix>.src`, `<prefix>.tgt` (space-separated tokens, one chunk per
/// line) and `<prefix>.ids` ("sentence_id chunk_index chunk_size").
inline void write_dataset(const std::vector<ChunkPair>& chunks, const std::string& prefix) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  std::vector<std::string> src, tgt, ids;
  src.reserve(chunks.size());
  tgt.reserve(chunks.size());
  ids.reserve(chunks.size());
  for (const auto& c : chunks) {
    src.push_back(detail::join_tokens(c.src_tokens));
    tgt.push_back(detail::join_tokens(c.tgt_tokens));
    ids.push_back(std::to_string(c.origin.sentence_id) + ' ' +
                  std::to_string(c.origin.chunk_index) + ' ' + c.chunk_size.str());
  }
  write_lines(paths.src, src);
  write_lines(paths.tgt, tgt);
  write_lines(paths.ids, ids);
}

inline std::vector<ChunkPair> read_dataset(const std::string& prefix) {
  const auto paths = DatasetPaths::from_prefix(prefix);
  const auto src = read_lines(paths.src);
  const auto tgt = read_lines(paths.tgt);
  const auto ids = read_lines(paths.ids);
  if (src.size() != tgt.size() || src.size() != ids.size()) {
    throw FormatError(prefix + ": source, target and id files are not line-aligned");
  }
  std::vector<ChunkPair> chunks;
  chunks.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::string where = prefix + " line " + std::to_string(i + 1);
    ChunkPair c;
    c.src_tokens = detail::parse_token_line(src[i], where + " (src)");
    c.tgt_tokens = detail::parse_token_line(tgt[i], where + " (tgt)");
    std::istringstream fields(ids[i]);
    std::string size_text;
    if (!(fields >> c.origin.sentence_id >> c.origin.chunk_index >> size_text)) {
      throw FormatError(where + " (ids): expected 'sentence_id chunk_index chunk_size'");
    }
    try {
      c.chunk_size = ChunkSize::parse(size_text);
    } catch (const InputError& e) {
      throw FormatError(where + " (ids): " + e.what());
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

/// Sentence-level split files: `<prefix>.sent.src` and `<prefix>.sent.tgt`.
inline void write_sentences(const std::vector<SentencePair>& pairs, const std::string& prefix) {
  std::vector<std::string> src, tgt;
  for (const auto& p : pairs) {
    src.push_back(p.src);
    tgt.push_back(p.tgt);
  }
  write_lines(prefix + ".sent.src", src);
  write_lines(prefix + ".sent.tgt", tgt);
}

/// Reads sentence-level split files; ids are line ordinals.
inline std::vector<SentencePair> read_sentences(const std::string& prefix) {
  const auto src = read_lines(prefix + ".sent.src");
  const auto tgt = read_lines(prefix + ".sent.tgt");
  if (src.size() != tgt.size()) throw FormatError(prefix + ": sentence files are not aligned");
  std::vector<SentencePair> pairs;
  pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) pairs.push_back({src[i], tgt[i], i});
  return pairs;
}

// ---------------------------------------------------------------------------
// Manifest

/// Ordered `key = value` record of how a prepared corpus was produced.
class Manifest {
public:
  void set(std::string key, std::string value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::move(key), std::move(value));
  }

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  static Manifest parse(std::string_view text) {
    Manifest m;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      const std::string line(text.substr(start, end - start));
      start = end + 1;
      ++line_no;
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find(" =");
      if (eq == std::string::npos || eq == 0) {
        throw FormatError("manifest line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      const std::size_t value_at = std::min(line.size(), eq + 3);
      m.set(line.substr(0, eq), line.substr(value_at));
    }
    return m;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << serialize();
  }

  static Manifest read(const std::string& path) { return parse(read_file(path)); }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace diacritize
