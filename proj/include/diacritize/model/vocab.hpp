#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"
#include "diacritize/unicode.hpp"

namespace diacritize::model {

/// Character inventory. Ids 0..3 are PAD, BOS, EOS, UNK; corpus characters
/// follow in codepoint order.
class CharVocab {
public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  CharVocab() : CharVocab(std::vector<std::string>{}) {}

  /// Builds from corpus characters (reserved tokens are added here).
  explicit CharVocab(std::vector<std::string> characters) {
    tokens_ = {"<pad>", "<s>", "</s>", "<unk>"};
    std::sort(characters.begin(), characters.end(), [](const auto& a, const auto& b) {
      return unicode::decode(a) < unicode::decode(b);
    });
    characters.erase(std::unique(characters.begin(), characters.end()), characters.end());
    for (auto& c : characters) {
      if (unicode::length(c) != 1) throw InputError("vocabulary entry is not one character: " + c);
      tokens_.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  /// Every token on either side of the given chunks.
  static CharVocab from_chunks(const std::vector<ChunkPair>& chunks) {
    std::set<std::string> chars;
    for (const auto& c : chunks) {
      chars.insert(c.src_tokens.begin(), c.src_tokens.end());
      chars.insert(c.tgt_tokens.begin(), c.tgt_tokens.end());
    }
    return CharVocab(std::vector<std::string>(chars.begin(), chars.end()));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t id(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  std::vector<std::size_t> encode(const Tokens& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }

  /// Corpus tokens for output ids. UNK renders as U+FFFD; PAD/BOS/EOS are dropped.
  Tokens decode(const std::vector<std::size_t>& ids) const {
    Tokens out;
    for (auto i : ids) {
      if (i == kUnk) {
        out.push_back(unicode::encode(unicode::kReplacementChar));
      } else if (i >= kReserved && i < tokens_.size()) {
        out.push_back(tokens_[i]);
      }
    }
    return out;
  }

  friend bool operator==(const CharVocab& a, const CharVocab& b) { return a.tokens_ == b.tokens_; }

private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace diacritize::model
