#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "corefmt/corpus.hpp"

namespace corefmt {

// Joint source/target vocabulary. Ids 0..3 are reserved for <unk>, <bos>,
// <eos> and the sentence separator.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;

  Vocab();
  // Tokens ordered by descending frequency, then lexicographically.
  static Vocab build(const std::vector<Tokens>& sequences);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // strict: out-of-vocabulary tokens throw CorpusError instead of mapping to <unk>.
  std::vector<int> encode(const Tokens& tokens, bool strict = false) const;
  Tokens decode(const std::vector<int>& ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace corefmt
