#pragma once

// Byte-pair encoding over whitespace-tokenized text.
//
// Words are split into UTF-8 characters with "</w>" attached to the last one.
// Merges are learned greedily by weighted pair frequency; ties go to the
// lexicographically smallest pair. The separator token is never split or
// merged. Segmented output uses the "@@" continuation convention: every piece
// except the last of a word carries a trailing "@@".

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corefmt/corpus.hpp"

namespace corefmt {

inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::string_view kContinuation = "@@";

class BpeModel {
 public:
  BpeModel() = default;
  explicit BpeModel(std::vector<std::pair<std::string, std::string>> merges);

  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  // Internal symbols of one word after applying every applicable merge.
  std::vector<std::string> word_symbols(const std::string& word) const;

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
};

// Word position -> first/last subword position, both inclusive.
struct SubwordMap {
  std::vector<std::pair<int, int>> offsets;

  static SubwordMap identity(std::size_t words);
};

struct Segmentation {
  Tokens pieces;
  SubwordMap map;
};

BpeModel learn_subword(const std::vector<Tokens>& corpus, int num_merges);

Segmentation segment(const BpeModel& model, const Tokens& words);

// Joins "@@"-continued pieces back into words.
Tokens detokenize(const Tokens& pieces);

CorefClusterSet remap_spans(const CorefClusterSet& clusters, const SubwordMap& map);

// Segments every sentence of a document and moves its clusters onto the
// subword positions of the concatenated source.
Document segment_document(const BpeModel& model, const Document& doc);

std::vector<std::string> utf8_characters(const std::string& word);

}  // namespace corefmt
