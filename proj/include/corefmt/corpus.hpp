#pragma once

// Documents, m-to-m windows and coreference cluster sets.
//
// Spans are 0-based and inclusive in memory. Every file format stores them
// 1-based (see io.hpp).

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace corefmt {

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kSeparator = "_eos";

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Span {
  int start = 0;
  int end = 0;  // inclusive
  int length() const { return end - start + 1; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

using Cluster = std::vector<Span>;

struct CorefClusterSet {
  std::vector<Cluster> clusters;

  bool empty() const { return clusters.empty(); }
  std::size_t mention_count() const;
  // Sorts spans inside each cluster and clusters by their first span.
  void normalize();
  friend bool operator==(const CorefClusterSet&, const CorefClusterSet&) = default;
};

// Throws CorpusError unless every cluster has >= 2 non-overlapping spans with
// 0 <= start <= end < length.
void validate_clusters(const CorefClusterSet& clusters, std::size_t length);
// As above, and additionally rejects spans that cover a separator token.
void validate_clusters(const CorefClusterSet& clusters, const Tokens& sequence);

struct Document {
  std::string doc_id;
  std::vector<Tokens> sentences_src;
  std::vector<Tokens> sentences_tgt;
  // Indices into the concatenation of sentences_src (no separators).
  CorefClusterSet clusters;
};

void validate_document(const Document& doc);

struct DocumentWindow {
  std::string doc_id;
  std::size_t index = 0;  // sentence the window ends at
  std::vector<Tokens> src_sentences;
  std::vector<Tokens> tgt_sentences;
  Tokens src_joined;
  Tokens tgt_joined;
  CorefClusterSet clusters;  // indices into src_joined
};

Tokens join_with_separator(const std::vector<Tokens>& sentences);
std::vector<Tokens> split_by_separator(const Tokens& sequence);

// One window per sentence; window k holds sentences k-m+1..k, left-padded with
// empty sentences. Clusters keep only spans inside the window and are dropped
// when fewer than two spans survive.
std::vector<DocumentWindow> sliding_windows(const Document& doc, int m);

// Last sentence of a separator-joined sequence.
Tokens last_sentence(const Tokens& sequence);

}  // namespace corefmt
