#include "corefmt/corpus.hpp"

#include <algorithm>

namespace corefmt {

std::size_t CorefClusterSet::mention_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

void CorefClusterSet::normalize() {
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.empty() || b.empty()) return a.size() < b.size();
    return a.front() < b.front();
  });
}

void validate_clusters(const CorefClusterSet& clusters, std::size_t length) {
  for (std::size_t k = 0; k < clusters.clusters.size(); ++k) {
    Cluster c = clusters.clusters[k];
    if (c.size() < 2) {
      throw CorpusError("cluster " + std::to_string(k + 1) + " has fewer than 2 spans");
    }
    std::sort(c.begin(), c.end());
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Span& s = c[i];
      if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= length) {
        throw CorpusError("span out of range");
      }
      if (i > 0 && c[i - 1].end >= s.start) {
        throw CorpusError("cluster " + std::to_string(k + 1) + " has overlapping spans");
      }
    }
  }
}

void validate_clusters(const CorefClusterSet& clusters, const Tokens& sequence) {
  validate_clusters(clusters, sequence.size());
  for (const auto& c : clusters.clusters) {
    for (const Span& s : c) {
      for (int i = s.start; i <= s.end; ++i) {
        if (sequence[i] == kSeparator) throw CorpusError("span covers the separator token");
      }
    }
  }
}

void validate_document(const Document& doc) {
  if (doc.sentences_src.empty()) throw CorpusError("empty document");
  if (doc.sentences_src.size() != doc.sentences_tgt.size()) {
    throw CorpusError("document " + doc.doc_id + ": source/target sentence counts differ");
  }
  std::size_t words = 0;
  for (const auto* side : {&doc.sentences_src, &doc.sentences_tgt}) {
    for (const auto& s : *side) {
      if (std::find(s.begin(), s.end(), kSeparator) != s.end()) {
        throw CorpusError("document " + doc.doc_id + ": sentence contains the separator token");
      }
    }
  }
  std::vector<int> sentence_of;
  for (std::size_t i = 0; i < doc.sentences_src.size(); ++i) {
    words += doc.sentences_src[i].size();
    sentence_of.insert(sentence_of.end(), doc.sentences_src[i].size(), static_cast<int>(i));
  }
  validate_clusters(doc.clusters, words);
  for (const auto& c : doc.clusters.clusters) {
    for (const Span& s : c) {
      if (sentence_of[s.start] != sentence_of[s.end]) {
        throw CorpusError("document " + doc.doc_id + ": span crosses a sentence boundary");
      }
    }
  }
}

Tokens join_with_separator(const std::vector<Tokens>& sentences) {
  Tokens out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out.emplace_back(kSeparator);
    out.insert(out.end(), sentences[i].begin(), sentences[i].end());
  }
  return out;
}

std::vector<Tokens> split_by_separator(const Tokens& sequence) {
  std::vector<Tokens> out(1);
  for (const auto& t : sequence) {
    if (t == kSeparator) {
      out.emplace_back();
    } else {
      out.back().push_back(t);
    }
  }
  return out;
}

Tokens last_sentence(const Tokens& sequence) { return split_by_separator(sequence).back(); }

std::vector<DocumentWindow> sliding_windows(const Document& doc, int m) {
  if (m < 1) throw CorpusError("window size must be positive");
  validate_document(doc);
  const int n = static_cast<int>(doc.sentences_src.size());

  // Document word index -> (sentence, position).
  std::vector<int> doc_offset(n + 1, 0);
  for (int i = 0; i < n; ++i) doc_offset[i + 1] = doc_offset[i] + static_cast<int>(doc.sentences_src[i].size());
  auto sentence_of = [&](int word) {
    return static_cast<int>(std::upper_bound(doc_offset.begin(), doc_offset.end(), word) - doc_offset.begin()) - 1;
  };

  std::vector<DocumentWindow> windows;
  windows.reserve(n);
  for (int k = 0; k < n; ++k) {
    DocumentWindow w;
    w.doc_id = doc.doc_id;
    w.index = static_cast<std::size_t>(k);
    const int first = k - m + 1;
    // joined_offset[slot] = position of slot's first token in src_joined
    std::vector<int> joined_offset(m, 0);
    int pos = 0;
    for (int slot = 0; slot < m; ++slot) {
      const int s = first + slot;
      if (slot > 0) ++pos;  // separator
      joined_offset[slot] = pos;
      if (s >= 0) {
        w.src_sentences.push_back(doc.sentences_src[s]);
        w.tgt_sentences.push_back(doc.sentences_tgt[s]);
        pos += static_cast<int>(doc.sentences_src[s].size());
      } else {
        w.src_sentences.emplace_back();
        w.tgt_sentences.emplace_back();
      }
    }
    w.src_joined = join_with_separator(w.src_sentences);
    w.tgt_joined = join_with_separator(w.tgt_sentences);

    for (const auto& c : doc.clusters.clusters) {
      Cluster kept;
      for (const Span& sp : c) {
        const int s = sentence_of(sp.start);
        if (s < std::max(first, 0) || s > k) continue;
        const int base = joined_offset[s - first] - doc_offset[s];
        kept.push_back(Span{sp.start + base, sp.end + base});
      }
      if (kept.size() >= 2) w.clusters.clusters.push_back(std::move(kept));
    }
    w.clusters.normalize();
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace corefmt
