#include "corefmt/subword.hpp"

#include <algorithm>
#include <unordered_map>

namespace corefmt {

std::vector<std::string> utf8_characters(const std::string& word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const unsigned char c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
    }
    len = std::min(len, word.size() - i);
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

std::vector<std::string> initial_symbols(const std::string& word) {
  auto chars = utf8_characters(word);
  if (!chars.empty()) chars.back() += kEndOfWord;
  return chars;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& a, const std::string& b) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      out.push_back(a + b);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

}  // namespace

BpeModel::BpeModel(std::vector<std::pair<std::string, std::string>> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) rank_.emplace(merges_[i], i);
}

std::vector<std::string> BpeModel::word_symbols(const std::string& word) const {
  if (word == kSeparator) return {word};
  auto symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = rank_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == rank_.size()) break;
    const auto& [a, b] = merges_[best_rank];
    apply_merge(symbols, a, b);
  }
  return symbols;
}

SubwordMap SubwordMap::identity(std::size_t words) {
  SubwordMap m;
  for (std::size_t i = 0; i < words; ++i) m.offsets.emplace_back(static_cast<int>(i), static_cast<int>(i));
  return m;
}

BpeModel learn_subword(const std::vector<Tokens>& corpus, int num_merges) {
  if (num_merges < 0) throw CorpusError("num_merges must be non-negative");
  std::map<std::string, long long> freq;
  for (const auto& seq : corpus) {
    for (const auto& w : seq) {
      if (w != kSeparator && !w.empty()) ++freq[w];
    }
  }
  if (freq.empty()) throw CorpusError("empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long long> counts;
  for (const auto& [w, f] : freq) {
    words.push_back(initial_symbols(w));
    counts.push_back(f);
  }

  std::vector<std::pair<std::string, std::string>> merges;
  for (int step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long long> pairs;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& sym = words[i];
      for (std::size_t j = 0; j + 1 < sym.size(); ++j) pairs[{sym[j], sym[j + 1]}] += counts[i];
    }
    if (pairs.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum wins.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto merge = best->first;
    for (auto& sym : words) apply_merge(sym, merge.first, merge.second);
    merges.push_back(merge);
  }
  return BpeModel(std::move(merges));
}

Segmentation segment(const BpeModel& model, const Tokens& words) {
  Segmentation out;
  std::unordered_map<std::string, std::vector<std::string>> cache;
  for (const auto& w : words) {
    auto it = cache.find(w);
    if (it == cache.end()) it = cache.emplace(w, model.word_symbols(w)).first;
    const auto& symbols = it->second;
    const int first = static_cast<int>(out.pieces.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      std::string piece = symbols[i];
      if (i + 1 < symbols.size()) {
        piece += kContinuation;
      } else if (piece.size() >= kEndOfWord.size() &&
                 piece.compare(piece.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
        piece.resize(piece.size() - kEndOfWord.size());
      }
      out.pieces.push_back(std::move(piece));
    }
    out.map.offsets.emplace_back(first, static_cast<int>(out.pieces.size()) - 1);
  }
  return out;
}

Tokens detokenize(const Tokens& pieces) {
  Tokens words;
  std::string current;
  bool open = false;
  for (const auto& p : pieces) {
    if (p.size() >= kContinuation.size() &&
        p.compare(p.size() - kContinuation.size(), kContinuation.size(), kContinuation) == 0) {
      current += p.substr(0, p.size() - kContinuation.size());
      open = true;
    } else {
      current += p;
      words.push_back(std::move(current));
      current.clear();
      open = false;
    }
  }
  if (open) words.push_back(std::move(current));
  return words;
}

CorefClusterSet remap_spans(const CorefClusterSet& clusters, const SubwordMap& map) {
  CorefClusterSet out;
  const int n = static_cast<int>(map.offsets.size());
  for (const auto& c : clusters.clusters) {
    Cluster mapped;
    for (const Span& s : c) {
      if (s.start < 0 || s.end < s.start || s.end >= n) throw CorpusError("span out of range");
      mapped.push_back(Span{map.offsets[s.start].first, map.offsets[s.end].second});
    }
    out.clusters.push_back(std::move(mapped));
  }
  return out;
}

Document segment_document(const BpeModel& model, const Document& doc) {
  Document out;
  out.doc_id = doc.doc_id;
  SubwordMap map;
  int base = 0;
  for (const auto& sentence : doc.sentences_src) {
    Segmentation seg = segment(model, sentence);
    for (const auto& [first, last] : seg.map.offsets) map.offsets.emplace_back(first + base, last + base);
    base += static_cast<int>(seg.pieces.size());
    out.sentences_src.push_back(std::move(seg.pieces));
  }
  for (const auto& sentence : doc.sentences_tgt) out.sentences_tgt.push_back(segment(model, sentence).pieces);
  out.clusters = remap_spans(doc.clusters, map);
  return out;
}

}  // namespace corefmt
