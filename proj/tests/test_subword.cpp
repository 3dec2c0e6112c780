#include "doctest.h"

#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include "corefmt/subword.hpp"

using namespace corefmt;

namespace {

// Independent learner: words are kept as space-separated symbol strings and
// pairs are counted by tokenizing those strings.
std::vector<std::pair<std::string, std::string>> oracle_merges(const std::vector<Tokens>& corpus, int num_merges) {
  std::map<std::string, long long> freq;
  for (const auto& s : corpus) {
    for (const auto& w : s) {
      if (w != "_eos") ++freq[w];
    }
  }
  std::map<std::string, long long> vocab;  // "c1 c2 ... cn</w>" -> count
  for (const auto& [w, f] : freq) {
    std::string sym;
    for (std::size_t i = 0; i < w.size(); ++i) sym += (i ? " " : "") + std::string(1, w[i]);
    vocab[sym + "</w>"] += f;
  }
  std::vector<std::pair<std::string, std::string>> merges;
  for (int k = 0; k < num_merges; ++k) {
    std::map<std::pair<std::string, std::string>, long long> pairs;
    for (const auto& [sym, f] : vocab) {
      std::istringstream in(sym);
      std::vector<std::string> parts{std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
      for (std::size_t i = 0; i + 1 < parts.size(); ++i) pairs[{parts[i], parts[i + 1]}] += f;
    }
    if (pairs.empty()) break;
    long long top = -1;
    std::pair<std::string, std::string> best;
    for (const auto& [p, c] : pairs) {
      if (c > top) {
        top = c;
        best = p;
      }
    }
    merges.push_back(best);
    std::map<std::string, long long> next;
    for (const auto& [sym, f] : vocab) {
      std::istringstream in(sym);
      std::vector<std::string> parts{std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
      std::string out;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        std::string piece = parts[i];
        if (i + 1 < parts.size() && parts[i] == best.first && parts[i + 1] == best.second) {
          piece += parts[++i];
        }
        out += (out.empty() ? "" : " ") + piece;
      }
      next[out] += f;
    }
    vocab = std::move(next);
  }
  return merges;
}

}  // namespace

TEST_CASE("classic toy corpus: first merges") {
  std::vector<Tokens> corpus;
  auto add = [&](const std::string& w, int n) {
    for (int i = 0; i < n; ++i) corpus.push_back({w});
  };
  add("low", 5);
  add("lower", 2);
  add("newest", 6);
  add("widest", 3);
  const auto model = learn_subword(corpus, 3);
  // (e,s) and (s,t</w>) both occur 9 times; the smaller pair wins.
  const std::vector<std::pair<std::string, std::string>> expected{{"e", "s"}, {"es", "t</w>"}, {"l", "o"}};
  CHECK(model.merges() == expected);
}

TEST_CASE("merge learning matches the string-based oracle") {
  std::mt19937_64 rng(17);
  const std::string alphabet = "abcde";
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Tokens> corpus;
    for (int s = 0; s < 6; ++s) {
      Tokens sent;
      for (int w = 0; w < 5; ++w) {
        std::string word;
        for (std::size_t len = 1 + rng() % 5; len > 0; --len) word += alphabet[rng() % alphabet.size()];
        sent.push_back(word);
      }
      if (s % 2) sent.push_back("_eos");
      corpus.push_back(sent);
    }
    const int merges = 1 + static_cast<int>(rng() % 30);
    CHECK(learn_subword(corpus, merges).merges() == oracle_merges(corpus, merges));
  }
}

TEST_CASE("segmentation round trip and map") {
  const std::vector<Tokens> corpus{{"lower", "newest", "_eos", "low"}};
  const auto model = learn_subword(corpus, 4);
  const Tokens words{"lowest", "_eos", "new", "x"};
  const auto seg = segment(model, words);
  CHECK(detokenize(seg.pieces) == words);
  REQUIRE(seg.map.offsets.size() == words.size());
  CHECK(seg.pieces[seg.map.offsets[1].first] == "_eos");
  CHECK(seg.map.offsets[1].first == seg.map.offsets[1].second);
  for (const auto& [a, b] : seg.map.offsets) {
    for (int i = a; i < b; ++i) CHECK(seg.pieces[i].ends_with("@@"));
    CHECK_FALSE(seg.pieces[b].ends_with("@@"));
  }
}

TEST_CASE("separator is never merged") {
  const std::vector<Tokens> corpus{{"_eos", "_eos", "_eos", "ab"}};
  const auto model = learn_subword(corpus, 10);
  for (const auto& [a, b] : model.merges()) {
    CHECK(a.find("_eos") == std::string::npos);
    CHECK(b.find("_eos") == std::string::npos);
  }
  CHECK(model.word_symbols("_eos") == std::vector<std::string>{"_eos"});
}

TEST_CASE("learning stops when no pairs remain, errors on bad input") {
  CHECK(learn_subword({{"a", "b"}}, 5).merges().empty());
  CHECK_THROWS_AS(learn_subword({}, 3), CorpusError);
  CHECK_THROWS_AS(learn_subword({{"ab"}}, -1), CorpusError);
}

TEST_CASE("remap spans onto subword positions") {
  SubwordMap map;
  map.offsets = {{0, 1}, {2, 2}, {3, 5}};
  CorefClusterSet c{{{{0, 0}, {2, 2}}, {{1, 2}, {0, 1}}}};
  const auto r = remap_spans(c, map);
  CHECK(r.clusters[0] == Cluster{{0, 1}, {3, 5}});
  CHECK(r.clusters[1] == Cluster{{2, 5}, {0, 2}});
  CorefClusterSet bad{{{{0, 0}, {3, 3}}}};
  CHECK_THROWS_WITH_AS(remap_spans(bad, map), "span out of range", CorpusError);
  CHECK(remap_spans(c, SubwordMap::identity(3)) == c);
}

TEST_CASE("utf8 characters stay whole") {
  CHECK(utf8_characters("Tür") == std::vector<std::string>{"T", "ü", "r"});
  const auto model = learn_subword({{"Tür", "Tür"}}, 1);
  CHECK(model.merges().front().second.find("\xc3") == 0);
}

TEST_CASE("document segmentation keeps clusters on the same words") {
  Document d{"d", {{"lower", "newest"}, {"low", "widest", "lowest"}}, {{"x", "y"}, {"z"}}, {{{{0, 1}, {4, 4}}, {{2, 2}, {3, 3}}}}};
  const BpeModel bpe = learn_subword({{"low", "low", "lower", "newest", "widest", "lowest"}}, 6);
  const Document seg = segment_document(bpe, d);
  REQUIRE(seg.sentences_src.size() == 2);
  Tokens pieces;
  for (const auto& s : seg.sentences_src) pieces.insert(pieces.end(), s.begin(), s.end());
  Tokens words;
  for (const auto& s : d.sentences_src) words.insert(words.end(), s.begin(), s.end());
  REQUIRE(seg.clusters.clusters.size() == d.clusters.clusters.size());
  for (std::size_t c = 0; c < d.clusters.clusters.size(); ++c) {
    for (std::size_t k = 0; k < d.clusters.clusters[c].size(); ++k) {
      const Span w = d.clusters.clusters[c][k];
      const Span p = seg.clusters.clusters[c][k];
      const Tokens got = detokenize(Tokens(pieces.begin() + p.start, pieces.begin() + p.end + 1));
      CHECK(got == Tokens(words.begin() + w.start, words.begin() + w.end + 1));
    }
  }
  CHECK(detokenize(seg.sentences_tgt[0]) == d.sentences_tgt[0]);
}
