#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "corefmt/evaluation.hpp"
#include "corefmt/experiments.hpp"
#include "corefmt/io.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace corefmt;
using corefmt::testing::random_clustering;
using corefmt::testing::reference_bleu;
using corefmt::testing::reference_muc;

namespace {

Tokens words(const std::string& s) { return split_whitespace(s); }

Tokens random_sentence(std::mt19937_64& rng, std::size_t max_len) {
  static const char* pool[] = {"a", "b", "c", "d", "e", "f"};
  Tokens t(1 + rng() % max_len);
  for (auto& w : t) w = pool[rng() % 6];
  return t;
}

Model random_model(std::size_t seed, int heads = 2) {
  auto docs = corefmt::testing::synthetic_documents({4, 4, 1});
  auto cfg = corefmt::testing::tiny_config();
  cfg.heads = heads;
  return make_model(cfg, build_vocab(docs), seed);
}

}  // namespace

TEST_CASE("BLEU frozen values") {
  const Tokens ref = words("the cat sat on the mat");
  CHECK(corpus_bleu({ref}, {ref}) == 100.0);
  // 5/6, 3/5, 2/4, 1/3 with no brevity penalty: (1/12)^(1/4)
  CHECK(corpus_bleu({words("the cat sat on a mat")}, {ref}) == doctest::Approx(53.7284965911771).epsilon(1e-12));
  CHECK(corpus_bleu({words("x y z w")}, {ref}) == 0.0);
  CHECK(corpus_bleu({words("mat the")}, {ref}) == 0.0);
  CHECK_THROWS(corpus_bleu({ref}, {}));
  CHECK_THROWS(corpus_bleu({}, {}));
}

TEST_CASE("BLEU matches an independent implementation") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> hyps, refs;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      refs.push_back(random_sentence(rng, 12));
      hyps.push_back(rng() % 3 == 0 ? refs.back() : random_sentence(rng, 12));
    }
    CHECK(corpus_bleu(hyps, refs) == doctest::Approx(reference_bleu(hyps, refs)).epsilon(1e-11));
  }
}

TEST_CASE("sentence BLEU smoothing") {
  const Tokens ref = words("the cat sat on the mat");
  // 5/6, (3+1)/(5+1), (2+1)/(4+1), (1+1)/(3+1): (1/6)^(1/4)
  CHECK(sentence_bleu(words("the cat sat on a mat"), ref) == doctest::Approx(63.89431042462724).epsilon(1e-12));
  CHECK(sentence_bleu(ref, ref) == 100.0);
  CHECK(sentence_bleu(words("x y"), ref) == 0.0);
  CHECK(sentence_bleu({}, ref) == 0.0);
  // One word: 1/1, then (0+1)/(0+1) three times, brevity exp(1 - 6).
  CHECK(sentence_bleu(words("cat"), ref) == doctest::Approx(100.0 * std::exp(-5.0)));
}

TEST_CASE("MUC hand fixture and degenerate cases") {
  const Span a{0, 0}, b{1, 1}, c{2, 2};
  const CorefClusterSet gold{{{a, b, c}}};
  const auto r = muc_score(CorefClusterSet{{{a, b}, {c, c}}}, gold);
  CHECK(r.recall == 0.5);
  CHECK(r.precision == 1.0);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  const auto same = muc_score(gold, gold);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);
  const auto empty = muc_score(CorefClusterSet{}, gold);
  CHECK(empty.recall == 0.0);
  CHECK(empty.precision == 0.0);
  CHECK(empty.f1 == 0.0);
  CHECK_THROWS_WITH(muc_score(gold, CorefClusterSet{}), "degenerate gold");
  CHECK_THROWS_WITH(muc_score(gold, CorefClusterSet{{{a}}}), "degenerate gold");
}

TEST_CASE("MUC matches link counting by union-find") {
  std::mt19937_64 rng(5);
  int checked = 0;
  while (checked < 300) {
    const auto gold = random_clustering(rng, 8, 3);
    const auto pred = random_clustering(rng, 8, 3);
    if (gold.empty()) continue;
    const auto got = muc_score(pred, gold);
    const auto want = reference_muc(pred, gold);
    CHECK(got.recall == want.recall);
    CHECK(got.precision == want.precision);
    CHECK(got.f1 == want.f1);
    CHECK(got.f1 == doctest::Approx(got.precision + got.recall > 0
                                        ? 2 * got.precision * got.recall / (got.precision + got.recall)
                                        : 0.0));
    // Precision is recall with the roles swapped.
    if (!pred.empty()) CHECK(muc_score(gold, pred).recall == got.precision);
    ++checked;
  }
}

TEST_CASE("cluster pruning") {
  Cluster big;
  for (int i = 0; i < 10; ++i) big.push_back({i, i});
  const CorefClusterSet ten{{big}};
  CHECK(prune_clusters(ten, 0.0, 1) == ten);
  const auto p = prune_clusters(ten, 0.2, 1);
  REQUIRE(p.clusters.size() == 1);
  CHECK(p.clusters[0].size() == 8);
  CHECK(prune_clusters(ten, 0.2, 1) == p);

  const CorefClusterSet pair{{{{0, 0}, {3, 3}}}};
  CHECK(prune_clusters(pair, 0.5, 2) == pair);
  CHECK(prune_clusters(pair, 1.0, 2) == pair);
  CHECK_THROWS(prune_clusters(pair, 1.5, 2));
  CHECK_THROWS(prune_clusters(pair, -0.1, 2));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_clustering(rng, 12, 3);
    for (double f : {0.0, 0.1, 0.2, 0.3, 0.5}) {
      const auto q = prune_clusters(c, f, rng());
      REQUIRE(q.clusters.size() == c.clusters.size());
      std::size_t removed = 0;
      for (std::size_t k = 0; k < c.clusters.size(); ++k) {
        CHECK(q.clusters[k].size() >= 2);
        CHECK(std::includes(c.clusters[k].begin(), c.clusters[k].end(), q.clusters[k].begin(), q.clusters[k].end()));
        removed += c.clusters[k].size() - q.clusters[k].size();
      }
      CHECK(removed <= static_cast<std::size_t>(std::llround(f * static_cast<double>(c.mention_count()))));
    }
  }
}

TEST_CASE("attention heatmaps") {
  const Model m = random_model(3);
  const std::vector<int> src{4, 5, 6, Vocab::kSep, 7, 8};
  const Matrix hm = attention_heatmap(m, src);
  REQUIRE(hm.rows() == 6);
  REQUIRE(hm.cols() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    double z = 0;
    for (double x : hm.row(r)) z += x;
    CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
  }
  const Matrix coref = attention_heatmap(m, src, HeatmapSource::kCoref, {9, 10});
  CHECK(coref.rows() == 6);

  const Model one = random_model(3, 1);
  Graph g(false);
  AttentionTrace trace;
  encode(g, one, src, nullptr, nullptr, &trace);
  CHECK(attention_heatmap(one, src) == trace.encoder_self.back().at(0));

  std::stringstream io;
  write_heatmap(io, hm, "enc.last", "test");
  CHECK(io.str().rfind("# heatmap size=6 layer=enc.last model=test\n", 0) == 0);
  CHECK(read_heatmap(io) == hm);
}

TEST_CASE("contrastive scoring: ties are wrong, random models guess") {
  const Model m = random_model(7);
  ContrastiveItem tie{"deixis", {"the", "dog"}, {{"der", "Hund"}, {"der", "Hund"}}, 0};
  CHECK(contrastive_accuracy({tie}, m).accuracy("deixis") == 0.0);
  CHECK_THROWS(contrastive_accuracy({ContrastiveItem{"x", {"a"}, {{"a"}}, 0}}, m));

  std::mt19937_64 rng(13);
  const char* pool[] = {"der", "die", "das", "Hund", "Katze", "Haus", "ist", "ich"};
  std::vector<ContrastiveItem> items;
  for (int i = 0; i < 600; ++i) {
    ContrastiveItem it{"random", {"the", "dog"}, {}, rng() % 3};
    for (int k = 0; k < 3; ++k) {
      Tokens c(3);
      for (auto& w : c) w = pool[rng() % 8];
      it.candidates.push_back(c);
    }
    items.push_back(it);
  }
  const auto rep = contrastive_accuracy(items, m);
  CHECK(rep.counts.at("random").second == 600);
  CHECK(rep.overall() == doctest::Approx(1.0 / 3.0).epsilon(0.25));
}

TEST_CASE("contrastive files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "corefmt_contrastive.txt";
  std::vector<ContrastiveItem> items{{"deixis", {"i", "see", "it"}, {{"ich", "sehe", "ihn"}, {"ich", "sehe", "es"}}, 1},
                                     {"ellipsis-vp", {"a"}, {{"b"}, {"c"}, {"d"}}, 2}};
  write_contrastive_set(path, items);
  const auto back = read_contrastive_set(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].category == "deixis");
  CHECK(back[0].candidates == items[0].candidates);
  CHECK(back[1].correct == 2);
  std::ofstream(path) << "category x\nsource a\ncandidate b\ncandidate c\n";
  CHECK_THROWS_AS(read_contrastive_set(path), CorpusError);
  std::ofstream(path) << "category x\nsource a\ncandidate b\ncandidate c\ngold 2\n";
  CHECK_THROWS_AS(read_contrastive_set(path), CorpusError);
  std::filesystem::remove(path);
}

TEST_CASE("token accuracy is a ratio over target tokens plus eos") {
  const Model m = random_model(2);
  auto docs = corefmt::testing::synthetic_documents({2, 4, 1});
  std::vector<Example> ex;
  std::size_t expected = 0;
  for (const auto& w : windows_of(docs, 2)) {
    ex.push_back(make_example(w, m.vocab, true));
    expected += ex.back().tgt.size() + 1;
  }
  const auto acc = token_accuracy(m, ex);
  CHECK(acc.total == expected);
  CHECK(acc.ratio() >= 0.0);
  CHECK(acc.ratio() <= 1.0);
}
