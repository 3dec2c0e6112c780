#include "synthetic.hpp"

#include <map>
#include <string>

#include "corefmt/rng.hpp"

namespace corefmt::testing {

namespace {

enum Gender { kMasc, kFem, kNeut };

struct Noun {
  const char* en;
  const char* de;
  Gender gender;
};

constexpr Noun kNouns[] = {
    {"dog", "Hund", kMasc},  {"table", "Tisch", kMasc}, {"tree", "Baum", kMasc},
    {"cat", "Katze", kFem},  {"lamp", "Lampe", kFem},   {"door", "Tuer", kFem},
    {"house", "Haus", kNeut}, {"book", "Buch", kNeut},  {"car", "Auto", kNeut},
};

constexpr std::pair<const char*, const char*> kAdjectives[] = {
    {"big", "gross"}, {"old", "alt"}, {"new", "neu"}, {"small", "klein"}, {"red", "rot"},
};

constexpr const char* kArticleNom[] = {"der", "die", "das"};
constexpr const char* kArticleAcc[] = {"den", "die", "das"};
constexpr const char* kPronounNom[] = {"er", "sie", "es"};
constexpr const char* kPronounAcc[] = {"ihn", "sie", "es"};

template <class T, std::size_t N>
const T& pick(const T (&arr)[N], std::mt19937_64& rng) {
  return arr[uniform_index(rng, N)];
}

}  // namespace

std::vector<Document> synthetic_documents(const SyntheticOptions& opts) {
  const int block = 1 + opts.pronouns_per_intro;
  if (opts.pronouns_per_intro < 1 || opts.sentences % block != 0) {
    throw std::invalid_argument("synthetic documents need whole intro/pronoun blocks");
  }
  std::vector<Document> docs;
  for (std::size_t d = 0; d < opts.documents; ++d) {
    auto rng = make_stream(opts.seed, "synthetic.doc", {d});
    Document doc;
    doc.doc_id = "syn" + std::to_string(d + 1);
    for (int s = 0; s < opts.sentences; s += block) {
      const Noun& n = pick(kNouns, rng);
      const auto& a1 = pick(kAdjectives, rng);
      const auto* a2 = &pick(kAdjectives, rng);
      if (uniform_index(rng, 2) == 0) {
        doc.sentences_src.push_back({"the", n.en, "is", a1.first});
        doc.sentences_tgt.push_back({kArticleNom[n.gender], n.de, "ist", a1.second});
      } else {
        doc.sentences_src.push_back({"i", "like", "the", n.en});
        doc.sentences_tgt.push_back({"ich", "mag", kArticleAcc[n.gender], n.de});
      }
      for (int k = 0; k < opts.pronouns_per_intro; ++k) {
        if (k > 0) a2 = &pick(kAdjectives, rng);
        if (uniform_index(rng, 2) == 0) {
          doc.sentences_src.push_back({"it", "is", a2->first});
          doc.sentences_tgt.push_back({kPronounNom[n.gender], "ist", a2->second});
        } else {
          doc.sentences_src.push_back({"i", "see", "it"});
          doc.sentences_tgt.push_back({"ich", "sehe", kPronounAcc[n.gender]});
        }
      }
    }
    doc.clusters = annotate(doc.sentences_src);
    docs.push_back(std::move(doc));
  }
  return docs;
}

CorefClusterSet annotate(const std::vector<Tokens>& sentences) {
  Tokens words;
  for (const auto& s : sentences) words.insert(words.end(), s.begin(), s.end());
  std::map<std::string, std::size_t> by_phrase;
  std::vector<Cluster> clusters;
  int last = -1;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "the" && i + 1 < words.size()) {
      auto [it, fresh] = by_phrase.try_emplace(words[i + 1], clusters.size());
      if (fresh) clusters.emplace_back();
      clusters[it->second].push_back(Span{static_cast<int>(i), static_cast<int>(i + 1)});
      last = static_cast<int>(it->second);
      ++i;
    } else if (words[i] == "it" && last >= 0) {
      clusters[last].push_back(Span{static_cast<int>(i), static_cast<int>(i)});
    }
  }
  CorefClusterSet out;
  for (auto& c : clusters) {
    if (c.size() >= 2) out.clusters.push_back(std::move(c));
  }
  out.normalize();
  return out;
}

std::vector<ContrastiveItem> synthetic_contrastive(const std::vector<Document>& docs, int m) {
  std::vector<ContrastiveItem> items;
  for (const auto& doc : docs) {
    for (const auto& w : sliding_windows(doc, m)) {
      const Tokens& tgt = w.tgt_joined;
      if (tgt.empty()) continue;
      const std::string& last = tgt.back();
      const auto* set = kPronounAcc;
      std::size_t pos = tgt.size() - 1;
      int gender = -1;
      for (int g = 0; g < 3; ++g) {
        if (last == kPronounAcc[g]) gender = g;
      }
      if (gender < 0) {
        // "<pron> ist <adj>": the pronoun is third from the end.
        pos = tgt.size() - 3;
        set = kPronounNom;
        for (int g = 0; g < 3; ++g) {
          if (tgt[pos] == kPronounNom[g]) gender = g;
        }
      }
      if (gender < 0) continue;
      ContrastiveItem item;
      item.category = "pronoun";
      item.source = w.src_joined;
      item.candidates.push_back(tgt);
      for (int g = 0; g < 3; ++g) {
        if (g == gender) continue;
        Tokens alt = tgt;
        alt[pos] = set[g];
        item.candidates.push_back(std::move(alt));
      }
      item.correct = 0;
      if (item.candidates.size() >= 2) items.push_back(std::move(item));
    }
  }
  return items;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.heads = 2;
  c.ffn_dim = 32;
  c.coref_hidden = 16;
  c.window = 2;
  c.max_span_len = 4;
  return c;
}

}  // namespace corefmt::testing
