#pragma once

// Slow, independently written reference implementations. Tests compare the
// library against these rather than against itself.

#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "corefmt/corpus.hpp"
#include "corefmt/matrix.hpp"

namespace corefmt::testing {

// -log of the summed probability of every antecedent assignment consistent
// with the gold clusters, enumerated one assignment at a time. `scores(s, c)`
// is read for c < s only; the dummy antecedent scores 0.
inline double brute_force_coref_loss(const Matrix& scores, const std::vector<Span>& spans, const CorefClusterSet& gold) {
  const std::size_t k = spans.size();
  std::vector<int> cluster(k, -1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t c = 0; c < gold.clusters.size(); ++c) {
      for (const Span& s : gold.clusters[c]) {
        if (s == spans[i]) cluster[i] = static_cast<int>(c);
      }
    }
  }
  // options[s]: allowed antecedents, -1 meaning the dummy.
  std::vector<std::vector<int>> options(k);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t c = 0; c < s; ++c) {
      if (cluster[s] >= 0 && cluster[c] == cluster[s]) options[s].push_back(static_cast<int>(c));
    }
    if (options[s].empty()) options[s].push_back(-1);
  }
  auto prob = [&](std::size_t s, int a) {
    double z = 1.0;
    for (std::size_t c = 0; c < s; ++c) z += std::exp(scores(s, c));
    return (a < 0 ? 1.0 : std::exp(scores(s, static_cast<std::size_t>(a)))) / z;
  };
  std::vector<std::size_t> pick(k, 0);
  double total = 0.0;
  while (true) {
    double p = 1.0;
    for (std::size_t s = 0; s < k; ++s) p *= prob(s, options[s][pick[s]]);
    total += p;
    std::size_t s = 0;
    while (s < k && ++pick[s] == options[s].size()) pick[s++] = 0;
    if (s == k) break;
  }
  return -std::log(total);
}

// Corpus BLEU-4 from n-gram strings and a product of precisions.
inline double reference_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  double match[5] = {0, 0, 0, 0, 0}, total[5] = {0, 0, 0, 0, 0};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<double>(hyps[i].size());
    ref_len += static_cast<double>(refs[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::string, int> ref_grams;
      for (std::size_t j = 0; j + n <= refs[i].size(); ++j) {
        std::string g;
        for (std::size_t t = j; t < j + n; ++t) g += refs[i][t] + '\x1f';
        ++ref_grams[g];
      }
      for (std::size_t j = 0; j + n <= hyps[i].size(); ++j) {
        std::string g;
        for (std::size_t t = j; t < j + n; ++t) g += hyps[i][t] + '\x1f';
        total[n] += 1;
        if (ref_grams[g] > 0) {
          --ref_grams[g];
          match[n] += 1;
        }
      }
    }
  }
  double product = 1.0;
  for (int n = 1; n <= 4; ++n) {
    if (match[n] == 0) return 0.0;
    product *= match[n] / total[n];
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::pow(product, 0.25);
}

struct ReferenceMuc {
  double precision, recall, f1;
};

// Link counting with union-find: merge the mentions of each key cluster that
// share a response cluster, then count the surviving components.
inline std::pair<double, double> reference_muc_links(const CorefClusterSet& key, const CorefClusterSet& response) {
  double found = 0, needed = 0;
  for (const Cluster& k : key.clusters) {
    std::vector<std::size_t> parent(k.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto root = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x];
      return x;
    };
    for (const Cluster& r : response.clusters) {
      std::vector<std::size_t> inside;
      for (std::size_t i = 0; i < k.size(); ++i) {
        for (const Span& s : r) {
          if (s == k[i]) inside.push_back(i);
        }
      }
      for (std::size_t i = 1; i < inside.size(); ++i) parent[root(inside[i])] = root(inside[0]);
    }
    std::size_t components = 0;
    for (std::size_t i = 0; i < k.size(); ++i) components += root(i) == i;
    found += static_cast<double>(k.size() - components);
    needed += static_cast<double>(k.size() - 1);
  }
  return {found, needed};
}

inline ReferenceMuc reference_muc(const CorefClusterSet& predicted, const CorefClusterSet& gold) {
  const auto [rf, rn] = reference_muc_links(gold, predicted);
  const auto [pf, pn] = reference_muc_links(predicted, gold);
  ReferenceMuc m{pn > 0 ? pf / pn : 0.0, rf / rn, 0.0};
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// Random clusterings over mentions {0,0}..{n-1,n-1}; each cluster has >= 2 members.
template <class Rng>
CorefClusterSet random_clustering(Rng& rng, int mentions, int max_clusters) {
  std::vector<int> owner(static_cast<std::size_t>(mentions));
  for (auto& o : owner) o = static_cast<int>(rng() % static_cast<unsigned>(max_clusters + 1)) - 1;
  CorefClusterSet out;
  for (int c = 0; c < max_clusters; ++c) {
    Cluster cl;
    for (int i = 0; i < mentions; ++i) {
      if (owner[static_cast<std::size_t>(i)] == c) cl.push_back({i, i});
    }
    if (cl.size() >= 2) out.clusters.push_back(cl);
  }
  return out;
}

}  // namespace corefmt::testing
