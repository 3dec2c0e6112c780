#pragma once

// Toy English -> German-like corpus with pronouns whose translation depends on
// the grammatical gender of their antecedent. Every introducing sentence is
// followed by `pronouns_per_intro` pronoun sentences about the same noun.

#include <cstdint>
#include <vector>

#include "corefmt/config.hpp"
#include "corefmt/corpus.hpp"
#include "corefmt/evaluation.hpp"

namespace corefmt::testing {

struct SyntheticOptions {
  std::size_t documents = 25;
  int sentences = 4;  // a multiple of 1 + pronouns_per_intro
  std::uint64_t seed = 7;
  int pronouns_per_intro = 1;
};

std::vector<Document> synthetic_documents(const SyntheticOptions& opts);

// Rule-based annotation over the concatenated source words: mentions are
// "the <noun>" and "it"; identical noun phrases corefer and "it" joins the
// most recent noun phrase. Clusters with a single mention are dropped.
CorefClusterSet annotate(const std::vector<Tokens>& sentences);

// One item per window: the reference target against copies whose final
// pronoun is replaced by each wrong gender.
std::vector<ContrastiveItem> synthetic_contrastive(const std::vector<Document>& docs, int m);

// Small model for fast tests.
ModelConfig tiny_config();

}  // namespace corefmt::testing
