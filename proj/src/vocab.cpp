#include "corefmt/vocab.hpp"

#include <algorithm>
#include <map>

namespace corefmt {

Vocab::Vocab() {
  add("<unk>");
  add("<bos>");
  add("<eos>");
  add(std::string(kSeparator));
}

void Vocab::add(const std::string& token) {
  if (index_.count(token) != 0) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<Tokens>& sequences) {
  std::map<std::string, long long> freq;
  for (const auto& s : sequences) {
    for (const auto& t : s) ++freq[t];
  }
  std::vector<std::pair<std::string, long long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, f] : items) v.add(tok);
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  if (tokens.size() < 4 || !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw CorpusError("vocabulary does not start with the reserved tokens");
  }
  for (const auto& t : tokens) v.add(t);
  if (v.tokens_.size() != tokens.size()) throw CorpusError("vocabulary has duplicate tokens");
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const Tokens& tokens, bool strict) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it == index_.end()) {
      if (strict) throw CorpusError("out-of-vocabulary token '" + t + "'");
      ids.push_back(kUnk);
    } else {
      ids.push_back(it->second);
    }
  }
  return ids;
}

Tokens Vocab::decode(const std::vector<int>& ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace corefmt
