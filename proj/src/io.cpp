#include "corefmt/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace corefmt {

Tokens split_whitespace(const std::string& line) {
  Tokens out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw CorpusError("write failed: " + path.string());
}

CorefClusterSet parse_cluster_record(const std::string& line, std::size_t line_number) {
  auto fail = [&](const std::string& why) {
    return CorpusError("malformed cluster record at line " + std::to_string(line_number) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(e.what());
  }
  if (!j.is_array()) throw fail("expected a list of clusters");
  CorefClusterSet out;
  for (const auto& cluster : j) {
    if (!cluster.is_array()) throw fail("cluster is not a list");
    Cluster c;
    for (const auto& span : cluster) {
      if (!span.is_array() || span.size() != 2 || !span[0].is_number_integer() || !span[1].is_number_integer()) {
        throw fail("span must be [start, end]");
      }
      const int start = span[0].get<int>();
      const int end = span[1].get<int>();
      if (start < 1 || end < start) throw fail("span indices must satisfy 1 <= start <= end");
      c.push_back(Span{start - 1, end - 1});
    }
    out.clusters.push_back(std::move(c));
  }
  return out;
}

std::string format_cluster_record(const CorefClusterSet& clusters) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : clusters.clusters) {
    nlohmann::json jc = nlohmann::json::array();
    for (const Span& s : c) jc.push_back({s.start + 1, s.end + 1});
    j.push_back(std::move(jc));
  }
  return j.dump();
}

std::vector<CorefClusterSet> read_cluster_sidecar(const std::filesystem::path& path) {
  std::vector<CorefClusterSet> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) out.push_back(parse_cluster_record(lines[i], i + 1));
  return out;
}

void write_cluster_sidecar(const std::filesystem::path& path, const std::vector<CorefClusterSet>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(format_cluster_record(r));
  write_lines(path, lines);
}

std::vector<Document> read_paired_documents(const std::filesystem::path& src, const std::filesystem::path& tgt,
                                            const std::vector<CorefClusterSet>& clusters) {
  const auto src_lines = read_lines(src);
  const auto tgt_lines = read_lines(tgt);
  if (src_lines.size() != tgt_lines.size()) {
    throw CorpusError("source and target files have different line counts");
  }
  std::vector<Document> docs;
  Document current;
  auto flush = [&]() {
    if (current.sentences_src.empty()) return;
    current.doc_id = "doc" + std::to_string(docs.size() + 1);
    docs.push_back(std::move(current));
    current = Document{};
  };
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    auto s = split_whitespace(src_lines[i]);
    auto t = split_whitespace(tgt_lines[i]);
    if (s.empty() != t.empty()) {
      throw CorpusError("document boundary mismatch at line " + std::to_string(i + 1));
    }
    if (s.empty()) {
      flush();
      continue;
    }
    current.sentences_src.push_back(std::move(s));
    current.sentences_tgt.push_back(std::move(t));
  }
  flush();
  if (!clusters.empty()) {
    if (clusters.size() != docs.size()) {
      throw CorpusError("cluster sidecar has " + std::to_string(clusters.size()) + " records for " +
                        std::to_string(docs.size()) + " documents");
    }
    for (std::size_t i = 0; i < docs.size(); ++i) docs[i].clusters = clusters[i];
  }
  for (const auto& d : docs) validate_document(d);
  return docs;
}

void write_paired_documents(const std::vector<Document>& docs, const std::filesystem::path& src,
                            const std::filesystem::path& tgt, const std::filesystem::path& clusters) {
  std::vector<std::string> s, t;
  std::vector<CorefClusterSet> records;
  for (const auto& d : docs) {
    if (!s.empty()) {
      s.emplace_back();
      t.emplace_back();
    }
    for (const auto& x : d.sentences_src) s.push_back(join_tokens(x));
    for (const auto& y : d.sentences_tgt) t.push_back(join_tokens(y));
    records.push_back(d.clusters);
  }
  write_lines(src, s);
  write_lines(tgt, t);
  if (!clusters.empty()) write_cluster_sidecar(clusters, records);
}

void write_window_set(const std::filesystem::path& dir, const std::vector<DocumentWindow>& windows) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> src, tgt, ids;
  std::vector<CorefClusterSet> clusters;
  for (const auto& w : windows) {
    src.push_back(join_tokens(w.src_joined));
    tgt.push_back(join_tokens(w.tgt_joined));
    ids.push_back(w.doc_id + ':' + std::to_string(w.index));
    clusters.push_back(w.clusters);
  }
  write_lines(dir / "windows.src", src);
  write_lines(dir / "windows.tgt", tgt);
  write_lines(dir / "windows.ids", ids);
  write_cluster_sidecar(dir / "windows.clusters", clusters);
}

std::vector<DocumentWindow> read_window_set(const std::filesystem::path& dir) {
  const auto src = read_lines(dir / "windows.src");
  const auto tgt = read_lines(dir / "windows.tgt");
  const auto ids = read_lines(dir / "windows.ids");
  const auto clusters = read_cluster_sidecar(dir / "windows.clusters");
  if (tgt.size() != src.size() || ids.size() != src.size() || clusters.size() != src.size()) {
    throw CorpusError("window set " + dir.string() + ": files have different line counts");
  }
  std::vector<DocumentWindow> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    DocumentWindow& w = out[i];
    const auto colon = ids[i].rfind(':');
    if (colon == std::string::npos) throw CorpusError("malformed window id at line " + std::to_string(i + 1));
    w.doc_id = ids[i].substr(0, colon);
    w.index = std::stoul(ids[i].substr(colon + 1));
    w.src_joined = split_whitespace(src[i]);
    w.tgt_joined = split_whitespace(tgt[i]);
    w.src_sentences = split_by_separator(w.src_joined);
    w.tgt_sentences = split_by_separator(w.tgt_joined);
    if (w.src_sentences.size() != w.tgt_sentences.size()) {
      throw CorpusError("window " + ids[i] + ": source and target sentence counts differ");
    }
    w.clusters = clusters[i];
    validate_clusters(w.clusters, w.src_joined);
  }
  return out;
}

void write_merges(const std::filesystem::path& path, const BpeModel& model) {
  std::vector<std::string> lines{"#version: 0.2"};
  for (const auto& [a, b] : model.merges()) lines.push_back(a + " " + b);
  write_lines(path, lines);
}

BpeModel read_merges(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> merges;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].rfind("#version", 0) == 0 || lines[i].empty()) continue;
    auto parts = split_whitespace(lines[i]);
    if (parts.size() != 2) throw CorpusError("malformed merge at line " + std::to_string(i + 1));
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeModel(std::move(merges));
}

}  // namespace corefmt
